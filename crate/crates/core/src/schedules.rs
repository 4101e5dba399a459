//! Mixing (`β`) and re-injection (`θ`) weight sequences.
//!
//! All schedules are indexed from `k = 0`. Power laws `c·k^(-q)` are only ever
//! evaluated at `k >= switch >= 1`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Distance kept between `β(k)` and 1 when a power law overshoots.
pub const BETA_CAP_EPS: f64 = 1e-12;

/// Below this index tails are summed term by term before switching to the
/// Euler–Maclaurin closed form.
const DIRECT_TAIL_TERMS: u64 = 64;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("q must satisfy q > 1 so the sequence is summable (got q = {0})")]
    NonSummable(f64),
    #[error("beta early value must satisfy 0 <= beta < 1 (got {0})")]
    BetaOutOfRange(f64),
    #[error("{name} must be >= 0 (got {value})")]
    Negative { name: &'static str, value: f64 },
    #[error("switch index must be >= 1 (got {0})")]
    ZeroSwitch(u64),
    #[error("rho must satisfy 0 < rho < 1 (got {0})")]
    RhoOutOfRange(f64),
    #[error("theta family violates {inequality}: {detail}")]
    FamilyBound { inequality: &'static str, detail: String },
    #[error("band half-width must satisfy mu > 0 (got {0})")]
    NonPositiveMu(f64),
}

/// `β(k) = early` for `k < switch`, then `min(coeff·k^(-q), 1 - 1e-12)`.
///
/// With `a = b = coeff` the tail sits exactly on the power law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSchedule {
    early: f64,
    coeff: f64,
    q: f64,
    switch: u64,
}

/// Validating constructor for [`BetaSchedule`].
pub fn make_beta(early: f64, coeff: f64, q: f64, switch: u64) -> Result<BetaSchedule, ScheduleError> {
    BetaSchedule::new(early, coeff, q, switch)
}

impl BetaSchedule {
    pub fn new(early: f64, coeff: f64, q: f64, switch: u64) -> Result<Self, ScheduleError> {
        if !(0.0..1.0).contains(&early) {
            return Err(ScheduleError::BetaOutOfRange(early));
        }
        if !(coeff >= 0.0) || !coeff.is_finite() {
            return Err(ScheduleError::Negative { name: "beta coeff", value: coeff });
        }
        if !(q > 1.0) || !q.is_finite() {
            return Err(ScheduleError::NonSummable(q));
        }
        if switch == 0 {
            return Err(ScheduleError::ZeroSwitch(switch));
        }
        Ok(Self { early, coeff, q, switch })
    }

    pub fn early(&self) -> f64 {
        self.early
    }
    pub fn coeff(&self) -> f64 {
        self.coeff
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn switch(&self) -> u64 {
        self.switch
    }

    pub fn at(&self, k: u64) -> f64 {
        if k < self.switch {
            self.early
        } else {
            capped_power(self.coeff, self.q, k, 1.0 - BETA_CAP_EPS)
        }
    }

    /// `max_k β(k)`; the tail is non-increasing so it is attained at or before the switch.
    pub fn max_value(&self) -> f64 {
        self.early.max(self.at(self.switch))
    }

    /// `Σ_{k0 <= k < k1} β(k)` by direct summation.
    pub fn partial_sum(&self, k0: u64, k1: u64) -> f64 {
        (k0..k1).map(|k| self.at(k)).sum()
    }

    /// `Σ_{k >= k0} β(k)` in closed form.
    pub fn tail_sum(&self, k0: u64) -> f64 {
        let head = self.switch.saturating_sub(k0) as f64 * self.early;
        head + power_tail(self.coeff, self.q, k0.max(self.switch), 1.0 - BETA_CAP_EPS)
    }

    pub fn total_sum(&self) -> f64 {
        self.tail_sum(0)
    }
}

fn capped_power(coeff: f64, q: f64, k: u64, cap: f64) -> f64 {
    (coeff * (k as f64).powf(-q)).min(cap)
}

/// `Σ_{k >= k0} min(c·k^(-q), cap)` for `k0 >= 1`.
///
/// Terms are added directly while the cap is active or `k` is small; the rest
/// is `∫_m^∞ f + f(m)/2 - f'(m)/12`, an upper bound for completely monotone
/// `f` whose relative excess is `O(m^-4)`.
fn power_tail(coeff: f64, q: f64, k0: u64, cap: f64) -> f64 {
    if coeff == 0.0 {
        return 0.0;
    }
    let k0 = k0.max(1);
    // first index where the cap is inactive
    let uncapped_from = ((coeff / cap).powf(1.0 / q).ceil() as u64).saturating_add(1);
    let m = k0.max(DIRECT_TAIL_TERMS).max(uncapped_from);
    let direct: f64 = (k0..m).map(|k| capped_power(coeff, q, k, cap)).sum();
    let mf = m as f64;
    let integral = mf.powf(1.0 - q) / (q - 1.0);
    let correction = 0.5 * mf.powf(-q) + q * mf.powf(-q - 1.0) / 12.0;
    direct + coeff * (integral + correction)
}

/// Parameters of the noise-robust `θ` family.
///
/// `θ(k) = d1·n·δ·β(k)` for `k < switch` and `d2·n·b·δ·k^(-q)` afterwards,
/// where `b`, `q` are the β power-law coefficient and exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaFamily {
    pub d1: f64,
    pub d2: f64,
    pub switch: u64,
    pub n: usize,
    pub delta: f64,
    pub beta: BetaSchedule,
}

impl ThetaFamily {
    pub fn at(&self, k: u64) -> f64 {
        let scale = self.n as f64 * self.delta;
        if k < self.switch {
            self.d1 * scale * self.beta.at(k)
        } else {
            self.d2 * scale * self.beta.coeff() * (k as f64).powf(-self.beta.q())
        }
    }

    /// `θ(k) - β(k)·bound`, with `bound` a cap on the aggregate y-channel
    /// noise an agent can receive in one round. Positive means the
    /// re-injected `θ(k)·y(0)` dominates the noise.
    pub fn noise_margin(&self, k: u64, bound: f64) -> f64 {
        self.at(k) - self.beta.at(k) * bound
    }

    /// The family-level sufficient condition `d1·n > 1` and `d2·n > 1`.
    pub fn satisfies_dominance(&self) -> bool {
        self.d1 * self.n as f64 > 1.0 && self.d2 * self.n as f64 > 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ThetaSchedule {
    Zero,
    Geometric { rho: f64 },
    /// `early` for `k < switch`, `coeff·k^(-q)` afterwards.
    ConstantThenPower { early: f64, coeff: f64, q: f64, switch: u64 },
    Family(ThetaFamily),
}

/// `θ(k) = ρ^k`.
pub fn make_theta_geometric(rho: f64) -> Result<ThetaSchedule, ScheduleError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(ScheduleError::RhoOutOfRange(rho));
    }
    Ok(ThetaSchedule::Geometric { rho })
}

/// Constant early value followed by a power-law tail. Only checked for
/// non-negativity and summability.
pub fn make_theta_constant_then_power(
    early: f64,
    coeff: f64,
    q: f64,
    switch: u64,
) -> Result<ThetaSchedule, ScheduleError> {
    if !(early >= 0.0) || !early.is_finite() {
        return Err(ScheduleError::Negative { name: "theta early", value: early });
    }
    if !(coeff >= 0.0) || !coeff.is_finite() {
        return Err(ScheduleError::Negative { name: "theta coeff", value: coeff });
    }
    if !(q > 1.0) || !q.is_finite() {
        return Err(ScheduleError::NonSummable(q));
    }
    if switch == 0 {
        return Err(ScheduleError::ZeroSwitch(switch));
    }
    Ok(ThetaSchedule::ConstantThenPower { early, coeff, q, switch })
}

/// Member of the noise-robust family, checking
/// `d1 >= 1`, `1 <= d2 <= K^q/(n·b·δ)` and `K >= max(K_β, (n·δ·b)^(1/q))`.
pub fn make_theta_family(
    beta: BetaSchedule,
    n: usize,
    delta: f64,
    d1: f64,
    d2: f64,
    switch: u64,
) -> Result<ThetaSchedule, ScheduleError> {
    let bound = |inequality: &'static str, detail: String| ScheduleError::FamilyBound { inequality, detail };
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(ScheduleError::Negative { name: "delta", value: delta });
    }
    if n == 0 {
        return Err(bound("n >= 1", "n = 0".into()));
    }
    if !(d1 >= 1.0) || !d1.is_finite() {
        return Err(bound("d1 >= 1", format!("d1 = {d1}")));
    }
    if !(d2 >= 1.0) || !d2.is_finite() {
        return Err(bound("d2 >= 1", format!("d2 = {d2}")));
    }
    let q = beta.q();
    let nbd = n as f64 * beta.coeff() * delta;
    let k = switch as f64;
    if nbd > 0.0 {
        let d2_max = k.powf(q) / nbd;
        if d2 > d2_max {
            return Err(bound("d2 <= K_theta^q / (n b delta)", format!("d2 = {d2}, limit = {d2_max}")));
        }
    }
    let k_min = (beta.switch() as f64).max(nbd.powf(1.0 / q));
    if k < k_min {
        return Err(bound(
            "K_theta >= max(K_beta, (n delta b)^(1/q))",
            format!("K_theta = {switch}, minimum = {k_min}"),
        ));
    }
    Ok(ThetaSchedule::Family(ThetaFamily { d1, d2, switch, n, delta, beta }))
}

impl ThetaSchedule {
    pub fn at(&self, k: u64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Geometric { rho } => rho.powi(k.min(i32::MAX as u64) as i32),
            Self::ConstantThenPower { early, coeff, q, switch } => {
                if k < switch {
                    early
                } else {
                    coeff * (k as f64).powf(-q)
                }
            }
            Self::Family(f) => f.at(k),
        }
    }

    pub fn partial_sum(&self, k0: u64, k1: u64) -> f64 {
        (k0..k1).map(|k| self.at(k)).sum()
    }

    /// `Σ_{k >= k0} θ(k)` in closed form.
    pub fn tail_sum(&self, k0: u64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Geometric { rho } => rho.powf(k0 as f64) / (1.0 - rho),
            Self::ConstantThenPower { early, coeff, q, switch } => {
                switch.saturating_sub(k0) as f64 * early + power_tail(coeff, q, k0.max(switch), f64::INFINITY)
            }
            Self::Family(f) => {
                let scale = f.n as f64 * f.delta;
                let head = if k0 < f.switch { f.d1 * scale * f.beta.partial_sum(k0, f.switch) } else { 0.0 };
                head + f.d2 * scale * power_tail(f.beta.coeff(), f.beta.q(), k0.max(f.switch), f64::INFINITY)
            }
        }
    }

    pub fn total_sum(&self) -> f64 {
        self.tail_sum(0)
    }
}

/// `θ(0) = n·δ·Σβ / μ`, the initial re-injection weight that pins the
/// asymptotic consensus band to half-width `μ`.
pub fn theta_zero_for_band(beta: &BetaSchedule, n: usize, delta: f64, mu: f64) -> Result<f64, ScheduleError> {
    if !(mu > 0.0) {
        return Err(ScheduleError::NonPositiveMu(mu));
    }
    Ok(n as f64 * delta * beta.total_sum() / mu)
}

/// Inverse of [`theta_zero_for_band`]: the band half-width `μ` implied by a
/// configured `θ(0)`. `None` when `θ(0) = 0`.
pub fn band_halfwidth_for_theta_zero(beta: &BetaSchedule, n: usize, delta: f64, theta0: f64) -> Option<f64> {
    (theta0 > 0.0).then(|| n as f64 * delta * beta.total_sum() / theta0)
}
