//! Matrix form of NR-PushSum and the diagnostics built on it.
//!
//! Round `k` mixes with `M(k) = I + β(k)·P̃`, which equals
//! `diag(α_i p_ii) + β(k)·P̂`. Every `M(k)` is a polynomial in the same `P̃`,
//! so the products below commute and their accumulation order only affects
//! roundoff.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{check_strong_connectivity, split_weight_matrix, DirectedNetwork, WeightMatrix};
use crate::protocol::{max_deviation, nrps_alpha, RunTrace};
use crate::schedules::{BetaSchedule, ThetaSchedule};

/// Entries at or below this are structural zeros.
pub const SUPPORT_THRESHOLD: f64 = 1e-14;
/// Column-sum tolerance for a single mixing matrix.
pub const MIXING_COLUMN_TOL: f64 = 1e-12;
/// Column-sum tolerance for accumulated products.
pub const PRODUCT_COLUMN_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("band half-width must satisfy 0 <= mu < 1 (got {0})")]
    BandOutOfRange(f64),
    #[error("bound parameters must satisfy 0 < lambda < 1, C > 0, C1 > 0")]
    BoundParameters,
    #[error("need at least {needed} pre-floor samples for a rate fit, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("error does not decay (fitted slope {slope} >= 0)")]
    NoDecay { slope: f64 },
    #[error("expected {expected} noise terms, got {got}")]
    NoiseLength { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    pub round: u64,
    pub matrix: DMatrix<f64>,
}

/// `M = I + β·P̃` for a given `β`.
pub fn mixing_matrix(weights: &WeightMatrix, beta_k: f64) -> DMatrix<f64> {
    let (_, p_tilde) = split_weight_matrix(weights);
    DMatrix::identity(weights.n(), weights.n()) + p_tilde * beta_k
}

/// `M(k)` for round `k` of a schedule.
pub fn mixing_matrix_at(weights: &WeightMatrix, beta: &BetaSchedule, k: u64) -> MixingMatrix {
    MixingMatrix { round: k, matrix: mixing_matrix(weights, beta.at(k)) }
}

/// The same matrix assembled as `A + B = diag(α_i p_ii) + β·P̂`.
pub fn mixing_matrix_from_parts(weights: &WeightMatrix, beta_k: f64) -> DMatrix<f64> {
    let alpha = nrps_alpha(weights, beta_k).expect("beta in [0, 1] and positive self weights");
    let (p_hat, _) = split_weight_matrix(weights);
    let mut m = p_hat * beta_k;
    for i in 0..weights.n() {
        m[(i, i)] = alpha[i] * weights.self_weight(i);
    }
    m
}

/// `W(l, k) = M(l)·M(l+1)···M(k)`, the identity when `k < l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMatrix {
    pub from: u64,
    pub to: u64,
    pub matrix: DMatrix<f64>,
}

impl ProductMatrix {
    /// Number of factors.
    pub fn len(&self) -> u64 {
        (self.to + 1).saturating_sub(self.from)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.matrix.column_iter().map(|c| c.sum()).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.matrix.row_iter().map(|r| r.sum()).collect()
    }

    pub fn contraction(&self) -> f64 {
        contraction(&self.matrix)
    }
}

/// Accumulates `W(l, k)` left to right without renormalisation.
pub fn product_matrix(weights: &WeightMatrix, beta: &BetaSchedule, l: u64, k: u64) -> ProductMatrix {
    let n = weights.n();
    let (_, p_tilde) = split_weight_matrix(weights);
    let mut w = DMatrix::identity(n, n);
    let eye = DMatrix::<f64>::identity(n, n);
    for r in l..=k {
        if k < l {
            break;
        }
        w = &w * (&eye + &p_tilde * beta.at(r));
    }
    ProductMatrix { from: l, to: k, matrix: w }
}

/// `max_j max_{i1,i2} |W[j,i1] - W[j,i2]|`: the widest spread between
/// columns, row by row. Zero iff all columns are equal.
pub fn contraction(w: &DMatrix<f64>) -> f64 {
    w.row_iter()
        .map(|row| {
            let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// `contraction(W(0, k))` for `k = 0..=k_max`.
pub fn contraction_profile(weights: &WeightMatrix, beta: &BetaSchedule, k_max: u64) -> Vec<f64> {
    let n = weights.n();
    let (_, p_tilde) = split_weight_matrix(weights);
    let eye = DMatrix::<f64>::identity(n, n);
    let mut w = eye.clone();
    let mut out = Vec::with_capacity(k_max as usize + 1);
    for r in 0..=k_max {
        w = &w * (&eye + &p_tilde * beta.at(r));
        out.push(contraction(&w));
    }
    out
}

/// Column-stochastic, irreducible, aperiodic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsiaReport {
    pub column_stochastic: bool,
    pub irreducible: bool,
    pub aperiodic: bool,
    /// Every network edge appears in the support.
    pub covers_network: bool,
    pub max_column_error: f64,
}

impl CsiaReport {
    pub fn all_true(&self) -> bool {
        self.column_stochastic && self.irreducible && self.aperiodic
    }
}

pub fn check_csia(w: &ProductMatrix, net: &DirectedNetwork) -> CsiaReport {
    let m = &w.matrix;
    let n = m.nrows();
    let max_column_error = m.column_iter().map(|c| (c.sum() - 1.0).abs()).fold(0.0, f64::max);
    let support = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && m[(i, j)] > SUPPORT_THRESHOLD);
    let support_net = DirectedNetwork::new(n, support).expect("indices in range, no self loops");
    let irreducible = check_strong_connectivity(&support_net);
    let aperiodic = irreducible && (0..n).all(|i| m[(i, i)] > SUPPORT_THRESHOLD);
    let covers_network = net.n() == n && net.edges().all(|(i, j)| m[(i, j)] > SUPPORT_THRESHOLD);
    CsiaReport {
        column_stochastic: max_column_error <= PRODUCT_COLUMN_TOL,
        irreducible,
        aperiodic,
        covers_network,
        max_column_error,
    }
}

/// `w_o = 1 - max_k β(k)`.
pub fn row_sum_floor_base(beta: &BetaSchedule) -> f64 {
    1.0 - beta.max_value()
}

/// Checks `min_i Σ_j W_ij(l, k) > w_o^(k-l+1)`.
pub fn row_sums_exceed_floor(w: &ProductMatrix, w_o: f64) -> bool {
    let floor = w_o.powf(w.len() as f64);
    w.row_sums().into_iter().all(|s| s > floor)
}

/// One step of the compact recursion
/// `x(k+1) = A(k)x(k) + B(k)x(k) + θ(k)x(0) + β(k)η(k)`.
pub fn compact_step(
    weights: &WeightMatrix,
    beta_k: f64,
    theta_k: f64,
    x: &DMatrix<f64>,
    x0: &DMatrix<f64>,
    eta: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = weights.n();
    let alpha = nrps_alpha(weights, beta_k).expect("beta in [0, 1] and positive self weights");
    let a = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| alpha[i] * weights.self_weight(i)));
    let (p_hat, _) = split_weight_matrix(weights);
    let b = p_hat * beta_k;
    &a * x + &b * x + x0 * theta_k + eta * beta_k
}

/// Closed-form state after `k + 1` rounds:
///
/// `x(k+1) = W(0,k)x(0) + Σ_s θ(s)W(s+1,k)x(0) + Σ_s β(s)W(s+1,k)η(s)`.
///
/// `eta[s]` holds the stacked aggregate noise of round `s`; pass an empty
/// slice for the noiseless case. Products are built right to left in
/// recursion order, independently of [`product_matrix`].
pub fn closed_form_state(
    weights: &WeightMatrix,
    beta: &BetaSchedule,
    theta: &ThetaSchedule,
    x0: &DMatrix<f64>,
    eta: &[DMatrix<f64>],
    k: u64,
) -> Result<DMatrix<f64>, AnalysisError> {
    let steps = k as usize + 1;
    if !eta.is_empty() && eta.len() < steps {
        return Err(AnalysisError::NoiseLength { expected: steps, got: eta.len() });
    }
    let n = weights.n();
    let mut suffix = DMatrix::<f64>::identity(n, n);
    let mut acc = DMatrix::<f64>::zeros(x0.nrows(), x0.ncols());
    for s in (0..steps).rev() {
        let mut forcing = x0 * theta.at(s as u64);
        if let Some(e) = eta.get(s) {
            forcing += e * beta.at(s as u64);
        }
        acc += &suffix * forcing;
        suffix = &suffix * mixing_matrix(weights, beta.at(s as u64));
    }
    Ok(suffix * x0 + acc)
}

/// `((ū − μ)/(1 + μ), (ū + μ)/(1 − μ))` per component.
pub fn theorem4_band(u_bar: &[f64], mu: f64) -> Result<Vec<(f64, f64)>, AnalysisError> {
    if !(0.0..1.0).contains(&mu) {
        return Err(AnalysisError::BandOutOfRange(mu));
    }
    Ok(u_bar.iter().map(|&u| ((u - mu) / (1.0 + mu), (u + mu) / (1.0 - mu))).collect())
}

/// `C1·[λ^k + Σ_{s<k} θ(s)λ^(k−s−1) + θ(k)/C]`, evaluated by direct summation.
/// The constants are fit parameters, not derived quantities.
pub fn theorem3_bound(c1: f64, c: f64, lam: f64, theta: &ThetaSchedule, k: u64) -> Result<f64, AnalysisError> {
    if !(lam > 0.0 && lam < 1.0 && c > 0.0 && c1 > 0.0) {
        return Err(AnalysisError::BoundParameters);
    }
    let kf = k as f64;
    let memory: f64 = (0..k).map(|s| theta.at(s) * lam.powf(kf - s as f64 - 1.0)).sum();
    Ok(c1 * (lam.powf(kf) + memory + theta.at(k) / c))
}

/// Ordinary least squares of `ln e` on `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
}

pub fn fit_log_linear(rounds: &[f64], errors: &[f64]) -> LogLinearFit {
    let n = rounds.len().min(errors.len());
    let ys: Vec<f64> = errors[..n].iter().map(|e| e.ln()).collect();
    let xs = &rounds[..n];
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    LogLinearFit { slope, intercept, r_squared, samples: n }
}

/// Fitted `‖z_i(k) − ū‖ ≤ Υ·ϱ^k` envelope of a noiseless run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDiagnostics {
    pub lambda_hat: f64,
    pub upsilon_hat: f64,
    pub r_squared: f64,
    pub samples: usize,
    pub min_y: f64,
}

/// Minimum number of pre-floor samples for [`fit_geometric_rate`].
pub const MIN_FIT_SAMPLES: usize = 20;

/// Fits `log max_i ‖z_i(k) − ū‖` against `k` over the leading run of
/// snapshots whose error exceeds `100·ε_mach`.
pub fn fit_geometric_rate(trace: &RunTrace, u_bar: &[f64]) -> Result<ConvergenceDiagnostics, AnalysisError> {
    let floor = 100.0 * f64::EPSILON;
    let mut rounds = Vec::new();
    let mut errors = Vec::new();
    for s in &trace.snapshots {
        match max_deviation(&s.z_values(), u_bar) {
            Some(e) if e > floor => {
                rounds.push(s.round as f64);
                errors.push(e);
            }
            _ => break,
        }
    }
    if rounds.len() < MIN_FIT_SAMPLES {
        return Err(AnalysisError::TooFewSamples { needed: MIN_FIT_SAMPLES, got: rounds.len() });
    }
    let fit = fit_log_linear(&rounds, &errors);
    if fit.slope >= 0.0 {
        return Err(AnalysisError::NoDecay { slope: fit.slope });
    }
    Ok(ConvergenceDiagnostics {
        lambda_hat: fit.slope.exp(),
        upsilon_hat: fit.intercept.exp(),
        r_squared: fit.r_squared,
        samples: fit.samples,
        min_y: trace.diagnostics.min_y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{equal_neighbor_weights, generate_erdos_renyi};
    use crate::protocol::{RunDiagnostics, Snapshot};
    use crate::schedules::{make_beta, make_theta_geometric};

    fn weights(seed: u64) -> (DirectedNetwork, WeightMatrix) {
        let net = generate_erdos_renyi(10, 0.35, seed).unwrap();
        let w = equal_neighbor_weights(&net).unwrap();
        (net, w)
    }

    fn synthetic(errors: impl Iterator<Item = (u64, f64)>) -> RunTrace {
        let snapshots = errors
            .map(|(round, e)| Snapshot {
                round,
                z: vec![vec![Some(5.5 + e)], vec![Some(5.5)]],
                x: None,
                y: None,
                sum_x: vec![0.0],
                sum_y: 0.0,
                min_y: 1.0,
                consensus_error: None,
                max_deviation: None,
            })
            .collect();
        RunTrace {
            algorithm: "nrps".into(),
            u_bar: vec![5.5],
            soft_bound: false,
            snapshots,
            diagnostics: RunDiagnostics { rounds: 0, min_y: 1.0, ratio_breakdown_round: None },
        }
    }

    #[test]
    fn mixing_matrix_limits() {
        let (_, w) = weights(1);
        assert_eq!(mixing_matrix(&w, 0.0), DMatrix::identity(10, 10));
        let diff = (mixing_matrix(&w, 1.0) - w.matrix()).abs().max();
        assert!(diff < 1e-15);
    }

    #[test]
    fn two_expressions_agree() {
        let (_, w) = weights(2);
        for beta in [0.0, 0.1, 0.35, 0.9, 1.0] {
            let diff = (mixing_matrix(&w, beta) - mixing_matrix_from_parts(&w, beta)).abs().max();
            assert!(diff <= 1e-14, "beta {beta}: {diff}");
        }
    }

    #[test]
    fn pair_mixing_columns_sum_to_one() {
        let net = generate_erdos_renyi(2, 1.0, 0).unwrap();
        let w = equal_neighbor_weights(&net).unwrap();
        let m = mixing_matrix(&w, 0.35);
        for c in m.column_iter() {
            assert_eq!(c.sum(), 1.0);
        }
    }

    #[test]
    fn empty_and_single_products() {
        let (_, w) = weights(1);
        let b = make_beta(0.35, 100.0, 1.1, 200).unwrap();
        assert_eq!(product_matrix(&w, &b, 5, 4).matrix, DMatrix::identity(10, 10));
        assert!(product_matrix(&w, &b, 5, 4).is_empty());
        assert_eq!(product_matrix(&w, &b, 7, 7).matrix, mixing_matrix_at(&w, &b, 7).matrix);
    }

    #[test]
    fn contraction_decreases_over_window() {
        let (_, w) = weights(1);
        let b = make_beta(0.35, 100.0, 1.1, 200).unwrap();
        let c10 = product_matrix(&w, &b, 0, 10).contraction();
        let c100 = product_matrix(&w, &b, 0, 100).contraction();
        assert!(c100 < c10);
        let profile = contraction_profile(&w, &b, 100);
        assert!((profile[100] - c100).abs() < 1e-12);
    }

    #[test]
    fn csia_examples() {
        let (net, w) = weights(1);
        let id = ProductMatrix { from: 1, to: 0, matrix: DMatrix::identity(10, 10) };
        let r = check_csia(&id, &net);
        assert!(r.column_stochastic && !r.irreducible && !r.aperiodic);

        // explicit 3-cycle, one factor with β = 0.5
        let cyc = DirectedNetwork::new(3, [(1, 0), (2, 1), (0, 2)]).unwrap();
        let cw = equal_neighbor_weights(&cyc).unwrap();
        let b = make_beta(0.5, 0.0, 2.0, 10).unwrap();
        let w01 = product_matrix(&cw, &b, 0, 1);
        // M = I + 0.5 P̃ = [[.75,0,.25],[.25,.75,0],[0,.25,.75]]
        let m = DMatrix::from_row_slice(3, 3, &[0.75, 0.0, 0.25, 0.25, 0.75, 0.0, 0.0, 0.25, 0.75]);
        assert!((&w01.matrix - &m * &m).abs().max() < 1e-15);
        assert!(check_csia(&w01, &cyc).all_true());

        let b = make_beta(0.35, 100.0, 1.1, 200).unwrap();
        let r = check_csia(&product_matrix(&w, &b, 0, 50), &net);
        assert!(r.all_true() && r.covers_network);
    }

    #[test]
    fn row_sum_floor_claim() {
        let (_, w) = weights(3);
        let b = make_beta(0.35, 100.0, 1.1, 200).unwrap();
        let w_o = row_sum_floor_base(&b);
        for (l, k) in [(1, 1), (1, 20), (150, 260), (0, 400)] {
            assert!(row_sums_exceed_floor(&product_matrix(&w, &b, l, k), w_o));
        }
    }

    #[test]
    fn band_examples() {
        assert_eq!(theorem4_band(&[5.5], 0.0).unwrap(), vec![(5.5, 5.5)]);
        let (lo, hi) = theorem4_band(&[5.5], 0.5).unwrap()[0];
        assert!((lo - 10.0 / 3.0).abs() < 1e-15 && (hi - 12.0).abs() < 1e-15);
        let (lo, hi) = theorem4_band(&[0.0], 0.1).unwrap()[0];
        assert!((lo + 1.0 / 11.0).abs() < 1e-15 && (hi - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(theorem4_band(&[5.5], 1.0), Err(AnalysisError::BandOutOfRange(1.0)));
    }

    #[test]
    fn theorem3_examples() {
        let zero = ThetaSchedule::Zero;
        assert!((theorem3_bound(2.0, 1.0, 0.9, &zero, 7).unwrap() - 2.0 * 0.9f64.powi(7)).abs() < 1e-15);
        let geo = make_theta_geometric(0.5).unwrap();
        assert!((theorem3_bound(2.0, 4.0, 0.9, &geo, 0).unwrap() - 2.0 * (1.0 + 1.0 / 4.0)).abs() < 1e-15);
        assert!(theorem3_bound(1.0, 1.0, 1.0, &geo, 3).is_err());

        // Σ_{s<k} ρ^s λ^(k-s-1) = (λ^k - ρ^k)/(λ - ρ) <= λ^k/(λ - ρ), so the
        // bound sits under Υ·λ^k with Υ = C1·(1 + 1/(λ-ρ) + 1/C)
        let (c1, c, lam, rho) = (1.5, 0.8, 0.9, 0.7);
        let geo = make_theta_geometric(rho).unwrap();
        let upsilon = c1 * (1.0 + 1.0 / (lam - rho) + 1.0 / c);
        for k in 1..=200u64 {
            let lhs = theorem3_bound(c1, c, lam, &geo, k).unwrap();
            assert!(lhs <= upsilon * lam.powi(k as i32) * (1.0 + 1e-12), "k = {k}");
        }
    }

    #[test]
    fn synthetic_geometric_fit() {
        let trace = synthetic((0..60).map(|k| (k, 0.5 * 0.9f64.powi(k as i32))));
        let d = fit_geometric_rate(&trace, &[5.5]).unwrap();
        assert!((d.lambda_hat - 0.9).abs() < 1e-6, "{}", d.lambda_hat);
        assert!((d.upsilon_hat - 0.5).abs() < 1e-6, "{}", d.upsilon_hat);
        assert!(d.r_squared > 0.999_999);
    }

    #[test]
    fn flat_trace_is_rejected() {
        let trace = synthetic((0..60).map(|k| (k, 1.0)));
        assert!(matches!(fit_geometric_rate(&trace, &[5.5]), Err(AnalysisError::NoDecay { .. })));
        let short = synthetic((0..5).map(|k| (k, 0.5f64.powi(k as i32))));
        assert!(matches!(fit_geometric_rate(&short, &[5.5]), Err(AnalysisError::TooFewSamples { .. })));
    }
}
