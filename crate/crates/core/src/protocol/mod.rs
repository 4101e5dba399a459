//! Synchronous round-based PushSum and NR-PushSum in per-agent form.
//!
//! Every agent reads round-`k` values and writes round-`k+1` values. The
//! self term `p_ii·x_i(k)` never carries noise; only messages on edges do.

mod trace;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph::{DirectedNetwork, WeightMatrix};
use crate::noise::{effective_delta, sample_round, NoiseModel, RoundNoise};
use crate::schedules::{BetaSchedule, ThetaSchedule};

pub use trace::{consensus_error, max_deviation, RunDiagnostics, RunTrace, Snapshot};

/// Denominators at or below this are treated as a ratio breakdown.
pub const DEFAULT_EPS_Y: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("agent {agent} has zero self weight")]
    ZeroSelfWeight { agent: usize },
    #[error("beta(k) = {0} outside [0, 1]")]
    BetaOutOfRange(f64),
    #[error("denominator of agent {agent} fell to {value} at round {round}")]
    NonPositiveDenominator { round: u64, agent: usize, value: f64 },
    #[error("rounds and record_stride must be >= 1")]
    BadRunLength,
}

/// A run failure tagged with the round at which it happened.
#[derive(Debug, Error, PartialEq)]
#[error("round {round}: {source}")]
pub struct RunError {
    pub round: u64,
    #[source]
    pub source: ProtocolError,
}

/// Network, weights and the `n × p` matrix of initial values.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    net: DirectedNetwork,
    weights: WeightMatrix,
    u: DMatrix<f64>,
}

impl ProblemInstance {
    pub fn new(net: DirectedNetwork, weights: WeightMatrix, u: DMatrix<f64>) -> Result<Self, ProtocolError> {
        if weights.n() != net.n() || u.nrows() != net.n() {
            return Err(ProtocolError::Dimension(format!(
                "network has {} agents, weights {}, initial values {}",
                net.n(),
                weights.n(),
                u.nrows()
            )));
        }
        if u.ncols() == 0 {
            return Err(ProtocolError::Dimension("state dimension p must be >= 1".into()));
        }
        Ok(Self { net, weights, u })
    }

    /// Scalar initial values `u = [1, 2, ..., n]`.
    pub fn ramp(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, 1, |i, _| (i + 1) as f64)
    }

    pub fn net(&self) -> &DirectedNetwork {
        &self.net
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn initial_values(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn n(&self) -> usize {
        self.net.n()
    }

    pub fn dim(&self) -> usize {
        self.u.ncols()
    }

    /// `ū = (1/n) Σ u_i`, one entry per component.
    pub fn u_bar(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.u.column_iter().map(|c| c.sum() / n).collect()
    }
}

/// Agent estimates at round `k`. Undefined ratios are stored as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub k: u64,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub z: DMatrix<f64>,
    /// `α_i(k-1)` used to produce this state; ones for the initial state.
    pub alpha: DVector<f64>,
}

impl SimulationState {
    /// `x(0) = u`, `y(0) = 1`, `z(0) = u`.
    pub fn initial(inst: &ProblemInstance) -> Self {
        let n = inst.n();
        let x = inst.u.clone();
        let y = DVector::from_element(n, 1.0);
        let z = x.clone();
        Self { k: 0, x, y, z, alpha: DVector::from_element(n, 1.0) }
    }

    pub fn undefined_agents(&self) -> Vec<usize> {
        (0..self.z.nrows()).filter(|&i| self.z.row(i).iter().any(|v| v.is_nan())).collect()
    }
}

fn ratio(x: &DMatrix<f64>, y: &DVector<f64>, eps_y: f64) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, c| if y[i].abs() < eps_y { f64::NAN } else { x[(i, c)] / y[i] })
}

fn check_noise(inst: &ProblemInstance, noise: &RoundNoise) -> Result<(), ProtocolError> {
    if noise.dim() != inst.dim() || noise.edges().len() != inst.net.edge_count() {
        return Err(ProtocolError::Dimension(format!(
            "noise covers {} edges with p = {}, instance has {} edges with p = {}",
            noise.edges().len(),
            noise.dim(),
            inst.net.edge_count(),
            inst.dim()
        )));
    }
    Ok(())
}

/// One classical PushSum step over noisy links. Agents whose denominator
/// drops below `eps_y` in magnitude get NaN estimates.
pub fn pushsum_round(
    inst: &ProblemInstance,
    state: &SimulationState,
    noise: &RoundNoise,
    eps_y: f64,
) -> Result<SimulationState, ProtocolError> {
    check_noise(inst, noise)?;
    let (n, p) = (inst.n(), inst.dim());
    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let pii = inst.weights.self_weight(i);
        for c in 0..p {
            x[(i, c)] = pii * state.x[(i, c)];
        }
        y[i] = pii * state.y[i];
        for &j in inst.net.in_neighbors(i) {
            let pij = inst.weights.get(i, j);
            let ex = noise.eta_x(i, j).expect("edge present");
            for c in 0..p {
                x[(i, c)] += pij * state.x[(j, c)] + ex[c];
            }
            y[i] += pij * state.y[j] + noise.eta_y(i, j).expect("edge present");
        }
    }
    let z = ratio(&x, &y, eps_y);
    Ok(SimulationState { k: state.k + 1, x, y, z, alpha: DVector::from_element(n, 1.0) })
}

/// `α_i = (1 - β(1 - p_ii)) / p_ii`, which makes
/// `diag(α_i p_ii) + β·P_hat` column stochastic.
pub fn nrps_alpha(weights: &WeightMatrix, beta_k: f64) -> Result<DVector<f64>, ProtocolError> {
    if !(0.0..=1.0).contains(&beta_k) {
        return Err(ProtocolError::BetaOutOfRange(beta_k));
    }
    let mut alpha = DVector::zeros(weights.n());
    for i in 0..weights.n() {
        let pii = weights.self_weight(i);
        if pii <= 0.0 {
            return Err(ProtocolError::ZeroSelfWeight { agent: i });
        }
        alpha[i] = (1.0 - beta_k * (1.0 - pii)) / pii;
    }
    Ok(alpha)
}

/// One NR-PushSum step:
///
/// `x_i(k+1) = α_i p_ii x_i(k) + β Σ_{j ∈ in(i)} (p_ij x_j(k) + η_x_ij) + θ x_i(0)`,
/// with the same form for `y` and `y_i(0) = 1`.
///
/// Fails if any `y_i(k+1) <= eps_y`.
pub fn nrps_round(
    inst: &ProblemInstance,
    state: &SimulationState,
    beta_k: f64,
    theta_k: f64,
    noise: &RoundNoise,
    eps_y: f64,
) -> Result<SimulationState, ProtocolError> {
    check_noise(inst, noise)?;
    let alpha = nrps_alpha(&inst.weights, beta_k)?;
    let (n, p) = (inst.n(), inst.dim());
    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let own = alpha[i] * inst.weights.self_weight(i);
        let mut mixed_x = vec![0.0; p];
        let mut mixed_y = 0.0;
        for &j in inst.net.in_neighbors(i) {
            let pij = inst.weights.get(i, j);
            let ex = noise.eta_x(i, j).expect("edge present");
            for c in 0..p {
                mixed_x[c] += pij * state.x[(j, c)] + ex[c];
            }
            mixed_y += pij * state.y[j] + noise.eta_y(i, j).expect("edge present");
        }
        for c in 0..p {
            x[(i, c)] = own * state.x[(i, c)] + beta_k * mixed_x[c] + theta_k * inst.u[(i, c)];
        }
        y[i] = own * state.y[i] + beta_k * mixed_y + theta_k;
        if !(y[i] > eps_y) {
            return Err(ProtocolError::NonPositiveDenominator { round: state.k + 1, agent: i, value: y[i] });
        }
    }
    let z = ratio(&x, &y, eps_y);
    Ok(SimulationState { k: state.k + 1, x, y, z, alpha })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Algorithm {
    PushSum,
    NrPushSum { beta: BetaSchedule, theta: ThetaSchedule },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Self::PushSum => "pushsum",
            Self::NrPushSum { .. } => "nrps",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub rounds: u64,
    pub record_stride: u64,
    pub record_xy: bool,
    pub eps_y: f64,
}

impl RunOptions {
    pub fn new(rounds: u64, record_stride: u64) -> Self {
        Self { rounds, record_stride, record_xy: false, eps_y: DEFAULT_EPS_Y }
    }

    pub fn with_xy(mut self) -> Self {
        self.record_xy = true;
        self
    }
}

/// Runs `rounds` transitions `k → k+1` for `k = 0..rounds`, recording round 0,
/// every `record_stride`-th round and the final round.
///
/// `β(k)` and `θ(k)` are consumed at the transition out of round `k`.
pub fn run(
    inst: &ProblemInstance,
    algo: &Algorithm,
    noise: &NoiseModel,
    opts: RunOptions,
) -> Result<RunTrace, RunError> {
    if opts.rounds == 0 || opts.record_stride == 0 {
        return Err(RunError { round: 0, source: ProtocolError::BadRunLength });
    }
    let u_bar = inst.u_bar();
    let soft_bound = !effective_delta(noise).rigorous || noise.burst.is_some();
    let mut trace = RunTrace::new(algo.name(), u_bar, soft_bound);
    let mut state = SimulationState::initial(inst);
    trace.record(&state, opts.record_xy);
    for k in 0..opts.rounds {
        let round_noise = sample_round(noise, &inst.net, k, inst.dim());
        state = match algo {
            Algorithm::PushSum => pushsum_round(inst, &state, &round_noise, opts.eps_y),
            Algorithm::NrPushSum { beta, theta } => {
                nrps_round(inst, &state, beta.at(k), theta.at(k), &round_noise, opts.eps_y)
            }
        }
        .map_err(|source| RunError { round: k + 1, source })?;
        trace.observe(&state);
        if state.k.is_multiple_of(opts.record_stride) || state.k == opts.rounds {
            trace.record(&state, opts.record_xy);
        }
    }
    Ok(trace)
}
