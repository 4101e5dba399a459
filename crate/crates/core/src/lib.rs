//! Average consensus on directed networks with additive link noise.
//!
//! The crate simulates classical PushSum and the noise-resilient variant
//! NR-PushSum, which damps neighbor mixing with a summable `β(k)` and
//! re-injects each agent's noise-free initial value with weight `θ(k)`.
//! An analysis layer rebuilds the same dynamics in matrix form and checks
//! the structural properties (column stochasticity, irreducibility,
//! contraction) the convergence argument relies on.
//!
//! Module map:
//! - [`graph`]: topologies, strong connectivity, equal-neighbor weights
//! - [`schedules`]: `β` and `θ` sequences and their sums
//! - [`noise`]: counter-based per-edge noise
//! - [`protocol`]: per-agent round updates and runs
//! - [`analysis`]: matrix oracle, contraction, rate fits, consensus band
//! - [`harness`]: experiment configs, presets, trace files, export

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod graph;
pub mod harness;
pub mod noise;
pub mod protocol;
pub mod schedules;

pub use graph::{DirectedNetwork, GraphError, WeightMatrix};
pub use noise::{NoiseModel, RoundNoise};
pub use protocol::{Algorithm, ProblemInstance, RunOptions, RunTrace, SimulationState};
pub use schedules::{BetaSchedule, ThetaSchedule};
