//! Named experiments: 10 agents, ER(0.35) graph, `u = [1, ..., 10]`.

use serde::Serialize;

use super::config::{
    AlgorithmKind, BetaSpec, ExperimentConfig, GraphSpec, InitialSpec, NoiseSpec, ThetaSpec, WeightSpec,
};
use crate::noise::{Burst, NoiseDistribution};
use crate::protocol::DEFAULT_EPS_Y;

/// Graph seed shared by every preset.
pub const PRESET_GRAPH_SEED: u64 = 1;
pub const NOISY_ROUNDS: u64 = 5000;
pub const NOISELESS_ROUNDS: u64 = 500;
/// Snapshot stride for the long noisy runs.
pub const NOISY_STRIDE: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresetInfo {
    pub name: &'static str,
    pub description: &'static str,
    /// Figure or table the preset reproduces.
    pub reproduces: &'static str,
}

const CATALOG: [PresetInfo; 11] = [
    PresetInfo {
        name: "fig1-pushsum-noiseless",
        description: "PushSum, noiseless links, 500 rounds",
        reproduces: "Fig. 1, noiseless reference",
    },
    PresetInfo {
        name: "fig1-pushsum-noisy",
        description: "PushSum, N(0, 0.1) link noise (std 0.1), 5000 rounds",
        reproduces: "Fig. 1",
    },
    PresetInfo {
        name: "fig3-nrps-noiseless",
        description: "NR-PushSum, noiseless, theta = 0.7^k, beta = 0.35 then 100/k^1.1 from k = 200",
        reproduces: "Fig. 3(a)-(c)",
    },
    PresetInfo {
        name: "fig4a-table1a",
        description: "NR-PushSum, U(-1,1) noise, beta = 0.2 then 1/k^1.5 and theta = 100 then 10/k^1.5 from k = 500",
        reproduces: "Fig. 4(a), Table 1 row (a)",
    },
    PresetInfo {
        name: "fig4b-table1b",
        description: "NR-PushSum, U(-1,1) noise, beta = 0.35 then 100/k^1.1 and theta = 100 then 150/k^1.1 from k = 200",
        reproduces: "Fig. 4(b), Table 1 row (b)",
    },
    PresetInfo {
        name: "fig5a-u5",
        description: "NR-PushSum, U(-5,5) noise, beta = 0.35 then 1/k^1.2 and theta = 100 then 50/k^1.2 from k = 200",
        reproduces: "Fig. 5(a)",
    },
    PresetInfo {
        name: "fig5b-u10",
        description: "NR-PushSum, U(-10,10) noise, beta = 0.35 then 1/k^1.2 and theta = 100 then 100/k^1.2 from k = 200",
        reproduces: "Fig. 5(b)",
    },
    PresetInfo {
        name: "fig6a-burst50",
        description: "NR-PushSum designed for U(-1,1); noise scaled 400x every 50 rounds (period 50, scale 400)",
        reproduces: "Fig. 6(a)",
    },
    PresetInfo {
        name: "fig6b-burst10",
        description: "NR-PushSum designed for U(-1,1); noise scaled 400x every 10 rounds (period 10, scale 400)",
        reproduces: "Fig. 6(b)",
    },
    PresetInfo {
        name: "fig7-consensus-error-zero-mean",
        description: "NR-PushSum consensus error, U(-1,1) noise, Table 1 row (a) schedules",
        reproduces: "Fig. 7(a)",
    },
    PresetInfo {
        name: "fig7-consensus-error-biased",
        description: "NR-PushSum consensus error, U(0,1) noise, Table 1 row (a) schedules",
        reproduces: "Fig. 7(b)",
    },
];

pub fn list_presets() -> Vec<PresetInfo> {
    CATALOG.to_vec()
}

fn base(name: &str, algorithm: AlgorithmKind, rounds: u64, stride: u64) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        graph: GraphSpec::ErdosRenyi { n: 10, connect_prob: 0.35, seed: PRESET_GRAPH_SEED, max_attempts: None },
        weights: WeightSpec::EqualNeighbor,
        initial: InitialSpec::Ramp,
        algorithm,
        beta: None,
        theta: None,
        noise: NoiseSpec::default(),
        rounds,
        record_stride: stride,
        record_xy: false,
        seeds: vec![1],
        output: None,
        eps_y: DEFAULT_EPS_Y,
    }
}

fn uniform(lo: f64, hi: f64) -> NoiseSpec {
    NoiseSpec { distribution: NoiseDistribution::Uniform { lo, hi }, ..NoiseSpec::default() }
}

const TABLE_A_BETA: BetaSpec = BetaSpec { early: 0.2, coeff: 1.0, q: 1.5, switch: 500 };
/// `θ = 50·10·1·β = 100` before 500, `1·10·1·1·k^-1.5` after.
const TABLE_A_THETA: ThetaSpec = ThetaSpec::Family { d1: 50.0, d2: 1.0, switch: 500, delta: Some(1.0) };
const TABLE_B_BETA: BetaSpec = BetaSpec { early: 0.35, coeff: 100.0, q: 1.1, switch: 200 };
const FIG5_BETA: BetaSpec = BetaSpec { early: 0.35, coeff: 1.0, q: 1.2, switch: 200 };

fn table_a(name: &str, noise: NoiseSpec) -> ExperimentConfig {
    let mut cfg = base(name, AlgorithmKind::Nrps, NOISY_ROUNDS, NOISY_STRIDE);
    cfg.beta = Some(TABLE_A_BETA);
    cfg.theta = Some(TABLE_A_THETA);
    cfg.noise = noise;
    cfg
}

/// Config for a named preset.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let cfg = match name {
        "fig1-pushsum-noiseless" => base(name, AlgorithmKind::Pushsum, NOISELESS_ROUNDS, 1),
        "fig1-pushsum-noisy" => {
            let mut cfg = base(name, AlgorithmKind::Pushsum, NOISY_ROUNDS, NOISY_STRIDE);
            cfg.noise = NoiseSpec {
                distribution: NoiseDistribution::Normal { mean: 0.0, std: 0.1, bound: 0.3 },
                ..NoiseSpec::default()
            };
            cfg
        }
        "fig3-nrps-noiseless" => {
            let mut cfg = base(name, AlgorithmKind::Nrps, NOISELESS_ROUNDS, 1);
            cfg.beta = Some(TABLE_B_BETA);
            cfg.theta = Some(ThetaSpec::Geometric { rho: 0.7 });
            cfg.record_xy = true;
            cfg
        }
        "fig4a-table1a" | "fig7-consensus-error-zero-mean" => table_a(name, uniform(-1.0, 1.0)),
        "fig4b-table1b" => {
            let mut cfg = base(name, AlgorithmKind::Nrps, NOISY_ROUNDS, NOISY_STRIDE);
            cfg.beta = Some(TABLE_B_BETA);
            cfg.theta = Some(ThetaSpec::ConstantThenPower { early: 100.0, coeff: 150.0, q: 1.1, switch: 200 });
            cfg.noise = uniform(-1.0, 1.0);
            cfg
        }
        "fig5a-u5" | "fig5b-u10" => {
            let delta: f64 = if name == "fig5a-u5" { 5.0 } else { 10.0 };
            let mut cfg = base(name, AlgorithmKind::Nrps, NOISY_ROUNDS, NOISY_STRIDE);
            cfg.beta = Some(FIG5_BETA);
            // d1·10·δ·0.35 = 100 and d2·10·1·δ = 50 (δ = 5) or 100 (δ = 10)
            let d1 = 100.0 / (10.0 * delta * FIG5_BETA.early);
            cfg.theta = Some(ThetaSpec::Family { d1, d2: 1.0, switch: 200, delta: Some(delta) });
            cfg.noise = uniform(-delta, delta);
            cfg
        }
        "fig6a-burst50" | "fig6b-burst10" => {
            let period = if name == "fig6a-burst50" { 50 } else { 10 };
            let mut noise = uniform(-1.0, 1.0);
            noise.burst = Some(Burst { period, scale: 400.0 });
            table_a(name, noise)
        }
        "fig7-consensus-error-biased" => table_a(name, uniform(0.0, 1.0)),
        _ => return None,
    };
    Some(cfg)
}
