//! Invariant suite run against a finished trace file.
//!
//! The run is rebuilt from the trace header (graph, weights, config) and the
//! recorded snapshots are checked against the analysis layer. Noise is
//! replayed from the counter-based generator, so sum balances hold exactly
//! up to roundoff even for noisy runs.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use super::config::{ConfigError, ExperimentConfig, GraphSpec, WeightSpec};
use super::trace_io::{read_trace, TraceError, TraceFile};
use crate::analysis::{
    check_csia, contraction_profile, fit_geometric_rate, mixing_matrix, product_matrix, row_sum_floor_base,
    row_sums_exceed_floor, theorem4_band, MIXING_COLUMN_TOL,
};
use crate::graph::{check_strong_connectivity, DirectedNetwork, GraphJson, WeightMatrix};
use crate::noise::{effective_delta, sample_round};
use crate::protocol::Algorithm;
use crate::schedules::{band_halfwidth_for_theta_zero, ThetaSchedule};

/// Relative tolerance of the sum balance, per round of accumulation.
const BALANCE_TOL: f64 = 1e-12;
const CONTRACTION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckItem {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub trace: String,
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.status != CheckStatus::Fail)
    }

    pub fn item(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.trace)?;
        for i in &self.items {
            let tag = match i.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Skip => "SKIP",
            };
            writeln!(f, "  [{tag}] {:<16} {}", i.name, i.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("{0}")]
    Config(#[from] ConfigError),
}

fn item(name: &'static str, ok: bool, detail: String) -> CheckItem {
    CheckItem { name, status: if ok { CheckStatus::Pass } else { CheckStatus::Fail }, detail }
}

fn skip(name: &'static str, detail: impl Into<String>) -> CheckItem {
    CheckItem { name, status: CheckStatus::Skip, detail: detail.into() }
}

pub fn check_trace(path: &Path) -> Result<CheckReport, CheckError> {
    let trace = read_trace(path)?;
    check_trace_file(&trace, &path.display().to_string())
}

pub fn check_trace_file(trace: &TraceFile, label: &str) -> Result<CheckReport, CheckError> {
    let h = &trace.header;
    let mut items = Vec::new();

    let hash = h.config.hash();
    items.push(item("config-hash", hash == h.config_hash, format!("recorded {}", short(&h.config_hash))));

    // rebuild from the recorded graph and weights, independent of file paths
    let net = DirectedNetwork::from_json(&GraphJson { n: h.n, edges: h.edges.clone() })
        .map_err(|e| ConfigError { problems: vec![field("graph", e.to_string())] })?;
    let p = DMatrix::from_fn(h.n, h.n, |i, j| h.weights.get(i).and_then(|r| r.get(j)).copied().unwrap_or(f64::NAN));
    let weights = WeightMatrix::from_matrix(&net, p);
    let connected = check_strong_connectivity(&net);
    items.push(item(
        "graph-weights",
        weights.is_ok() && connected,
        match &weights {
            Ok(_) if connected => format!("{} agents, {} edges, column sums within 1e-12", net.n(), net.edge_count()),
            Ok(_) => "graph is not strongly connected".into(),
            Err(e) => e.to_string(),
        },
    ));
    let weights = weights.map_err(|e| ConfigError { problems: vec![field("weights", e.to_string())] })?;

    let mut cfg: ExperimentConfig = h.config.clone();
    cfg.graph = GraphSpec::Inline { n: h.n, edges: h.edges.clone() };
    cfg.weights = WeightSpec::Matrix { rows: h.weights.clone() };
    let exp = cfg.validate()?;
    let noise = exp.noise.clone().with_seed(h.noise_seed);
    let rounds = trace.footer.rounds;
    let n = net.n();

    let snaps = &trace.snapshots;
    let last_round = snaps.last().map_or(0, |s| s.round);
    items.push(item(
        "trace-shape",
        snaps[0].round == 0 && last_round == rounds && rounds == exp.options.rounds,
        format!("{} snapshots, rounds 0..={last_round}", snaps.len()),
    ));

    match &exp.algorithm {
        Algorithm::PushSum => {
            items.push(skip("positivity", "PushSum carries no positivity guarantee"));
            for name in ["mixing-columns", "csia", "row-sum-floor", "contraction", "rate-fit", "band"] {
                items.push(skip(name, "NR-PushSum only"));
            }
        }
        Algorithm::NrPushSum { beta, theta } => {
            let min_y = snaps.iter().map(|s| s.min_y).fold(trace.footer.min_y, f64::min);
            let finite = snaps.iter().all(|s| s.z.iter().flatten().all(|v| v.is_some_and(f64::is_finite)));
            items.push(item("positivity", min_y > 0.0 && finite, format!("min y = {min_y:.6e}, z finite: {finite}")));

            let worst = (0..rounds)
                .map(|k| {
                    mixing_matrix(&weights, beta.at(k))
                        .column_iter()
                        .map(|c| (c.sum() - 1.0).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            items.push(item("mixing-columns", worst <= MIXING_COLUMN_TOL, format!("max |1ᵀM(k) - 1| = {worst:.2e}")));

            let w = product_matrix(&weights, beta, 0, rounds - 1);
            let report = check_csia(&w, &net);
            items.push(item(
                "csia",
                report.all_true(),
                format!(
                    "W(0,{}): column stochastic {}, irreducible {}, aperiodic {}",
                    rounds - 1,
                    report.column_stochastic,
                    report.irreducible,
                    report.aperiodic
                ),
            ));
            let w_o = row_sum_floor_base(beta);
            items.push(item("row-sum-floor", row_sums_exceed_floor(&w, w_o), format!("w_o = {w_o}")));

            let profile = contraction_profile(&weights, beta, rounds - 1);
            let bad = profile.windows(2).position(|p| p[1] > p[0] + CONTRACTION_SLACK);
            items.push(item(
                "contraction",
                bad.is_none(),
                match bad {
                    None => format!("non-increasing, final {:.3e}", profile.last().copied().unwrap_or(0.0)),
                    Some(k) => format!("increases at k = {}", k + 1),
                },
            ));

            let fit_applies = noise.is_zero() && matches!(theta, ThetaSchedule::Geometric { .. });
            items.push(if !fit_applies {
                skip("rate-fit", "geometric rate is only claimed for noiseless runs with geometric theta")
            } else {
                match fit_geometric_rate(&trace.to_run_trace(), &h.u_bar) {
                    Ok(d) => item(
                        "rate-fit",
                        d.lambda_hat < 1.0 && d.r_squared > 0.99,
                        format!("rate {:.4}, R² {:.4}, {} samples", d.lambda_hat, d.r_squared, d.samples),
                    ),
                    Err(e) => skip("rate-fit", e.to_string()),
                }
            });

            items.push(band_item(trace, &exp.noise, beta, theta, n));
        }
    }

    items.push(balance_item(trace, &exp, &noise));
    Ok(CheckReport { trace: label.to_string(), items })
}

fn field(name: &str, message: String) -> super::config::FieldError {
    super::config::FieldError { field: name.into(), message }
}

fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}

fn band_item(
    trace: &TraceFile,
    noise: &crate::noise::NoiseModel,
    beta: &crate::BetaSchedule,
    theta: &ThetaSchedule,
    n: usize,
) -> CheckItem {
    if noise.is_zero() {
        return skip("band", "noiseless run");
    }
    if trace.header.soft_bound {
        return skip("band", "noise bound is not a hard guarantee (normal noise or bursts)");
    }
    let delta = effective_delta(noise).value;
    let Some(mu) = band_halfwidth_for_theta_zero(beta, n, delta, theta.at(0)) else {
        return skip("band", "theta(0) = 0");
    };
    let band = match theorem4_band(&trace.header.u_bar, mu) {
        Ok(b) => b,
        Err(_) => return skip("band", format!("implied mu = {mu:.4} >= 1, band is void")),
    };
    let last = trace.snapshots.last().expect("non-empty trace");
    let inside = last.z.iter().all(|row| {
        row.iter().zip(&band).all(|(v, (lo, hi))| v.is_some_and(|v| v >= *lo && v <= *hi))
    });
    item("band", inside, format!("mu = {mu:.4}, band {band:?} at round {}", last.round))
}

/// Replays `1ᵀx(k+1) = 1ᵀx(k) + θ(k)·1ᵀu + β(k)·Σ η_x` (and the y analogue)
/// between consecutive snapshots. PushSum uses `θ = 0`, `β = 1`.
fn balance_item(trace: &TraceFile, exp: &super::config::Experiment, noise: &crate::noise::NoiseModel) -> CheckItem {
    let n = exp.instance.n();
    let p = exp.instance.dim();
    let u_sum: Vec<f64> = exp.instance.initial_values().column_iter().map(|c| c.sum()).collect();
    let weights_at = |k: u64| match &exp.algorithm {
        Algorithm::PushSum => (1.0, 0.0),
        Algorithm::NrPushSum { beta, theta } => (beta.at(k), theta.at(k)),
    };
    let snaps = &trace.snapshots;
    let mut sx = snaps[0].sum_x.clone();
    let mut sy = snaps[0].sum_y;
    let mut scale = 1.0f64;
    let mut worst = 0.0f64;
    let mut next = 1;
    for k in 0..trace.footer.rounds {
        let (b, t) = weights_at(k);
        let eta = (!noise.is_zero()).then(|| sample_round(noise, exp.instance.net(), k, p));
        let agg = eta.as_ref().map(|r| r.aggregate_x(n));
        for (c, (s, u)) in sx.iter_mut().zip(&u_sum).enumerate() {
            let e = agg.as_ref().map_or(0.0, |a| a.column(c).sum());
            *s += t * u + b * e;
            scale = scale.max(s.abs());
        }
        sy += t * n as f64 + b * eta.as_ref().map_or(0.0, |r| r.aggregate_y(n).sum());
        scale = scale.max(sy.abs());
        if next < snaps.len() && snaps[next].round == k + 1 {
            let s = &snaps[next];
            for (got, want) in s.sum_x.iter().zip(&sx) {
                worst = worst.max((got - want).abs() / scale);
            }
            worst = worst.max((s.sum_y - sy).abs() / scale);
            next += 1;
        }
    }
    let tol = BALANCE_TOL * (trace.footer.rounds as f64).max(1.0);
    item("sum-balance", worst <= tol, format!("max relative drift {worst:.2e} (tolerance {tol:.1e})"))
}
