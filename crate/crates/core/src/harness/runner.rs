//! Seed sweeps: parallel runs, per-seed trace files, aggregate summary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::Experiment;
use super::trace_io::{write_trace, TraceError, TraceHeader, TRACE_FORMAT_VERSION};
use crate::noise::mix64;
use crate::protocol::{run, RunError, RunTrace};

/// Rounds compared by the divergence flag.
pub const DIVERGENCE_EARLY_ROUND: u64 = 100;
pub const DIVERGENCE_LATE_ROUND: u64 = 2000;

/// Noise seed of one run, derived from the config's base seed and the run seed.
pub fn run_noise_seed(base: u64, seed: u64) -> u64 {
    mix64(base ^ mix64(seed.wrapping_add(0x5EED)))
}

pub fn trace_file_name(seed: u64) -> String {
    format!("trace-seed-{seed}.jsonl")
}

/// Runs one seed in memory.
pub fn run_seed(exp: &Experiment, seed: u64) -> Result<RunTrace, RunError> {
    let noise = exp.noise.clone().with_seed(run_noise_seed(exp.noise.seed, seed));
    run(&exp.instance, &exp.algorithm, &noise, exp.options)
}

pub fn trace_header(exp: &Experiment, seed: u64, trace: &RunTrace) -> TraceHeader {
    let net = exp.instance.net();
    TraceHeader {
        format_version: TRACE_FORMAT_VERSION,
        config: exp.config.clone(),
        config_hash: exp.hash.clone(),
        seed,
        noise_seed: run_noise_seed(exp.noise.seed, seed),
        algorithm: trace.algorithm.clone(),
        n: net.n(),
        edges: net.to_json().edges,
        weights: exp.instance.weights().rows(),
        u_bar: trace.u_bar.clone(),
        soft_bound: trace.soft_bound,
    }
}

/// Consensus-error statistics across seeds at one recorded round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: u64,
    /// Seeds whose estimates were all defined at this round.
    pub defined: usize,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub round: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub failed_seeds: Vec<SeedFailure>,
    pub rounds: Vec<RoundStats>,
    /// Seeds in which some ratio became undefined.
    pub ratio_breakdown_seeds: Vec<u64>,
    /// Seeds in which some `y_i(k) <= 0`, leaving `z_i` without meaning.
    pub nonpositive_denominator_seeds: Vec<u64>,
    /// Mean error at the late round exceeds that at the early round.
    pub divergence: bool,
    pub final_mean_error: Option<f64>,
    pub wall_clock_ms: u128,
}

impl Summary {
    pub fn flags_failure_under_noise(&self) -> bool {
        self.divergence || !self.ratio_breakdown_seeds.is_empty() || !self.nonpositive_denominator_seeds.is_empty()
    }
}

/// Aggregates successful traces (same config, so same recorded rounds).
pub fn summarize(name: &str, hash: &str, results: &[(u64, &RunTrace)], failed: Vec<SeedFailure>) -> Summary {
    let mut rounds = Vec::new();
    if let Some((_, first)) = results.first() {
        for (idx, snap) in first.snapshots.iter().enumerate() {
            let errors: Vec<f64> = results
                .iter()
                .filter_map(|(_, t)| t.snapshots.get(idx).and_then(|s| s.consensus_error))
                .collect();
            let defined = errors.len();
            let stat = |f: fn(f64, f64) -> f64| errors.iter().copied().reduce(f);
            rounds.push(RoundStats {
                round: snap.round,
                defined,
                mean: (defined > 0).then(|| errors.iter().sum::<f64>() / defined as f64),
                min: stat(f64::min),
                max: stat(f64::max),
            });
        }
    }
    let ratio_breakdown_seeds =
        results.iter().filter(|(_, t)| t.diagnostics.ratio_breakdown_round.is_some()).map(|(s, _)| *s).collect();
    let nonpositive_denominator_seeds =
        results.iter().filter(|(_, t)| t.diagnostics.min_y <= 0.0).map(|(s, _)| *s).collect();
    let mean_at = |target: u64| {
        rounds.iter().rev().find(|r| r.round <= target).and_then(|r| r.mean)
    };
    let divergence = match (mean_at(DIVERGENCE_EARLY_ROUND), mean_at(DIVERGENCE_LATE_ROUND)) {
        (Some(early), Some(late)) => {
            rounds.last().is_some_and(|r| r.round >= DIVERGENCE_LATE_ROUND) && late > early
        }
        _ => false,
    };
    let mut seeds: Vec<u64> = results.iter().map(|(s, _)| *s).chain(failed.iter().map(|f| f.seed)).collect();
    seeds.sort_unstable();
    Summary {
        name: name.to_string(),
        config_hash: hash.to_string(),
        seeds,
        failed_seeds: failed,
        final_mean_error: rounds.last().and_then(|r| r.mean),
        rounds,
        ratio_breakdown_seeds,
        nonpositive_denominator_seeds,
        divergence,
        wall_clock_ms: 0,
    }
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub summary: Summary,
    pub summary_path: PathBuf,
    pub trace_paths: Vec<PathBuf>,
}

impl ExperimentOutcome {
    pub fn any_failed(&self) -> bool {
        !self.summary.failed_seeds.is_empty()
    }
}

/// Runs every seed in parallel and writes `trace-seed-<s>.jsonl` files plus
/// `summary.json` into `out_dir`. Trace files of failed seeds are removed.
pub fn run_experiment(exp: &Experiment, out_dir: &Path) -> Result<ExperimentOutcome, TraceError> {
    let start = Instant::now();
    let io = |source| TraceError::Io { path: out_dir.display().to_string(), source };
    std::fs::create_dir_all(out_dir).map_err(io)?;

    let results: Vec<(u64, Result<RunTrace, RunError>)> =
        exp.config.seeds.par_iter().map(|&seed| (seed, run_seed(exp, seed))).collect();

    let mut ok = Vec::new();
    let mut failed = Vec::new();
    let mut trace_paths = Vec::new();
    for (seed, result) in &results {
        let path = out_dir.join(trace_file_name(*seed));
        match result {
            Ok(trace) => {
                if let Err(e) = write_trace(&path, &trace_header(exp, *seed, trace), trace) {
                    let _ = std::fs::remove_file(&path);
                    return Err(e);
                }
                trace_paths.push(path);
                ok.push((*seed, trace));
            }
            Err(e) => {
                if path.exists() {
                    std::fs::remove_file(&path).map_err(io)?;
                }
                failed.push(SeedFailure { seed: *seed, round: e.round, error: e.to_string() });
            }
        }
    }

    let mut summary = summarize(&exp.config.name, &exp.hash, &ok, failed);
    summary.wall_clock_ms = start.elapsed().as_millis();
    let summary_path = out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serialises");
    std::fs::write(&summary_path, text + "\n").map_err(io)?;
    Ok(ExperimentOutcome { summary, summary_path, trace_paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::presets::preset;

    #[test]
    fn noiseless_preset_reaches_machine_floor() {
        let exp = preset("fig3-nrps-noiseless").unwrap().validate().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&exp, dir.path()).unwrap();
        assert!(!out.any_failed());
        let final_error = out.summary.final_mean_error.unwrap();
        assert!(final_error < 1e-10, "{final_error}");
        assert!(dir.path().join("trace-seed-1.jsonl").exists());
    }

    #[test]
    fn noisy_pushsum_is_flagged() {
        let exp = preset("fig1-pushsum-noisy").unwrap().validate().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&exp, dir.path()).unwrap();
        assert!(out.summary.flags_failure_under_noise(), "{:?}", out.summary.rounds.last());
    }

    #[test]
    fn seeds_get_distinct_noise() {
        assert_ne!(run_noise_seed(0, 1), run_noise_seed(0, 2));
        assert_ne!(run_noise_seed(0, 1), run_noise_seed(1, 1));
    }

    #[test]
    fn failed_seed_leaves_no_trace() {
        // y collapses under U(-50, -40) noise with no re-injection to speak of
        let mut cfg = preset("fig4a-table1a").unwrap();
        cfg.rounds = 50;
        cfg.noise.distribution = crate::noise::NoiseDistribution::Uniform { lo: -50.0, hi: -40.0 };
        cfg.theta = Some(crate::harness::config::ThetaSpec::Geometric { rho: 0.1 });
        cfg.seeds = vec![3];
        let exp = cfg.validate().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let stale = dir.path().join(trace_file_name(3));
        std::fs::write(&stale, "stale").unwrap();
        let out = run_experiment(&exp, dir.path()).unwrap();
        assert!(out.any_failed());
        assert!(!stale.exists());
        assert!(out.trace_paths.is_empty());
    }
}
