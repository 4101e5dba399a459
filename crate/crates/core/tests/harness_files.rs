use std::collections::BTreeMap;
use std::path::Path;

use nrps_core::harness::{export_csv, list_presets, preset, run_experiment, ExperimentConfig, Series};
use serde_json::Value;

/// Per-round (mean, min, max) of the consensus error, read straight from the
/// JSON lines without going through the crate's trace reader.
fn recompute(paths: &[std::path::PathBuf]) -> BTreeMap<u64, (f64, f64, f64)> {
    let mut per_round: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for p in paths {
        for line in std::fs::read_to_string(p).unwrap().lines() {
            let v: Value = serde_json::from_str(line).unwrap();
            if v["type"] != "snapshot" {
                continue;
            }
            let z: Vec<f64> = v["z"].as_array().unwrap().iter().map(|r| r[0].as_f64().unwrap()).collect();
            let e: f64 = z.iter().map(|zi| (zi - 5.5).powi(2)).sum();
            per_round.entry(v["round"].as_u64().unwrap()).or_default().push(e);
        }
    }
    per_round
        .into_iter()
        .map(|(k, es)| {
            let mean = es.iter().sum::<f64>() / es.len() as f64;
            let min = es.iter().copied().fold(f64::INFINITY, f64::min);
            let max = es.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (k, (mean, min, max))
        })
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1e-300)
}

#[test]
fn summary_matches_independent_recomputation() {
    let mut cfg = preset("fig4b-table1b").unwrap();
    cfg.rounds = 800;
    cfg.seeds = vec![4, 5, 6, 7];
    let exp = cfg.validate().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&exp, dir.path()).unwrap();
    let expected = recompute(&out.trace_paths);

    let summary: Value = serde_json::from_str(&std::fs::read_to_string(&out.summary_path).unwrap()).unwrap();
    let rounds = summary["rounds"].as_array().unwrap();
    assert_eq!(rounds.len(), expected.len());
    for r in rounds {
        let (mean, min, max) = expected[&r["round"].as_u64().unwrap()];
        assert_eq!(r["defined"], 4);
        assert!(close(r["mean"].as_f64().unwrap(), mean), "{r} vs {mean}");
        assert!(close(r["min"].as_f64().unwrap(), min), "{r} vs {min}");
        assert!(close(r["max"].as_f64().unwrap(), max), "{r} vs {max}");
    }
    assert_eq!(summary["seeds"], serde_json::json!([4, 5, 6, 7]));
}

#[test]
fn preset_configs_round_trip_through_json() {
    for info in list_presets() {
        let cfg = preset(info.name).unwrap();
        let text = cfg.to_json_pretty();
        let back = ExperimentConfig::from_json_str(&text).unwrap();
        assert_eq!(back, cfg, "{}", info.name);
        assert_eq!(back.hash(), cfg.hash(), "{}", info.name);
    }
}

#[test]
fn config_file_on_disk_matches_preset_hash() {
    let cfg = preset("fig5a-u5").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, cfg.to_json_pretty()).unwrap();
    assert_eq!(ExperimentConfig::load(Path::new(&path)).unwrap().hash(), cfg.hash());
}

#[test]
fn zero_mean_error_series_trends_down() {
    let exp = preset("fig7-consensus-error-zero-mean").unwrap().validate().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&exp, dir.path()).unwrap();
    let mut csv = Vec::new();
    export_csv(&out.trace_paths, Series::Error, &mut csv).unwrap();
    let values: Vec<f64> = String::from_utf8(csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    let tenth = values.len() / 10;
    let head = values[..tenth].iter().sum::<f64>() / tenth as f64;
    let tail = values[values.len() - tenth..].iter().sum::<f64>() / tenth as f64;
    assert!(tail < head / 10.0, "head {head}, tail {tail}");
    assert!(values.last().unwrap() < &values[0]);
}
