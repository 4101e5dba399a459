//! `nrps`: run presets or config files, list presets, export CSV, check traces.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use nrps_core::harness::{
    check_trace, exit_code, export_csv, list_presets, preset, run_experiment, ConfigError, ExperimentConfig, Series,
};

#[derive(Parser)]
#[command(name = "nrps", version, about = "PushSum / NR-PushSum consensus under link noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named preset or a config JSON file.
    Run {
        /// Preset name (see `nrps list`) or path to a config file.
        target: String,
        /// Output directory. Defaults to the config's `output`, then `runs/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds, or a range like `1..=50`.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        rounds: Option<u64>,
        #[arg(long)]
        record_stride: Option<u64>,
        /// Print the resolved config and exit.
        #[arg(long)]
        dump_config: bool,
    },
    /// List the named presets.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Write long-format CSV (round,agent,series,value).
    Export {
        /// One of z, error, xy.
        #[arg(long, default_value = "z")]
        what: String,
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suite against finished traces.
    Check {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..=") {
        let (a, b): (u64, u64) = (a.parse().map_err(|_| text.to_string())?, b.parse().map_err(|_| text.to_string())?);
        return Ok((a..=b).collect());
    }
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (a.parse().map_err(|_| text.to_string())?, b.parse().map_err(|_| text.to_string())?);
        return Ok((a..b).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| format!("bad seed {s:?}"))).collect()
}

fn load_target(target: &str) -> Result<ExperimentConfig, ConfigError> {
    if let Some(cfg) = preset(target) {
        return Ok(cfg);
    }
    let path = Path::new(target);
    if path.exists() {
        return ExperimentConfig::load(path);
    }
    Err(ConfigError {
        problems: vec![nrps_core::harness::config::FieldError {
            field: "target".into(),
            message: format!("{target:?} is neither a preset nor a config file"),
        }],
    })
}

fn cmd_run(
    target: &str,
    out: Option<PathBuf>,
    seeds: Option<String>,
    rounds: Option<u64>,
    stride: Option<u64>,
    dump: bool,
) -> anyhow::Result<i32> {
    let mut cfg = match load_target(target) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprint!("{e}");
            return Ok(exit_code::CONFIG_ERROR);
        }
    };
    if let Some(s) = seeds {
        match parse_seeds(&s) {
            Ok(list) => cfg.seeds = list,
            Err(bad) => {
                eprintln!("invalid --seeds: {bad}");
                return Ok(exit_code::CONFIG_ERROR);
            }
        }
    }
    if let Some(r) = rounds {
        cfg.rounds = r;
    }
    if let Some(s) = stride {
        cfg.record_stride = s;
    }
    if dump {
        println!("{}", cfg.to_json_pretty());
        return Ok(exit_code::SUCCESS);
    }
    let exp = match cfg.validate() {
        Ok(exp) => exp,
        Err(e) => {
            eprint!("{e}");
            return Ok(exit_code::CONFIG_ERROR);
        }
    };
    let out_dir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| Path::new("runs").join(&cfg.name));
    let outcome = run_experiment(&exp, &out_dir).context("writing outputs")?;
    let s = &outcome.summary;
    println!("{} ({} seed(s)) -> {}", s.name, s.seeds.len(), out_dir.display());
    if let Some(e) = s.final_mean_error {
        println!("final mean consensus error: {e:.6e}");
    }
    if s.divergence {
        println!("divergence: error at round 2000 exceeds error at round 100");
    }
    if !s.ratio_breakdown_seeds.is_empty() {
        println!("ratio breakdown in seeds {:?}", s.ratio_breakdown_seeds);
    }
    if !s.nonpositive_denominator_seeds.is_empty() {
        println!("non-positive denominators in seeds {:?}", s.nonpositive_denominator_seeds);
    }
    for f in &s.failed_seeds {
        eprintln!("seed {} failed: {}", f.seed, f.error);
    }
    Ok(if outcome.any_failed() { exit_code::INVARIANT_VIOLATION } else { exit_code::SUCCESS })
}

fn cmd_list(json: bool) -> anyhow::Result<i32> {
    let presets = list_presets();
    if json {
        println!("{}", serde_json::to_string_pretty(&presets)?);
    } else {
        for p in presets {
            println!("{:<32} {:<28} {}", p.name, p.reproduces, p.description);
        }
    }
    Ok(exit_code::SUCCESS)
}

fn cmd_export(what: &str, traces: &[PathBuf], out: Option<PathBuf>) -> anyhow::Result<i32> {
    let series: Series = match what.parse() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return Ok(exit_code::CONFIG_ERROR);
        }
    };
    let result = match &out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).with_context(|| path.display().to_string())?);
            export_csv(traces, series, &mut w).and_then(|_| w.flush().map_err(Into::into))
        }
        None => export_csv(traces, series, &mut io::stdout().lock()),
    };
    if let Err(e) = result {
        eprintln!("{e}");
        if let Some(path) = out {
            let _ = std::fs::remove_file(path);
        }
        return Ok(exit_code::CONFIG_ERROR);
    }
    Ok(exit_code::SUCCESS)
}

fn cmd_check(traces: &[PathBuf]) -> anyhow::Result<i32> {
    let mut code = exit_code::SUCCESS;
    for path in traces {
        match check_trace(path) {
            Ok(report) => {
                print!("{report}");
                if !report.passed() {
                    code = code.max(exit_code::INVARIANT_VIOLATION);
                }
            }
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                code = exit_code::CONFIG_ERROR;
            }
        }
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { target, out, seeds, rounds, record_stride, dump_config } => {
            cmd_run(&target, out, seeds, rounds, record_stride, dump_config)
        }
        Command::List { json } => cmd_list(json),
        Command::Export { what, traces, out } => cmd_export(&what, &traces, out),
        Command::Check { traces } => cmd_check(&traces),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code::CONFIG_ERROR as u8)
        }
    }
}
