//! Experiment configs, named presets, batch runs, trace files and export.

pub mod check;
pub mod config;
pub mod export;
pub mod presets;
pub mod runner;
pub mod trace_io;

pub use check::{check_trace, CheckReport, CheckStatus};
pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use export::{export_csv, Series};
pub use presets::{list_presets, preset, PresetInfo};
pub use runner::{run_experiment, run_seed, ExperimentOutcome, Summary};
pub use trace_io::{read_trace, write_trace, TraceFile, TraceHeader};

/// Process exit codes used by the command-line front end.
pub mod exit_code {
    pub const SUCCESS: i32 = 0;
    pub const INVARIANT_VIOLATION: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
}
