//! Long-format CSV (`round,agent,series,value`) from trace files.

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use super::trace_io::{read_trace, TraceError, TraceFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    /// Agent estimates `z_i(k)`.
    Z,
    /// `Σ_i ‖z_i(k) − ū‖²`; the agent column is empty.
    Error,
    /// Numerator and denominator states, if the trace recorded them.
    Xy,
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("unknown series {0:?} (expected z, error or xy)")]
    UnknownSeries(String),
    #[error("no trace files given")]
    NoTraces,
    #[error("{0} does not contain x/y states (set record_xy in the config)")]
    MissingXy(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
}

impl FromStr for Series {
    type Err = ExportError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "z" => Ok(Self::Z),
            "error" => Ok(Self::Error),
            "xy" => Ok(Self::Xy),
            other => Err(ExportError::UnknownSeries(other.to_string())),
        }
    }
}

fn fmt_value(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Series label; multi-component states get a `[c]` suffix and multi-file
/// exports a `@seed<s>` suffix.
fn label(base: &str, c: usize, p: usize, seed: Option<u64>) -> String {
    let mut s = base.to_string();
    if p > 1 {
        s.push_str(&format!("[{c}]"));
    }
    if let Some(seed) = seed {
        s.push_str(&format!("@seed{seed}"));
    }
    s
}

fn write_file<W: Write>(trace: &TraceFile, path: &str, what: Series, tag: Option<u64>, out: &mut W) -> Result<(), ExportError> {
    for snap in &trace.snapshots {
        let k = snap.round;
        match what {
            Series::Z => {
                for (i, row) in snap.z.iter().enumerate() {
                    for (c, v) in row.iter().enumerate() {
                        writeln!(out, "{k},{},{},{}", i + 1, label("z", c, row.len(), tag), fmt_value(*v))?;
                    }
                }
            }
            Series::Error => writeln!(out, "{k},,{},{}", label("error", 0, 1, tag), fmt_value(snap.consensus_error))?,
            Series::Xy => {
                let (Some(x), Some(y)) = (&snap.x, &snap.y) else {
                    return Err(ExportError::MissingXy(path.to_string()));
                };
                for (i, row) in x.iter().enumerate() {
                    for (c, v) in row.iter().enumerate() {
                        writeln!(out, "{k},{},{},{v}", i + 1, label("x", c, row.len(), tag))?;
                    }
                    writeln!(out, "{k},{},{},{}", i + 1, label("y", 0, 1, tag), y[i])?;
                }
            }
        }
    }
    Ok(())
}

pub fn export_csv<W: Write>(paths: &[PathBuf], what: Series, out: &mut W) -> Result<(), ExportError> {
    if paths.is_empty() {
        return Err(ExportError::NoTraces);
    }
    let traces = paths.iter().map(|p| read_trace(p)).collect::<Result<Vec<_>, _>>()?;
    writeln!(out, "round,agent,series,value")?;
    for (trace, path) in traces.iter().zip(paths) {
        let tag = (paths.len() > 1).then_some(trace.header.seed);
        write_file(trace, &path.display().to_string(), what, tag, out)?;
    }
    Ok(())
}
