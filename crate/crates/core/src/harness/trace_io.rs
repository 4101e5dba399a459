//! JSON-lines trace files: one header, one line per snapshot, one footer.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::ExperimentConfig;
use crate::protocol::{RunDiagnostics, RunTrace, Snapshot};

pub const TRACE_FORMAT_VERSION: u32 = 1;

/// First line of a trace file. Carries enough to rebuild the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format_version: u32,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    pub noise_seed: u64,
    pub algorithm: String,
    pub n: usize,
    /// `(i, j)` pairs, 1-based, meaning `j → i`.
    pub edges: Vec<[usize; 2]>,
    pub weights: Vec<Vec<f64>>,
    pub u_bar: Vec<f64>,
    pub soft_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TraceLine {
    Header(Box<TraceHeader>),
    Snapshot(Snapshot),
    Footer(RunDiagnostics),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub snapshots: Vec<Snapshot>,
    pub footer: RunDiagnostics,
}

impl TraceFile {
    /// The in-memory trace this file was written from.
    pub fn to_run_trace(&self) -> RunTrace {
        RunTrace {
            algorithm: self.header.algorithm.clone(),
            u_bar: self.header.u_bar.clone(),
            soft_bound: self.header.soft_bound,
            snapshots: self.snapshots.clone(),
            diagnostics: self.footer.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: empty trace file")]
    Empty { path: String },
    #[error("{path}, line {line}: {message}")]
    Malformed { path: String, line: usize, message: String },
    #[error("{path}: unsupported format_version {found} (expected {TRACE_FORMAT_VERSION})")]
    Version { path: String, found: u32 },
}

pub fn write_trace(path: &Path, header: &TraceHeader, trace: &RunTrace) -> Result<(), TraceError> {
    let io = |source| TraceError::Io { path: path.display().to_string(), source };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let mut line = |item: &TraceLine| -> std::io::Result<()> {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")
    };
    line(&TraceLine::Header(Box::new(header.clone()))).map_err(io)?;
    for s in &trace.snapshots {
        line(&TraceLine::Snapshot(s.clone())).map_err(io)?;
    }
    line(&TraceLine::Footer(trace.diagnostics.clone())).map_err(io)?;
    out.flush().map_err(io)
}

pub fn read_trace(path: &Path) -> Result<TraceFile, TraceError> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|source| TraceError::Io { path: name.clone(), source })?;
    let malformed = |line: usize, message: String| TraceError::Malformed { path: name.clone(), line, message };

    let mut header = None;
    let mut snapshots = Vec::new();
    let mut footer = None;
    for (idx, text) in BufReader::new(file).lines().enumerate() {
        let text = text.map_err(|source| TraceError::Io { path: name.clone(), source })?;
        if text.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let item: TraceLine = serde_json::from_str(&text).map_err(|e| malformed(lineno, e.to_string()))?;
        match item {
            TraceLine::Header(h) if header.is_none() && lineno == 1 => {
                if h.format_version != TRACE_FORMAT_VERSION {
                    return Err(TraceError::Version { path: name, found: h.format_version });
                }
                header = Some(*h);
            }
            TraceLine::Header(_) => return Err(malformed(lineno, "header must be the first line".into())),
            _ if header.is_none() => return Err(malformed(lineno, "missing header".into())),
            TraceLine::Snapshot(s) if footer.is_none() => snapshots.push(s),
            TraceLine::Footer(d) if footer.is_none() => footer = Some(d),
            _ => return Err(malformed(lineno, "content after footer".into())),
        }
    }
    let Some(header) = header else {
        return Err(TraceError::Empty { path: name });
    };
    let footer = footer.ok_or_else(|| malformed(snapshots.len() + 1, "missing footer (truncated file?)".into()))?;
    if snapshots.is_empty() {
        return Err(TraceError::Empty { path: name });
    }
    Ok(TraceFile { header, snapshots, footer })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::presets::preset;
    use crate::harness::runner::{run_seed, trace_header};

    #[test]
    fn write_read_round_trip() {
        let mut cfg = preset("fig3-nrps-noiseless").unwrap();
        cfg.rounds = 30;
        let exp = cfg.validate().unwrap();
        let trace = run_seed(&exp, 1).unwrap();
        let header = trace_header(&exp, 1, &trace);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        write_trace(&path, &header, &trace).unwrap();
        let back = read_trace(&path).unwrap();
        assert_eq!(back.header, header);
        assert_eq!(back.to_run_trace(), trace);
    }

    #[test]
    fn empty_and_truncated_files_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.jsonl");
        std::fs::write(&empty, "").unwrap();
        assert!(matches!(read_trace(&empty), Err(TraceError::Empty { .. })));

        let mut cfg = preset("fig1-pushsum-noiseless").unwrap();
        cfg.rounds = 5;
        let exp = cfg.validate().unwrap();
        let trace = run_seed(&exp, 1).unwrap();
        let full = dir.path().join("full.jsonl");
        write_trace(&full, &trace_header(&exp, 1, &trace), &trace).unwrap();
        let text = std::fs::read_to_string(&full).unwrap();
        let cut: Vec<&str> = text.lines().take(3).collect();
        let truncated = dir.path().join("cut.jsonl");
        std::fs::write(&truncated, cut.join("\n")).unwrap();
        assert!(matches!(read_trace(&truncated), Err(TraceError::Malformed { .. })));
    }
}
