//! Experiment configuration: JSON schema, validation, hashing.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::{
    equal_neighbor_weights, generate_erdos_renyi_with_attempts, DirectedNetwork, GraphJson, WeightMatrix,
    DEFAULT_MAX_ATTEMPTS,
};
use crate::noise::{effective_delta, Burst, NoiseDistribution, NoiseModel};
use crate::protocol::{Algorithm, ProblemInstance, RunOptions, DEFAULT_EPS_Y};
use crate::schedules::{
    make_beta, make_theta_constant_then_power, make_theta_family, make_theta_geometric, BetaSchedule, ThetaSchedule,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphSpec {
    ErdosRenyi {
        n: usize,
        connect_prob: f64,
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_attempts: Option<u32>,
    },
    /// A `{ "n", "edges" }` document, 1-based, relative to the config file.
    File { path: PathBuf },
    /// Same shape as the file document, inline.
    Inline { n: usize, edges: Vec<[usize; 2]> },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightSpec {
    #[default]
    EqualNeighbor,
    /// Explicit `P`, row-major.
    Matrix { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `u = [1, 2, ..., n]`.
    #[default]
    Ramp,
    Values { values: Vec<f64> },
    /// One row of `p` components per agent.
    Rows { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    Pushsum,
    Nrps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSpec {
    pub early: f64,
    pub coeff: f64,
    pub q: f64,
    pub switch: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ThetaSpec {
    Zero,
    Geometric {
        rho: f64,
    },
    ConstantThenPower {
        early: f64,
        coeff: f64,
        q: f64,
        switch: u64,
    },
    /// `n` comes from the graph, `b` and `q` from the β spec; `delta`
    /// defaults to the noise bound.
    Family {
        d1: f64,
        d2: f64,
        switch: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub distribution: NoiseDistribution,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burst: Option<Burst>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub link_bounds: Vec<f64>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { distribution: NoiseDistribution::Zero, seed: 0, burst: None, link_bounds: Vec::new() }
    }
}

impl NoiseSpec {
    pub fn model(&self) -> NoiseModel {
        NoiseModel {
            distribution: self.distribution,
            burst: self.burst,
            seed: self.seed,
            link_bounds: self.link_bounds.clone(),
        }
    }
}

fn default_stride() -> u64 {
    1
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_eps_y() -> f64 {
    DEFAULT_EPS_Y
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub graph: GraphSpec,
    #[serde(default)]
    pub weights: WeightSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    pub algorithm: AlgorithmKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<BetaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaSpec>,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub rounds: u64,
    #[serde(default = "default_stride")]
    pub record_stride: u64,
    #[serde(default)]
    pub record_xy: bool,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Output directory. Not part of the hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_eps_y")]
    pub eps_y: f64,
}

/// One rejected field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

/// Every problem found in a config.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub problems: Vec<FieldError>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid experiment config ({} problem(s)):", self.problems.len())?;
        for p in &self.problems {
            writeln!(f, "  {}: {}", p.field, p.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    fn single(field: &str, message: impl Into<String>) -> Self {
        Self { problems: vec![FieldError { field: field.into(), message: message.into() }] }
    }

    pub fn mentions(&self, field: &str) -> bool {
        self.problems.iter().any(|p| p.field == field)
    }
}

/// A validated config with everything needed to run a seed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub hash: String,
    pub instance: ProblemInstance,
    pub algorithm: Algorithm,
    /// Noise with the config's base seed; runs derive their own seed from it.
    pub noise: NoiseModel,
    pub options: RunOptions,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::single("config", e.to_string()))
    }

    /// Reads a config; relative graph file paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::single("config", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json_str(&text)?;
        if let GraphSpec::File { path: graph_path } = &mut cfg.graph {
            if graph_path.is_relative() {
                if let Some(dir) = path.parent() {
                    *graph_path = dir.join(&*graph_path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// sha256 of the compact JSON serialisation, without the output path.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serialises");
        hex::encode(Sha256::digest(bytes))
    }

    /// Resolves every cross reference, collecting all problems.
    pub fn validate(&self) -> Result<Experiment, ConfigError> {
        let mut problems = Vec::new();
        let mut bad = |field: &str, message: String| problems.push(FieldError { field: field.into(), message });

        if self.name.trim().is_empty() {
            bad("name", "must not be empty".into());
        }
        if self.rounds == 0 {
            bad("rounds", "must be >= 1".into());
        }
        if self.record_stride == 0 {
            bad("record_stride", "must be >= 1".into());
        }
        if self.seeds.is_empty() {
            bad("seeds", "at least one seed is required".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            bad("seeds", "duplicate seeds".into());
        }
        if !(self.eps_y > 0.0) || !self.eps_y.is_finite() {
            bad("eps_y", format!("must be a positive number (got {})", self.eps_y));
        }

        let net = match self.build_graph() {
            Ok(net) => Some(net),
            Err(msg) => {
                bad("graph", msg);
                None
            }
        };
        let weights = net.as_ref().and_then(|net| match self.build_weights(net) {
            Ok(w) => Some(w),
            Err(msg) => {
                bad("weights", msg);
                None
            }
        });
        let u = net.as_ref().and_then(|net| match self.build_initial(net.n()) {
            Ok(u) => Some(u),
            Err(msg) => {
                bad("initial", msg);
                None
            }
        });

        for msg in validate_noise(&self.noise) {
            bad("noise", msg);
        }
        let noise = self.noise.model();

        let algorithm = match self.algorithm {
            AlgorithmKind::Pushsum => {
                if self.beta.is_some() {
                    bad("beta", "only used by nrps".into());
                }
                if self.theta.is_some() {
                    bad("theta", "only used by nrps".into());
                }
                Some(Algorithm::PushSum)
            }
            AlgorithmKind::Nrps => {
                let beta = match &self.beta {
                    None => {
                        bad("beta", "required for nrps".into());
                        None
                    }
                    Some(b) => match make_beta(b.early, b.coeff, b.q, b.switch) {
                        Ok(b) => Some(b),
                        Err(e) => {
                            bad("beta", e.to_string());
                            None
                        }
                    },
                };
                let theta = match &self.theta {
                    None => {
                        bad("theta", "required for nrps".into());
                        None
                    }
                    Some(spec) => {
                        let n = net.as_ref().map(|n| n.n());
                        match build_theta(spec, beta.as_ref(), n, &noise) {
                            Ok(t) => t,
                            Err(msg) => {
                                bad("theta", msg);
                                None
                            }
                        }
                    }
                };
                match (beta, theta) {
                    (Some(beta), Some(theta)) => Some(Algorithm::NrPushSum { beta, theta }),
                    _ => None,
                }
            }
        };

        if !problems.is_empty() {
            return Err(ConfigError { problems });
        }
        let (net, weights, u, algorithm) = (net.unwrap(), weights.unwrap(), u.unwrap(), algorithm.unwrap());
        let instance = ProblemInstance::new(net, weights, u).map_err(|e| ConfigError::single("initial", e.to_string()))?;
        let options = RunOptions {
            rounds: self.rounds,
            record_stride: self.record_stride,
            record_xy: self.record_xy,
            eps_y: self.eps_y,
        };
        Ok(Experiment { config: self.clone(), hash: self.hash(), instance, algorithm, noise, options })
    }

    fn build_graph(&self) -> Result<DirectedNetwork, String> {
        match &self.graph {
            GraphSpec::ErdosRenyi { n, connect_prob, seed, max_attempts } => {
                generate_erdos_renyi_with_attempts(*n, *connect_prob, *seed, max_attempts.unwrap_or(DEFAULT_MAX_ATTEMPTS))
                    .map_err(|e| e.to_string())
            }
            GraphSpec::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                let doc: GraphJson = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
                DirectedNetwork::from_json(&doc).map_err(|e| e.to_string())
            }
            GraphSpec::Inline { n, edges } => {
                DirectedNetwork::from_json(&GraphJson { n: *n, edges: edges.clone() }).map_err(|e| e.to_string())
            }
        }
    }

    fn build_weights(&self, net: &DirectedNetwork) -> Result<WeightMatrix, String> {
        match &self.weights {
            WeightSpec::EqualNeighbor => equal_neighbor_weights(net).map_err(|e| e.to_string()),
            WeightSpec::Matrix { rows } => {
                let n = net.n();
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(format!("expected a {n} x {n} matrix"));
                }
                let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
                WeightMatrix::from_matrix(net, m).map_err(|e| e.to_string())
            }
        }
    }

    fn build_initial(&self, n: usize) -> Result<DMatrix<f64>, String> {
        let u = match &self.initial {
            InitialSpec::Ramp => ProblemInstance::ramp(n),
            InitialSpec::Values { values } => {
                if values.len() != n {
                    return Err(format!("expected {n} values, got {}", values.len()));
                }
                DMatrix::from_column_slice(n, 1, values)
            }
            InitialSpec::Rows { rows } => {
                let p = rows.first().map_or(0, Vec::len);
                if rows.len() != n || p == 0 || rows.iter().any(|r| r.len() != p) {
                    return Err(format!("expected {n} rows of equal, non-zero length"));
                }
                DMatrix::from_fn(n, p, |i, c| rows[i][c])
            }
        };
        if u.iter().any(|v| !v.is_finite()) {
            return Err("values must be finite".into());
        }
        Ok(u)
    }
}

fn validate_noise(spec: &NoiseSpec) -> Vec<String> {
    let mut out = Vec::new();
    match spec.distribution {
        NoiseDistribution::Zero => {}
        NoiseDistribution::Uniform { lo, hi } => {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                out.push(format!("uniform bounds must be finite with lo <= hi (got {lo}, {hi})"));
            }
        }
        NoiseDistribution::Normal { mean, std, bound } => {
            if !(mean.is_finite() && std.is_finite() && std > 0.0) {
                out.push(format!("normal needs finite mean and std > 0 (got {mean}, {std})"));
            }
            if !(bound >= 0.0 && bound.is_finite()) {
                out.push(format!("normal working bound must be >= 0 (got {bound})"));
            }
        }
    }
    if let Some(b) = spec.burst {
        if b.period == 0 {
            out.push("burst period must be >= 1".into());
        }
        if !b.scale.is_finite() {
            out.push("burst scale must be finite".into());
        }
    }
    if spec.link_bounds.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
        out.push("link bounds must be finite and >= 0".into());
    }
    out
}

/// `Ok(None)` when a dependency (β or the graph) already failed.
fn build_theta(
    spec: &ThetaSpec,
    beta: Option<&BetaSchedule>,
    n: Option<usize>,
    noise: &NoiseModel,
) -> Result<Option<ThetaSchedule>, String> {
    let theta = match *spec {
        ThetaSpec::Zero => ThetaSchedule::Zero,
        ThetaSpec::Geometric { rho } => make_theta_geometric(rho).map_err(|e| e.to_string())?,
        ThetaSpec::ConstantThenPower { early, coeff, q, switch } => {
            make_theta_constant_then_power(early, coeff, q, switch).map_err(|e| e.to_string())?
        }
        ThetaSpec::Family { d1, d2, switch, delta } => {
            let bound = effective_delta(noise).value;
            let delta = delta.unwrap_or(bound);
            if delta < bound {
                return Err(format!("family delta {delta} is below the noise bound {bound}"));
            }
            let (Some(beta), Some(n)) = (beta, n) else {
                return Ok(None);
            };
            make_theta_family(*beta, n, delta, d1, d2, switch).map_err(|e| e.to_string())?
        }
    };
    Ok(Some(theta))
}
