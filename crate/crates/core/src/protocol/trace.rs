use serde::{Deserialize, Serialize};

use super::SimulationState;

/// State recorded at one round. `None` marks an undefined ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub round: u64,
    pub z: Vec<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    /// `1ᵀx(k)`, one entry per component.
    pub sum_x: Vec<f64>,
    pub sum_y: f64,
    pub min_y: f64,
    pub consensus_error: Option<f64>,
    pub max_deviation: Option<f64>,
}

impl Snapshot {
    /// Agent estimates as plain floats, NaN for undefined entries.
    pub fn z_values(&self) -> Vec<Vec<f64>> {
        self.z.iter().map(|row| row.iter().map(|v| v.unwrap_or(f64::NAN)).collect()).collect()
    }

    /// `max_i z_i - min_i z_i` of component `c`.
    pub fn spread(&self, c: usize) -> Option<f64> {
        let vals: Option<Vec<f64>> = self.z.iter().map(|row| row[c]).collect();
        let vals = vals?;
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        Some(hi - lo)
    }
}

/// Whole-run observations, including rounds that were not recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub rounds: u64,
    /// `min_{i,k >= 1} y_i(k)`.
    pub min_y: f64,
    pub ratio_breakdown_round: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub algorithm: String,
    pub u_bar: Vec<f64>,
    /// The noise bound is not a hard guarantee (normal noise or bursts).
    pub soft_bound: bool,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: RunDiagnostics,
}

/// `Σ_i ‖z_i − ū‖²`, `None` if any estimate is undefined.
pub fn consensus_error(z: &[Vec<f64>], u_bar: &[f64]) -> Option<f64> {
    let mut total = 0.0;
    for row in z {
        for (v, m) in row.iter().zip(u_bar) {
            if !v.is_finite() {
                return None;
            }
            total += (v - m).powi(2);
        }
    }
    Some(total)
}

/// `max_i ‖z_i − ū‖` (Euclidean over components).
pub fn max_deviation(z: &[Vec<f64>], u_bar: &[f64]) -> Option<f64> {
    let mut worst: f64 = 0.0;
    for row in z {
        let mut sq = 0.0;
        for (v, m) in row.iter().zip(u_bar) {
            if !v.is_finite() {
                return None;
            }
            sq += (v - m).powi(2);
        }
        worst = worst.max(sq.sqrt());
    }
    Some(worst)
}

impl RunTrace {
    pub(super) fn new(algorithm: &str, u_bar: Vec<f64>, soft_bound: bool) -> Self {
        Self {
            algorithm: algorithm.to_string(),
            u_bar,
            soft_bound,
            snapshots: Vec::new(),
            diagnostics: RunDiagnostics { rounds: 0, min_y: f64::INFINITY, ratio_breakdown_round: None },
        }
    }

    pub(super) fn observe(&mut self, state: &SimulationState) {
        self.diagnostics.rounds = state.k;
        self.diagnostics.min_y = self.diagnostics.min_y.min(state.y.min());
        if self.diagnostics.ratio_breakdown_round.is_none() && state.z.iter().any(|v| v.is_nan()) {
            self.diagnostics.ratio_breakdown_round = Some(state.k);
        }
    }

    pub(super) fn record(&mut self, state: &SimulationState, with_xy: bool) {
        let (n, p) = (state.x.nrows(), state.x.ncols());
        let z: Vec<Vec<f64>> = (0..n).map(|i| (0..p).map(|c| state.z[(i, c)]).collect()).collect();
        let snapshot = Snapshot {
            round: state.k,
            z: z.iter().map(|row| row.iter().map(|&v| (!v.is_nan()).then_some(v)).collect()).collect(),
            x: with_xy.then(|| (0..n).map(|i| (0..p).map(|c| state.x[(i, c)]).collect()).collect()),
            y: with_xy.then(|| state.y.iter().copied().collect()),
            sum_x: state.x.column_iter().map(|col| col.sum()).collect(),
            sum_y: state.y.sum(),
            min_y: state.y.min(),
            consensus_error: consensus_error(&z, &self.u_bar),
            max_deviation: max_deviation(&z, &self.u_bar),
        };
        self.snapshots.push(snapshot);
    }

    pub fn final_snapshot(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    pub fn snapshot_at(&self, round: u64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.round == round)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consensus_error_matches_metric() {
        let z: Vec<Vec<f64>> = (1..=10).map(|v| vec![v as f64]).collect();
        // Σ (i - 5.5)² for i = 1..10
        assert_eq!(consensus_error(&z, &[5.5]), Some(82.5));
        assert_eq!(max_deviation(&z, &[5.5]), Some(4.5));
        let broken = vec![vec![1.0], vec![f64::NAN]];
        assert_eq!(consensus_error(&broken, &[1.0]), None);
    }
}
