//! Additive link noise.
//!
//! Every sample is a pure function of `(seed, round, receiver, sender,
//! channel, component)`: a keyed hash selects an independent SplitMix64
//! stream, so a round can be regenerated in any order and any number of
//! times.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::graph::DirectedNetwork;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Which message a sample perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    X = 1,
    Y = 2,
}

/// Stream position for one scalar sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleKey {
    pub round: u64,
    pub receiver: usize,
    pub sender: usize,
    pub channel: Channel,
    pub component: usize,
}

/// SplitMix64 generator whose starting state is a hash of `(seed, key)`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    state: u64,
}

impl CounterRng {
    pub fn new(seed: u64, key: SampleKey) -> Self {
        let mut h = mix64(seed ^ GOLDEN);
        for word in [
            key.round,
            key.receiver as u64,
            key.sender as u64,
            key.channel as u64,
            key.component as u64,
        ] {
            h = mix64(h.wrapping_add(GOLDEN) ^ word);
        }
        Self { state: h }
    }
}

impl RngCore for CounterRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "lowercase")]
pub enum NoiseDistribution {
    Zero,
    Uniform { lo: f64, hi: f64 },
    /// `bound` is a declared working bound; normal noise has none.
    Normal { mean: f64, std: f64, bound: f64 },
}

/// Every `period`-th round (k = period, 2·period, ...) samples are scaled by `scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Burst {
    pub period: u64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub distribution: NoiseDistribution,
    pub burst: Option<Burst>,
    pub seed: u64,
    /// Optional per-link bounds; only their maximum is used.
    pub link_bounds: Vec<f64>,
}

/// The bound `δ` and whether it is a hard guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveDelta {
    pub value: f64,
    pub rigorous: bool,
}

impl NoiseModel {
    pub fn zero() -> Self {
        Self { distribution: NoiseDistribution::Zero, burst: None, seed: 0, link_bounds: Vec::new() }
    }

    pub fn uniform(lo: f64, hi: f64, seed: u64) -> Self {
        Self { distribution: NoiseDistribution::Uniform { lo, hi }, burst: None, seed, link_bounds: Vec::new() }
    }

    pub fn normal(mean: f64, std: f64, bound: f64, seed: u64) -> Self {
        Self {
            distribution: NoiseDistribution::Normal { mean, std, bound },
            burst: None,
            seed,
            link_bounds: Vec::new(),
        }
    }

    pub fn with_burst(mut self, period: u64, scale: f64) -> Self {
        self.burst = Some(Burst { period, scale });
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.distribution, NoiseDistribution::Zero)
    }

    pub fn burst_active(&self, round: u64) -> bool {
        matches!(self.burst, Some(b) if b.period > 0 && round > 0 && round.is_multiple_of(b.period))
    }

    /// Draws the scalar at `key`, independent of any other draw.
    pub fn sample(&self, key: SampleKey) -> f64 {
        let mut rng = CounterRng::new(self.seed, key);
        let base = match self.distribution {
            NoiseDistribution::Zero => return 0.0,
            NoiseDistribution::Uniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    Uniform::new_inclusive(lo, hi).expect("validated bounds").sample(&mut rng)
                }
            }
            NoiseDistribution::Normal { mean, std, .. } => {
                Normal::new(mean, std).expect("validated std").sample(&mut rng)
            }
        };
        match self.burst {
            Some(b) if self.burst_active(key.round) => base * b.scale,
            _ => base,
        }
    }
}

/// `δ = max` over declared bounds. Exact for uniform noise, a declared
/// working value for normal noise.
pub fn effective_delta(model: &NoiseModel) -> EffectiveDelta {
    let (value, rigorous) = match model.distribution {
        NoiseDistribution::Zero => (0.0, true),
        NoiseDistribution::Uniform { lo, hi } => (lo.abs().max(hi.abs()), true),
        NoiseDistribution::Normal { bound, .. } => (bound, false),
    };
    let value = model.link_bounds.iter().copied().fold(value, f64::max);
    EffectiveDelta { value, rigorous }
}

/// Noise on every directed edge for one round.
///
/// Entries follow the network's ascending `(receiver, sender)` edge order; the
/// x channel stores `p` components per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundNoise {
    round: u64,
    p: usize,
    edges: Vec<(usize, usize)>,
    eta_x: Vec<f64>,
    eta_y: Vec<f64>,
}

impl RoundNoise {
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    fn index(&self, i: usize, j: usize) -> Option<usize> {
        self.edges.binary_search(&(i, j)).ok()
    }

    /// x-channel noise on the message `j → i`.
    pub fn eta_x(&self, i: usize, j: usize) -> Option<&[f64]> {
        self.index(i, j).map(|e| &self.eta_x[e * self.p..(e + 1) * self.p])
    }

    /// y-channel noise on the message `j → i`.
    pub fn eta_y(&self, i: usize, j: usize) -> Option<f64> {
        self.index(i, j).map(|e| self.eta_y[e])
    }

    /// Stacked per-agent sums `η_x_i = Σ_{j ∈ in(i)} η_x_ij`, shape `n × p`.
    pub fn aggregate_x(&self, n: usize) -> DMatrix<f64> {
        let mut agg = DMatrix::zeros(n, self.p);
        for (e, &(i, _)) in self.edges.iter().enumerate() {
            for c in 0..self.p {
                agg[(i, c)] += self.eta_x[e * self.p + c];
            }
        }
        agg
    }

    pub fn aggregate_y(&self, n: usize) -> DVector<f64> {
        let mut agg = DVector::zeros(n);
        for (e, &(i, _)) in self.edges.iter().enumerate() {
            agg[i] += self.eta_y[e];
        }
        agg
    }
}

/// Samples every edge, x component and the y channel for round `k`.
pub fn sample_round(model: &NoiseModel, net: &DirectedNetwork, k: u64, p: usize) -> RoundNoise {
    let edges: Vec<_> = net.edges().collect();
    let mut eta_x = Vec::with_capacity(edges.len() * p);
    let mut eta_y = Vec::with_capacity(edges.len());
    for &(i, j) in &edges {
        for c in 0..p {
            eta_x.push(model.sample(SampleKey { round: k, receiver: i, sender: j, channel: Channel::X, component: c }));
        }
        eta_y.push(model.sample(SampleKey { round: k, receiver: i, sender: j, channel: Channel::Y, component: 0 }));
    }
    RoundNoise { round: k, p, edges, eta_x, eta_y }
}
