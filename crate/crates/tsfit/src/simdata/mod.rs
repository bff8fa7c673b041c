//! Synthetic benchmarks with known ground-truth importance: spike data
//! (NARMA features with additive spikes), state data (2-state hidden Markov
//! model with Gaussian emissions) and switch-feature data (3-state chain with
//! Gaussian-process segments). Each generator also emits the binary mask of
//! observations that causally drive the label.

pub mod io;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::prob::{cholesky_with_jitter, GaussianParams, SeededRng};

/// One multivariate series: a `D×T` observation matrix, a per-timestep
/// binary label, and (for synthetic data) the ground-truth importance mask.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesSample {
    pub id: u64,
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub gt: Option<Array2<u8>>,
}

/// Per-feature summary statistics pooled over a dataset. Used for the
/// bootstrap baseline, occlusion ranges and mean imputation; compute these
/// on the training split only.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// All training values of each feature, in sample-then-time order.
    pub reservoir: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    pub name: String,
    pub d: usize,
    pub t_max: usize,
    pub samples: Vec<TimeSeriesSample>,
}

impl TimeSeriesDataset {
    pub fn new(name: impl Into<String>, d: usize, t_max: usize) -> Self {
        Self {
            name: name.into(),
            d,
            t_max,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn has_gt(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.gt.is_some())
    }

    pub fn compute_feature_stats(&self) -> FeatureStats {
        let d = self.d;
        let mut reservoir = vec![Vec::new(); d];
        for s in &self.samples {
            for f in 0..d {
                reservoir[f].extend(s.x.row(f).iter());
            }
        }
        let mut mean = vec![0.0; d];
        let mut var = vec![0.0; d];
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for f in 0..d {
            let n = reservoir[f].len().max(1) as f64;
            let m = reservoir[f].iter().sum::<f64>() / n;
            mean[f] = m;
            var[f] = reservoir[f].iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            for &v in &reservoir[f] {
                min[f] = min[f].min(v);
                max[f] = max[f].max(v);
            }
        }
        FeatureStats {
            mean,
            var,
            min,
            max,
            reservoir,
        }
    }
}

// ---------------------------------------------------------------------------
// Spike data
// ---------------------------------------------------------------------------

/// NARMA features with linear trends and additive spikes; the label turns on
/// at the first spike in feature 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeConfig {
    pub n_samples: usize,
    pub t: usize,
    pub d: usize,
    /// NARMA order.
    pub order: usize,
    pub noise_std: f64,
    /// Per-feature linear trend slopes.
    pub trends: Vec<f64>,
    /// Probability that a feature receives any spikes at all.
    pub spike_prob: f64,
    /// Poisson rate of the spike count.
    pub spike_rate: f64,
    /// Additive spike magnitude.
    pub spike_magnitude: f64,
}

impl Default for SpikeConfig {
    fn default() -> Self {
        Self {
            n_samples: 100,
            t: 80,
            d: 3,
            order: 2,
            noise_std: 0.03,
            trends: vec![0.0, 0.003, 0.065],
            spike_prob: 0.5,
            spike_rate: 2.0,
            spike_magnitude: 2.0,
        }
    }
}

// Bounded NARMA recurrence constants. The usual divergence-free choice: the
// raw series stays near 0.15 so that trends and spikes dominate.
const NARMA_A: f64 = 0.3;
const NARMA_B: f64 = 0.05;
const NARMA_C: f64 = 1.5;
const NARMA_D: f64 = 0.1;

fn narma_series(t_len: usize, order: usize, noise_std: f64, rng: &mut SeededRng) -> Vec<f64> {
    // Seed the recurrence with `order` zeros and discard that warm-up.
    let total = t_len + order;
    let u: Vec<f64> = (0..total).map(|_| rng.normal() * noise_std).collect();
    let mut x = vec![0.0; total];
    for t in (order - 1)..(total - 1) {
        let lag_sum: f64 = (0..order).map(|i| x[t - i]).sum();
        x[t + 1] = NARMA_A * x[t]
            + NARMA_B * x[t] * lag_sum
            + NARMA_C * u[t + 1 - order] * u[t]
            + NARMA_D;
    }
    x.split_off(order)
}

fn distinct_times(count: usize, t_len: usize, rng: &mut SeededRng) -> Vec<usize> {
    let count = count.min(t_len);
    let mut times = Vec::with_capacity(count);
    while times.len() < count {
        let t = rng.gen_range(0..t_len);
        if !times.contains(&t) {
            times.push(t);
        }
    }
    times
}

pub fn gen_spike(cfg: &SpikeConfig, rng: &SeededRng) -> TimeSeriesDataset {
    assert!(cfg.order >= 1);
    assert!(cfg.spike_magnitude > 0.0);
    assert!(cfg.spike_rate > 0.0);
    assert_eq!(cfg.trends.len(), cfg.d, "one trend slope per feature");
    let mut ds = TimeSeriesDataset::new("spike", cfg.d, cfg.t);
    for id in 0..cfg.n_samples {
        let mut srng = rng.derive(&[id as u64]);
        let mut x = Array2::<f64>::zeros((cfg.d, cfg.t));
        for f in 0..cfg.d {
            let series = narma_series(cfg.t, cfg.order, cfg.noise_std, &mut srng);
            for t in 0..cfg.t {
                x[[f, t]] = series[t] + cfg.trends[f] * t as f64;
            }
        }
        let mut first_spike_f0: Option<usize> = None;
        for f in 0..cfg.d {
            if srng.gen_range(0.0..1.0) < cfg.spike_prob {
                let count = Poisson::new(cfg.spike_rate).unwrap().sample(&mut srng) as usize;
                let times = distinct_times(count, cfg.t, &mut srng);
                for &t in &times {
                    x[[f, t]] += cfg.spike_magnitude;
                }
                if f == 0 {
                    first_spike_f0 = times.iter().copied().min();
                }
            }
        }
        let mut y = vec![0u8; cfg.t];
        let mut gt = Array2::<u8>::zeros((cfg.d, cfg.t));
        if let Some(t1) = first_spike_f0 {
            for t in t1..cfg.t {
                y[t] = 1;
            }
            gt[[0, t1]] = 1;
        }
        ds.samples.push(TimeSeriesSample {
            id: id as u64,
            x,
            y,
            gt: Some(gt),
        });
    }
    ds
}

// ---------------------------------------------------------------------------
// State data
// ---------------------------------------------------------------------------

/// 2-state hidden Markov model with full-covariance Gaussian emissions; in
/// state 0 the label is driven by feature 1, in state 1 by feature 2.
#[derive(Debug, Clone, PartialEq)]
pub struct StateConfig {
    pub n_samples: usize,
    pub t: usize,
    pub pi: [f64; 2],
    pub trans: [[f64; 2]; 2],
    pub means: [[f64; 3]; 2],
    pub marginal_var: f64,
    pub cross_cov: f64,
}

impl Default for StateConfig {
    fn default() -> Self {
        Self {
            n_samples: 100,
            t: 200,
            pi: [0.5, 0.5],
            trans: [[0.1, 0.9], [0.1, 0.9]],
            means: [[0.1, 1.6, 0.5], [-0.1, -0.4, -1.5]],
            marginal_var: 0.8,
            cross_cov: 0.01,
        }
    }
}

/// Feature whose value feeds the label logit in each state.
pub const STATE_DRIVERS: [usize; 2] = [1, 2];
/// Correlated feature pairs per state.
const STATE_CORR: [(usize, usize); 2] = [(1, 2), (0, 2)];

fn categorical(probs: &[f64], rng: &mut SeededRng) -> usize {
    let u: f64 = rng.gen_range(0.0..1.0);
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

fn state_emissions(cfg: &StateConfig) -> Vec<GaussianParams> {
    (0..2)
        .map(|s| {
            let mut sigma = Array2::<f64>::eye(3) * cfg.marginal_var;
            let (a, b) = STATE_CORR[s];
            sigma[[a, b]] = cfg.cross_cov;
            sigma[[b, a]] = cfg.cross_cov;
            GaussianParams::from_covariance(Array1::from(cfg.means[s].to_vec()), sigma.view())
                .expect("state emission covariance must be SPD")
        })
        .collect()
}

pub fn gen_state(cfg: &StateConfig, rng: &SeededRng) -> TimeSeriesDataset {
    for row in cfg.trans.iter() {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9, "transition rows must sum to 1");
    }
    let emissions = state_emissions(cfg);
    let mut ds = TimeSeriesDataset::new("state", 3, cfg.t);
    for id in 0..cfg.n_samples {
        let mut srng = rng.derive(&[id as u64]);
        let mut states = Vec::with_capacity(cfg.t);
        states.push(categorical(&cfg.pi, &mut srng));
        for t in 1..cfg.t {
            states.push(categorical(&cfg.trans[states[t - 1]], &mut srng));
        }
        let mut x = Array2::<f64>::zeros((3, cfg.t));
        for t in 0..cfg.t {
            let draw = crate::prob::sample_mvn(&emissions[states[t]], &mut srng, 1);
            for f in 0..3 {
                x[[f, t]] = draw[[0, f]];
            }
        }
        let mut y = vec![0u8; cfg.t];
        let mut gt = Array2::<u8>::zeros((3, cfg.t));
        for t in 0..cfg.t {
            let driver = STATE_DRIVERS[states[t]];
            let p = crate::nn::sigmoid(x[[driver, t]]);
            y[t] = u8::from(srng.gen_range(0.0..1.0) < p);
            if t == 0 || states[t] != states[t - 1] {
                gt[[driver, t]] = 1;
            }
        }
        ds.samples.push(TimeSeriesSample {
            id: id as u64,
            x,
            y,
            gt: Some(gt),
        });
    }
    ds
}

// ---------------------------------------------------------------------------
// Switch-feature data
// ---------------------------------------------------------------------------

/// 3-state chain whose features follow a Gaussian process within each state
/// segment; in state k the label is driven by feature k.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchConfig {
    pub n_samples: usize,
    pub t: usize,
    pub pi: [f64; 3],
    pub trans: [[f64; 3]; 3],
    pub means: [[f64; 3]; 3],
    pub marginal_var: f64,
    pub rbf_gamma: f64,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        Self {
            n_samples: 100,
            t: 100,
            pi: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            trans: [
                [0.95, 0.02, 0.03],
                [0.02, 0.95, 0.03],
                [0.03, 0.02, 0.95],
            ],
            means: [[0.8, -0.5, -0.2], [0.0, -1.0, 0.0], [-0.2, -0.2, 0.8]],
            marginal_var: 0.1,
            rbf_gamma: 0.2,
        }
    }
}

/// Gaussian-process draw over `len` unit-spaced points with an RBF kernel.
fn gp_segment(
    len: usize,
    mean: f64,
    var: f64,
    gamma: f64,
    rng: &mut SeededRng,
) -> Vec<f64> {
    let mut k = Array2::<f64>::zeros((len, len));
    for i in 0..len {
        for j in 0..len {
            let dt = i as f64 - j as f64;
            k[[i, j]] = var * (-gamma * dt * dt).exp();
        }
    }
    let l = cholesky_with_jitter(k.view()).expect("RBF kernel must factorize with jitter");
    let z: Vec<f64> = (0..len).map(|_| rng.normal()).collect();
    (0..len)
        .map(|i| mean + (0..=i).map(|j| l[[i, j]] * z[j]).sum::<f64>())
        .collect()
}

pub fn gen_switch(cfg: &SwitchConfig, rng: &SeededRng) -> TimeSeriesDataset {
    for row in cfg.trans.iter() {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9, "transition rows must sum to 1");
    }
    let mut ds = TimeSeriesDataset::new("switch", 3, cfg.t);
    for id in 0..cfg.n_samples {
        let mut srng = rng.derive(&[id as u64]);
        let mut states = Vec::with_capacity(cfg.t);
        states.push(categorical(&cfg.pi, &mut srng));
        for t in 1..cfg.t {
            states.push(categorical(&cfg.trans[states[t - 1]], &mut srng));
        }
        // Maximal constant-state segments.
        let mut segments: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        for t in 1..=cfg.t {
            if t == cfg.t || states[t] != states[t - 1] {
                segments.push((start, t));
                start = t;
            }
        }
        let mut x = Array2::<f64>::zeros((3, cfg.t));
        for &(a, b) in &segments {
            let s = states[a];
            for f in 0..3 {
                let vals = gp_segment(b - a, cfg.means[s][f], cfg.marginal_var, cfg.rbf_gamma, &mut srng);
                for (off, v) in vals.into_iter().enumerate() {
                    x[[f, a + off]] = v;
                }
            }
        }
        let mut y = vec![0u8; cfg.t];
        let mut gt = Array2::<u8>::zeros((3, cfg.t));
        for t in 0..cfg.t {
            let driver = states[t];
            let p = crate::nn::sigmoid(x[[driver, t]]);
            y[t] = u8::from(srng.gen_range(0.0..1.0) < p);
            if t == 0 || states[t] != states[t - 1] {
                gt[[driver, t]] = 1;
            }
        }
        ds.samples.push(TimeSeriesSample {
            id: id as u64,
            x,
            y,
            gt: Some(gt),
        });
    }
    ds
}
