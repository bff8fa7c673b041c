//! Deterministic probability kernels: Cholesky factorization, multivariate
//! Gaussian sampling and conditioning, categorical KL divergence, and
//! stream-splittable seeded randomness.
//!
//! Everything here is a pure function of its inputs; the only mutable state
//! is the caller-owned [`SeededRng`].

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Clamp applied to every class probability before a log is taken.
pub const PROB_EPS: f64 = 1e-6;
/// A Cholesky pivot at or below this value counts as non-positive-definite.
pub const PIVOT_FLOOR: f64 = 1e-12;
/// Maximum allowed absolute asymmetry in a covariance input.
pub const SYMMETRY_TOL: f64 = 1e-8;
/// Diagonal jitter schedule tried before giving up on a degenerate covariance.
pub const JITTER_SCHEDULE: [f64; 3] = [1e-8, 1e-6, 1e-4];

// ---------------------------------------------------------------------------
// Seeded randomness
// ---------------------------------------------------------------------------

const MIX_GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-style seeded generator. The same `(seed, stream)` pair yields an
/// identical sample sequence on every run and under any worker count, and
/// [`SeededRng::derive`] hands out independent streams keyed by integer tags
/// such as `(sample, subset, timestep)`.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh generator on a stream mixed from this one's stream and `tags`.
    /// Independent of how many draws have been made from `self`.
    pub fn derive(&self, tags: &[u64]) -> SeededRng {
        let mut s = self.stream;
        for &t in tags {
            s = mix64(s.wrapping_add(MIX_GOLDEN) ^ mix64(t.wrapping_add(1)));
        }
        SeededRng::new(self.seed, s)
    }

    /// One standard-normal draw.
    pub fn normal(&mut self) -> f64 {
        self.sample(StandardNormal)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

// ---------------------------------------------------------------------------
// Cholesky
// ---------------------------------------------------------------------------

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
///
/// Fails with [`Error::NotSymmetric`] if the input deviates from symmetry by
/// more than [`SYMMETRY_TOL`], and with [`Error::NotPositiveDefinite`] when a
/// pivot falls to [`PIVOT_FLOOR`] or below.
pub fn cholesky(sigma: ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = sigma.nrows();
    assert_eq!(n, sigma.ncols(), "cholesky expects a square matrix");
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            dev = dev.max((sigma[[i, j]] - sigma[[j, i]]).abs());
        }
    }
    if dev > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { dev });
    }

    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = sigma[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= PIVOT_FLOOR {
                    return Err(Error::NotPositiveDefinite {
                        pivot: sum,
                        index: i,
                    });
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Cholesky with the [`JITTER_SCHEDULE`] fallback: on failure, retries with
/// increasing multiples of the identity added, and only then errors.
pub fn cholesky_with_jitter(sigma: ArrayView2<f64>) -> Result<Array2<f64>> {
    match cholesky(sigma) {
        Ok(l) => Ok(l),
        Err(Error::NotSymmetric { dev }) => Err(Error::NotSymmetric { dev }),
        Err(first) => {
            for &eps in JITTER_SCHEDULE.iter() {
                let mut jittered = sigma.to_owned();
                for i in 0..jittered.nrows() {
                    jittered[[i, i]] += eps;
                }
                if let Ok(l) = cholesky(jittered.view()) {
                    return Ok(l);
                }
            }
            Err(first)
        }
    }
}

/// Solve `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: ArrayView2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[[i, k]] * x[k];
        }
        x[i] = sum / l[[i, i]];
    }
    x
}

/// Solve `Lᵀ x = b` for lower-triangular `L`.
pub fn solve_lower_transpose(l: ArrayView2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut sum = b[i];
        for k in (i + 1)..n {
            sum -= l[[k, i]] * x[k];
        }
        x[i] = sum / l[[i, i]];
    }
    x
}

// ---------------------------------------------------------------------------
// Multivariate Gaussian
// ---------------------------------------------------------------------------

/// Mean vector plus lower-triangular Cholesky factor of a full covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    mean: Array1<f64>,
    chol: Array2<f64>,
}

impl GaussianParams {
    /// Build from an explicit factor, checking the lower-triangular shape and
    /// the strictly positive diagonal.
    pub fn new(mean: Array1<f64>, chol: Array2<f64>) -> Result<Self> {
        let d = mean.len();
        assert_eq!(chol.nrows(), d, "factor rows must match mean length");
        assert_eq!(chol.ncols(), d, "factor must be square");
        for i in 0..d {
            if chol[[i, i]] <= 0.0 || !chol[[i, i]].is_finite() {
                return Err(Error::NotPositiveDefinite {
                    pivot: chol[[i, i]],
                    index: i,
                });
            }
            for j in (i + 1)..d {
                assert_eq!(chol[[i, j]], 0.0, "factor must be lower triangular");
            }
        }
        Ok(Self { mean, chol })
    }

    /// Factorize `sigma` (with jitter fallback) and wrap it with `mean`.
    pub fn from_covariance(mean: Array1<f64>, sigma: ArrayView2<f64>) -> Result<Self> {
        let chol = cholesky_with_jitter(sigma)?;
        Self::new(mean, chol)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> ArrayView1<f64> {
        self.mean.view()
    }

    pub fn chol(&self) -> ArrayView2<f64> {
        self.chol.view()
    }

    /// Reconstructed covariance `L·Lᵀ`.
    pub fn covariance(&self) -> Array2<f64> {
        self.chol.dot(&self.chol.t())
    }

    /// Log density at `x`.
    pub fn log_density(&self, x: ArrayView1<f64>) -> f64 {
        let d = self.dim() as f64;
        let r = &x.to_owned() - &self.mean;
        let a = solve_lower(self.chol.view(), r.view());
        let log_det: f64 = (0..self.dim()).map(|i| self.chol[[i, i]].ln()).sum();
        -0.5 * a.dot(&a) - log_det - 0.5 * d * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Draw `n` samples as rows of an `n × D` matrix: `mean + L·z` with `z`
/// standard normal. Deterministic for a given rng state.
pub fn sample_mvn(params: &GaussianParams, rng: &mut SeededRng, n: usize) -> Array2<f64> {
    assert!(n >= 1, "sample count must be at least 1");
    let d = params.dim();
    let mut z = Array2::<f64>::zeros((n, d));
    for mut row in z.axis_iter_mut(Axis(0)) {
        for v in row.iter_mut() {
            *v = rng.normal();
        }
    }
    let mut out = z.dot(&params.chol.t());
    for mut row in out.axis_iter_mut(Axis(0)) {
        row += &params.mean;
    }
    out
}

/// Condition a Gaussian on exact values for a strict subset of coordinates,
/// returning the distribution of the complement (standard Schur-complement
/// formulas, re-factorized with jitter fallback).
pub fn gaussian_condition(
    params: &GaussianParams,
    observed_idx: &[usize],
    observed_vals: &[f64],
) -> Result<GaussianParams> {
    let d = params.dim();
    if observed_idx.is_empty() {
        return Err(Error::InvalidSubset("observed index set is empty".into()));
    }
    if observed_idx.len() != observed_vals.len() {
        return Err(Error::InvalidSubset(format!(
            "{} indices but {} values",
            observed_idx.len(),
            observed_vals.len()
        )));
    }
    let mut seen = vec![false; d];
    for &i in observed_idx {
        if i >= d {
            return Err(Error::InvalidSubset(format!(
                "index {i} out of bounds for dimension {d}"
            )));
        }
        if seen[i] {
            return Err(Error::InvalidSubset(format!("duplicate index {i}")));
        }
        seen[i] = true;
    }
    if observed_idx.len() == d {
        return Err(Error::InvalidSubset(
            "observed set must be a strict subset of coordinates".into(),
        ));
    }

    let comp: Vec<usize> = (0..d).filter(|i| !seen[*i]).collect();
    let sigma = params.covariance();
    let no = observed_idx.len();
    let nc = comp.len();

    let mut sigma_oo = Array2::<f64>::zeros((no, no));
    let mut sigma_co = Array2::<f64>::zeros((nc, no));
    let mut sigma_cc = Array2::<f64>::zeros((nc, nc));
    for (a, &i) in observed_idx.iter().enumerate() {
        for (b, &j) in observed_idx.iter().enumerate() {
            sigma_oo[[a, b]] = sigma[[i, j]];
        }
    }
    for (a, &i) in comp.iter().enumerate() {
        for (b, &j) in observed_idx.iter().enumerate() {
            sigma_co[[a, b]] = sigma[[i, j]];
        }
        for (b, &j) in comp.iter().enumerate() {
            sigma_cc[[a, b]] = sigma[[i, j]];
        }
    }

    let l_oo = cholesky_with_jitter(sigma_oo.view())?;
    let resid = Array1::from_iter(
        observed_idx
            .iter()
            .zip(observed_vals)
            .map(|(&i, &v)| v - params.mean[i]),
    );
    // alpha = Sigma_oo^{-1} (v - mu_o)
    let alpha = solve_lower_transpose(l_oo.view(), solve_lower(l_oo.view(), resid.view()).view());
    let mu_c = Array1::from_iter(comp.iter().enumerate().map(|(a, &i)| {
        params.mean[i] + sigma_co.row(a).dot(&alpha)
    }));

    // B = L_oo^{-1} Sigma_oc, so Sigma_cc - Bᵀ B is the Schur complement.
    let mut b = Array2::<f64>::zeros((no, nc));
    for c in 0..nc {
        let col = solve_lower(l_oo.view(), sigma_co.row(c));
        for o in 0..no {
            b[[o, c]] = col[o];
        }
    }
    let sigma_cond = &sigma_cc - &b.t().dot(&b);
    GaussianParams::from_covariance(mu_c, sigma_cond.view())
}

// ---------------------------------------------------------------------------
// Predictive distributions and KL
// ---------------------------------------------------------------------------

/// Probability vector over output classes, clamped away from 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDistribution {
    probs: Vec<f64>,
}

impl PredictiveDistribution {
    /// Clamp every entry into `[PROB_EPS, 1 - PROB_EPS]` and renormalize.
    pub fn new(raw: Vec<f64>) -> Self {
        assert!(raw.len() >= 2, "need at least two classes");
        let mut probs: Vec<f64> = raw
            .into_iter()
            .map(|p| p.clamp(PROB_EPS, 1.0 - PROB_EPS))
            .collect();
        let sum: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= sum;
        }
        Self { probs }
    }

    /// Two-class distribution from the probability of the positive class.
    pub fn bernoulli(p1: f64) -> Self {
        let p = p1.clamp(PROB_EPS, 1.0 - PROB_EPS);
        Self {
            probs: vec![1.0 - p, p],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn arity(&self) -> usize {
        self.probs.len()
    }

    /// Probability of the positive class in the two-class case.
    pub fn p1(&self) -> f64 {
        assert_eq!(self.probs.len(), 2);
        self.probs[1]
    }
}

/// `KL(p ‖ q) = Σ pᵢ ln(pᵢ/qᵢ)`; non-negative, zero iff `p == q` post-clamp.
pub fn kl_categorical(p: &PredictiveDistribution, q: &PredictiveDistribution) -> Result<f64> {
    if p.arity() != q.arity() {
        return Err(Error::ArityMismatch {
            left: p.arity(),
            right: q.arity(),
        });
    }
    Ok(p.probs
        .iter()
        .zip(&q.probs)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum())
}

/// Cross-entropy `H(p, q) = -Σ pᵢ ln qᵢ`.
pub fn cross_entropy(p: &PredictiveDistribution, q: &PredictiveDistribution) -> Result<f64> {
    if p.arity() != q.arity() {
        return Err(Error::ArityMismatch {
            left: p.arity(),
            right: q.arity(),
        });
    }
    Ok(-p
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(&pi, &qi)| pi * qi.ln())
        .sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn cholesky_identity() {
        let eye = Array2::<f64>::eye(3);
        let l = cholesky(eye.view()).unwrap();
        assert_eq!(l, eye);
    }

    #[test]
    fn cholesky_known_factor() {
        let sigma = array![[4.0, 2.0], [2.0, 3.0]];
        let l = cholesky(sigma.view()).unwrap();
        assert_abs_diff_eq!(l[[0, 0]], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l[[1, 0]], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l[[1, 1]], 2.0_f64.sqrt(), epsilon = 1e-12);
        assert_eq!(l[[0, 1]], 0.0);
        assert!(max_abs_diff(&l.dot(&l.t()), &sigma) < 1e-8);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let sigma = array![[1.0, 2.0], [2.0, 1.0]];
        match cholesky(sigma.view()) {
            Err(Error::NotPositiveDefinite { .. }) => {}
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_rejects_asymmetry() {
        let sigma = array![[1.0, 0.5], [0.2, 1.0]];
        assert!(matches!(
            cholesky(sigma.view()),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn jitter_recovers_near_singular() {
        // Rank-deficient: needs the fallback to factorize.
        let sigma = array![[1.0, 1.0], [1.0, 1.0]];
        let l = cholesky_with_jitter(sigma.view()).unwrap();
        assert!(l[[1, 1]] > 0.0);
    }

    #[test]
    fn reconstruction_on_random_spd() {
        let mut rng = SeededRng::new(17, 0);
        for d in 2..6 {
            let mut a = Array2::<f64>::zeros((d, d));
            for v in a.iter_mut() {
                *v = rng.normal();
            }
            let sigma = a.dot(&a.t()) + Array2::<f64>::eye(d);
            let l = cholesky(sigma.view()).unwrap();
            assert!(max_abs_diff(&l.dot(&l.t()), &sigma) < 1e-8);
        }
    }

    #[test]
    fn conditioning_diagonal_keeps_marginals() {
        let params = GaussianParams::from_covariance(
            array![1.0, -2.0, 0.5],
            array![[2.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 0.5]].view(),
        )
        .unwrap();
        let cond = gaussian_condition(&params, &[1], &[10.0]).unwrap();
        assert_abs_diff_eq!(cond.mean()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cond.mean()[1], 0.5, epsilon = 1e-12);
        let cov = cond.covariance();
        assert_abs_diff_eq!(cov[[0, 0]], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(cov[[1, 1]], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(cov[[0, 1]], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn conditioning_textbook_2d() {
        let params = GaussianParams::from_covariance(
            array![0.0, 0.0],
            array![[1.0, 0.5], [0.5, 1.0]].view(),
        )
        .unwrap();
        let cond = gaussian_condition(&params, &[0], &[1.0]).unwrap();
        assert_abs_diff_eq!(cond.mean()[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(cond.covariance()[[0, 0]], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn conditioning_rejects_full_set() {
        let params =
            GaussianParams::from_covariance(array![0.0, 0.0], Array2::<f64>::eye(2).view())
                .unwrap();
        assert!(matches!(
            gaussian_condition(&params, &[0, 1], &[1.0, 1.0]),
            Err(Error::InvalidSubset(_))
        ));
    }

    #[test]
    fn conditioning_variance_monotone_under_superset() {
        // Observing more coordinates never increases remaining variance.
        let mut rng = SeededRng::new(99, 3);
        for _ in 0..20 {
            let d = 4;
            let mut a = Array2::<f64>::zeros((d, d));
            for v in a.iter_mut() {
                *v = rng.normal();
            }
            let sigma = a.dot(&a.t()) + Array2::<f64>::eye(d);
            let params = GaussianParams::from_covariance(Array1::zeros(d), sigma.view()).unwrap();
            let small = gaussian_condition(&params, &[0], &[0.3]).unwrap();
            let big = gaussian_condition(&params, &[0, 1], &[0.3, -0.7]).unwrap();
            // Remaining coords of `big` are coords 1.. of `small`.
            let cs = small.covariance();
            let cb = big.covariance();
            for k in 0..2 {
                assert!(cb[[k, k]] <= cs[[k + 1, k + 1]] + 1e-10);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let params = GaussianParams::from_covariance(
            array![1.0, 2.0],
            array![[1.0, 0.3], [0.3, 2.0]].view(),
        )
        .unwrap();
        let a = sample_mvn(&params, &mut SeededRng::new(5, 7), 3);
        let b = sample_mvn(&params, &mut SeededRng::new(5, 7), 3);
        assert_eq!(a, b);
    }

    #[test]
    fn near_degenerate_samples_hug_mean() {
        let params = GaussianParams::new(
            array![3.0, -1.0],
            Array2::<f64>::eye(2) * 1e-6,
        )
        .unwrap();
        let s = sample_mvn(&params, &mut SeededRng::new(1, 1), 100);
        for row in s.axis_iter(Axis(0)) {
            assert!((row[0] - 3.0).abs() < 1e-4);
            assert!((row[1] + 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn sample_moments_match_params() {
        let params = GaussianParams::from_covariance(
            array![0.0, 0.0],
            Array2::<f64>::eye(2).view(),
        )
        .unwrap();
        let n = 100_000;
        let s = sample_mvn(&params, &mut SeededRng::new(12, 0), n);
        let mean = s.mean_axis(Axis(0)).unwrap();
        assert!(mean.iter().all(|m| m.abs() < 0.02));
        let mut cov = Array2::<f64>::zeros((2, 2));
        for row in s.axis_iter(Axis(0)) {
            for i in 0..2 {
                for j in 0..2 {
                    cov[[i, j]] += (row[i] - mean[i]) * (row[j] - mean[j]);
                }
            }
        }
        cov /= n as f64;
        assert!(max_abs_diff(&cov, &Array2::eye(2)) < 0.02);
    }

    #[test]
    fn kl_examples() {
        let p = PredictiveDistribution::new(vec![0.3, 0.7]);
        assert_eq!(kl_categorical(&p, &p).unwrap(), 0.0);

        let p = PredictiveDistribution::new(vec![0.9, 0.1]);
        let q = PredictiveDistribution::new(vec![0.5, 0.5]);
        let expect = 0.9 * (0.9_f64 / 0.5).ln() + 0.1 * (0.1_f64 / 0.5).ln();
        assert_abs_diff_eq!(kl_categorical(&p, &q).unwrap(), expect, epsilon = 1e-12);
        assert_abs_diff_eq!(kl_categorical(&p, &q).unwrap(), 0.368_064, epsilon = 1e-6);

        // Asymmetry witness.
        let kl_qp = kl_categorical(&q, &p).unwrap();
        assert_abs_diff_eq!(kl_qp, 0.510_826, epsilon = 1e-6);
        assert!((kl_qp - kl_categorical(&p, &q).unwrap()).abs() > 0.1);
    }

    #[test]
    fn kl_arity_mismatch() {
        let p = PredictiveDistribution::new(vec![0.5, 0.5]);
        let q = PredictiveDistribution::new(vec![0.2, 0.3, 0.5]);
        assert!(matches!(
            kl_categorical(&p, &q),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn kl_nonnegative_on_random_pairs() {
        let mut rng = SeededRng::new(2024, 1);
        for _ in 0..200 {
            let a: f64 = rng.gen_range(0.0..1.0);
            let b: f64 = rng.gen_range(0.0..1.0);
            let p = PredictiveDistribution::bernoulli(a);
            let q = PredictiveDistribution::bernoulli(b);
            assert!(kl_categorical(&p, &q).unwrap() >= 0.0);
            assert_eq!(kl_categorical(&p, &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn derived_streams_are_independent_and_stable() {
        let root = SeededRng::new(42, 0);
        let mut a1 = root.derive(&[3, 1, 4]);
        let mut a2 = root.derive(&[3, 1, 4]);
        let mut b = root.derive(&[3, 1, 5]);
        let xs: Vec<u64> = (0..4).map(|_| a1.next_u64()).collect();
        let ys: Vec<u64> = (0..4).map(|_| a2.next_u64()).collect();
        let zs: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, zs);
    }

    #[test]
    fn bernoulli_clamps_saturated_outputs() {
        let p = PredictiveDistribution::bernoulli(1.0);
        assert!(p.p1() <= 1.0 - PROB_EPS);
        assert!(p.probs()[0] >= PROB_EPS);
        let sum: f64 = p.probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
}
