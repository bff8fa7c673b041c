//! Gated recurrent cell with batched forward/backward passes, plus the Adam
//! update both trainable models share. Backpropagation through time is done
//! by hand: callers stash one [`GruStep`] per timestep on the way forward and
//! walk them in reverse.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use ndarray::linalg::general_mat_mul;

use crate::prob::SeededRng;
use rand::Rng;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Gate and candidate parameters of a single GRU layer. Inputs are row
/// batches (`B×D`), hidden states `B×H`; weights are laid out so a step is
/// `x·W + h·U + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub w_z: Array2<f64>,
    pub w_r: Array2<f64>,
    pub w_n: Array2<f64>,
    pub u_z: Array2<f64>,
    pub u_r: Array2<f64>,
    pub u_n: Array2<f64>,
    pub b_z: Array1<f64>,
    pub b_r: Array1<f64>,
    pub b_n: Array1<f64>,
}

/// Per-step cache kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GruStep {
    pub x: Array2<f64>,
    pub h_prev: Array2<f64>,
    pub z: Array2<f64>,
    pub r: Array2<f64>,
    pub n: Array2<f64>,
    pub h: Array2<f64>,
}

/// Gradient accumulator mirroring [`GruCell`].
#[derive(Debug, Clone)]
pub struct GruGrads {
    pub w_z: Array2<f64>,
    pub w_r: Array2<f64>,
    pub w_n: Array2<f64>,
    pub u_z: Array2<f64>,
    pub u_r: Array2<f64>,
    pub u_n: Array2<f64>,
    pub b_z: Array1<f64>,
    pub b_r: Array1<f64>,
    pub b_n: Array1<f64>,
}

pub fn uniform_matrix(rng: &mut SeededRng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    let mut m = Array2::<f64>::zeros((rows, cols));
    for v in m.iter_mut() {
        *v = rng.gen_range(-bound..bound);
    }
    m
}

pub fn uniform_vector(rng: &mut SeededRng, len: usize, bound: f64) -> Array1<f64> {
    let mut v = Array1::<f64>::zeros(len);
    for x in v.iter_mut() {
        *x = rng.gen_range(-bound..bound);
    }
    v
}

impl GruCell {
    /// All weights and biases drawn from `U(-1/sqrt(H), 1/sqrt(H))`.
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut SeededRng) -> Self {
        let k = 1.0 / (hidden_dim as f64).sqrt();
        Self {
            w_z: uniform_matrix(rng, input_dim, hidden_dim, k),
            w_r: uniform_matrix(rng, input_dim, hidden_dim, k),
            w_n: uniform_matrix(rng, input_dim, hidden_dim, k),
            u_z: uniform_matrix(rng, hidden_dim, hidden_dim, k),
            u_r: uniform_matrix(rng, hidden_dim, hidden_dim, k),
            u_n: uniform_matrix(rng, hidden_dim, hidden_dim, k),
            b_z: uniform_vector(rng, hidden_dim, k),
            b_r: uniform_vector(rng, hidden_dim, k),
            b_n: uniform_vector(rng, hidden_dim, k),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.ncols()
    }

    /// One step for a row batch; returns the cache including the new hidden.
    ///
    /// z = σ(x·Wz + h·Uz + bz), r = σ(x·Wr + h·Ur + br),
    /// n = tanh(x·Wn + (r◦h)·Un + bn), h' = (1−z)◦n + z◦h.
    pub fn forward_step(&self, x: ArrayView2<f64>, h_prev: ArrayView2<f64>) -> GruStep {
        let b = x.nrows();
        let hd = self.hidden_dim();

        let mut z = x.dot(&self.w_z);
        general_mat_mul(1.0, &h_prev, &self.u_z, 1.0, &mut z);
        let mut r = x.dot(&self.w_r);
        general_mat_mul(1.0, &h_prev, &self.u_r, 1.0, &mut r);
        for i in 0..b {
            for j in 0..hd {
                z[[i, j]] = sigmoid(z[[i, j]] + self.b_z[j]);
                r[[i, j]] = sigmoid(r[[i, j]] + self.b_r[j]);
            }
        }

        let m = &r * &h_prev;
        let mut n = x.dot(&self.w_n);
        general_mat_mul(1.0, &m, &self.u_n, 1.0, &mut n);
        for i in 0..b {
            for j in 0..hd {
                n[[i, j]] = (n[[i, j]] + self.b_n[j]).tanh();
            }
        }

        let mut h = Array2::<f64>::zeros((b, hd));
        for i in 0..b {
            for j in 0..hd {
                h[[i, j]] = (1.0 - z[[i, j]]) * n[[i, j]] + z[[i, j]] * h_prev[[i, j]];
            }
        }

        GruStep {
            x: x.to_owned(),
            h_prev: h_prev.to_owned(),
            z,
            r,
            n,
            h,
        }
    }

    /// One step without the backward cache; returns only the new hidden.
    pub fn infer_step(&self, x: ArrayView2<f64>, h_prev: ArrayView2<f64>) -> Array2<f64> {
        let b = x.nrows();
        let hd = self.hidden_dim();
        let mut z = x.dot(&self.w_z);
        general_mat_mul(1.0, &h_prev, &self.u_z, 1.0, &mut z);
        let mut r = x.dot(&self.w_r);
        general_mat_mul(1.0, &h_prev, &self.u_r, 1.0, &mut r);
        for i in 0..b {
            for j in 0..hd {
                z[[i, j]] = sigmoid(z[[i, j]] + self.b_z[j]);
                r[[i, j]] = sigmoid(r[[i, j]] + self.b_r[j]);
            }
        }
        let m = &r * &h_prev;
        let mut n = x.dot(&self.w_n);
        general_mat_mul(1.0, &m, &self.u_n, 1.0, &mut n);
        let mut h = Array2::<f64>::zeros((b, hd));
        for i in 0..b {
            for j in 0..hd {
                let nij = (n[[i, j]] + self.b_n[j]).tanh();
                h[[i, j]] = (1.0 - z[[i, j]]) * nij + z[[i, j]] * h_prev[[i, j]];
            }
        }
        h
    }

    /// Reverse one step. `d_h` is the loss gradient w.r.t. the step's output
    /// hidden state; returns gradients w.r.t. the previous hidden state and
    /// the step input, accumulating parameter gradients into `grads`.
    pub fn backward_step(
        &self,
        step: &GruStep,
        d_h: &Array2<f64>,
        grads: &mut GruGrads,
    ) -> (Array2<f64>, Array2<f64>) {
        let b = d_h.nrows();
        let hd = self.hidden_dim();
        let d_in = self.input_dim();

        let mut d_zpre = Array2::<f64>::zeros((b, hd));
        let mut d_npre = Array2::<f64>::zeros((b, hd));
        for i in 0..b {
            for j in 0..hd {
                let z = step.z[[i, j]];
                let n = step.n[[i, j]];
                d_zpre[[i, j]] = d_h[[i, j]] * (step.h_prev[[i, j]] - n) * z * (1.0 - z);
                d_npre[[i, j]] = d_h[[i, j]] * (1.0 - z) * (1.0 - n * n);
            }
        }

        let d_m = d_npre.dot(&self.u_n.t());
        let mut d_rpre = Array2::<f64>::zeros((b, hd));
        for i in 0..b {
            for j in 0..hd {
                let r = step.r[[i, j]];
                d_rpre[[i, j]] = d_m[[i, j]] * step.h_prev[[i, j]] * r * (1.0 - r);
            }
        }

        let mut d_h_prev = Array2::<f64>::zeros((b, hd));
        for i in 0..b {
            for j in 0..hd {
                d_h_prev[[i, j]] =
                    d_h[[i, j]] * step.z[[i, j]] + d_m[[i, j]] * step.r[[i, j]];
            }
        }
        general_mat_mul(1.0, &d_zpre, &self.u_z.t(), 1.0, &mut d_h_prev);
        general_mat_mul(1.0, &d_rpre, &self.u_r.t(), 1.0, &mut d_h_prev);

        let m = &step.r * &step.h_prev;
        general_mat_mul(1.0, &step.x.t(), &d_zpre, 1.0, &mut grads.w_z);
        general_mat_mul(1.0, &step.x.t(), &d_rpre, 1.0, &mut grads.w_r);
        general_mat_mul(1.0, &step.x.t(), &d_npre, 1.0, &mut grads.w_n);
        general_mat_mul(1.0, &step.h_prev.t(), &d_zpre, 1.0, &mut grads.u_z);
        general_mat_mul(1.0, &step.h_prev.t(), &d_rpre, 1.0, &mut grads.u_r);
        general_mat_mul(1.0, &m.t(), &d_npre, 1.0, &mut grads.u_n);
        grads.b_z += &d_zpre.sum_axis(Axis(0));
        grads.b_r += &d_rpre.sum_axis(Axis(0));
        grads.b_n += &d_npre.sum_axis(Axis(0));

        let mut d_x = Array2::<f64>::zeros((b, d_in));
        general_mat_mul(1.0, &d_zpre, &self.w_z.t(), 1.0, &mut d_x);
        general_mat_mul(1.0, &d_rpre, &self.w_r.t(), 1.0, &mut d_x);
        general_mat_mul(1.0, &d_npre, &self.w_n.t(), 1.0, &mut d_x);

        (d_h_prev, d_x)
    }

    /// Checkpoint/optimizer parameter order: w_z, w_r, w_n, u_z, u_r, u_n,
    /// b_z, b_r, b_n.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for m in [&self.w_z, &self.w_r, &self.w_n, &self.u_z, &self.u_r, &self.u_n] {
            out.extend(m.iter());
        }
        for v in [&self.b_z, &self.b_r, &self.b_n] {
            out.extend(v.iter());
        }
    }

    pub fn unflatten_from(&mut self, cursor: &mut std::slice::Iter<f64>) {
        for m in [
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_n,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_n,
        ] {
            for v in m.iter_mut() {
                *v = *cursor.next().expect("parameter buffer too short");
            }
        }
        for vec in [&mut self.b_z, &mut self.b_r, &mut self.b_n] {
            for v in vec.iter_mut() {
                *v = *cursor.next().expect("parameter buffer too short");
            }
        }
    }

    pub fn param_count(&self) -> usize {
        let (d, h) = (self.input_dim(), self.hidden_dim());
        3 * (d * h + h * h + h)
    }
}

impl GruGrads {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            w_z: Array2::zeros((input_dim, hidden_dim)),
            w_r: Array2::zeros((input_dim, hidden_dim)),
            w_n: Array2::zeros((input_dim, hidden_dim)),
            u_z: Array2::zeros((hidden_dim, hidden_dim)),
            u_r: Array2::zeros((hidden_dim, hidden_dim)),
            u_n: Array2::zeros((hidden_dim, hidden_dim)),
            b_z: Array1::zeros(hidden_dim),
            b_r: Array1::zeros(hidden_dim),
            b_n: Array1::zeros(hidden_dim),
        }
    }

    /// Same order as [`GruCell::flatten_into`].
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for m in [&self.w_z, &self.w_r, &self.w_n, &self.u_z, &self.u_r, &self.u_n] {
            out.extend(m.iter());
        }
        for v in [&self.b_z, &self.b_r, &self.b_n] {
            out.extend(v.iter());
        }
    }
}

/// Adam over a flat parameter buffer.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(params.len(), grads.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn forward_zero_weights_is_convex_blend() {
        // With all parameters zero: z = r = 0.5, n = 0, h' = 0.5 h.
        let d = 2;
        let hd = 3;
        let cell = GruCell {
            w_z: Array2::zeros((d, hd)),
            w_r: Array2::zeros((d, hd)),
            w_n: Array2::zeros((d, hd)),
            u_z: Array2::zeros((hd, hd)),
            u_r: Array2::zeros((hd, hd)),
            u_n: Array2::zeros((hd, hd)),
            b_z: Array1::zeros(hd),
            b_r: Array1::zeros(hd),
            b_n: Array1::zeros(hd),
        };
        let x = array![[1.0, -1.0]];
        let h = array![[0.4, -0.8, 0.2]];
        let step = cell.forward_step(x.view(), h.view());
        for j in 0..hd {
            assert!((step.h[[0, j]] - 0.5 * h[[0, j]]).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        // Scalar loss: sum of final hidden after two steps.
        let mut rng = SeededRng::new(7, 0);
        let d = 3;
        let hd = 4;
        let mut cell = GruCell::init(d, hd, &mut rng);
        let x0 = uniform_matrix(&mut rng, 2, d, 1.0);
        let x1 = uniform_matrix(&mut rng, 2, d, 1.0);

        let loss = |cell: &GruCell, x0: &Array2<f64>, x1: &Array2<f64>| -> f64 {
            let h0 = Array2::<f64>::zeros((2, hd));
            let s0 = cell.forward_step(x0.view(), h0.view());
            let s1 = cell.forward_step(x1.view(), s0.h.view());
            s1.h.sum()
        };

        // Analytic gradients.
        let h0 = Array2::<f64>::zeros((2, hd));
        let s0 = cell.forward_step(x0.view(), h0.view());
        let s1 = cell.forward_step(x1.view(), s0.h.view());
        let mut grads = GruGrads::zeros(d, hd);
        let d_h1 = Array2::<f64>::ones(s1.h.raw_dim());
        let (d_h0, d_x1) = cell.backward_step(&s1, &d_h1, &mut grads);
        let (_, d_x0) = cell.backward_step(&s0, &d_h0, &mut grads);

        let mut flat_grads = Vec::new();
        grads.flatten_into(&mut flat_grads);

        let mut flat = Vec::new();
        cell.flatten_into(&mut flat);
        let h = 1e-6;
        for idx in (0..flat.len()).step_by(7) {
            let orig = flat[idx];
            flat[idx] = orig + h;
            cell.unflatten_from(&mut flat.iter());
            let up = loss(&cell, &x0, &x1);
            flat[idx] = orig - h;
            cell.unflatten_from(&mut flat.iter());
            let down = loss(&cell, &x0, &x1);
            flat[idx] = orig;
            cell.unflatten_from(&mut flat.iter());
            let fd = (up - down) / (2.0 * h);
            assert!(
                (fd - flat_grads[idx]).abs() <= 1e-6 * (1.0 + fd.abs()),
                "param {idx}: fd {fd} vs analytic {}",
                flat_grads[idx]
            );
        }

        // Input gradients via finite differences too.
        for (x, dx, other, first) in [(&x0, &d_x0, &x1, true), (&x1, &d_x1, &x0, false)] {
            let mut xp = x.clone();
            for i in [0usize, 3] {
                let (r, c) = (i / d, i % d);
                let orig = xp[[r, c]];
                xp[[r, c]] = orig + h;
                let up = if first {
                    loss(&cell, &xp, other)
                } else {
                    loss(&cell, other, &xp)
                };
                xp[[r, c]] = orig - h;
                let down = if first {
                    loss(&cell, &xp, other)
                } else {
                    loss(&cell, other, &xp)
                };
                xp[[r, c]] = orig;
                let fd = (up - down) / (2.0 * h);
                assert!((fd - dx[[r, c]]).abs() <= 1e-6 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn flatten_roundtrip() {
        let mut rng = SeededRng::new(3, 1);
        let cell = GruCell::init(2, 5, &mut rng);
        let mut flat = Vec::new();
        cell.flatten_into(&mut flat);
        assert_eq!(flat.len(), cell.param_count());
        let mut other = GruCell::init(2, 5, &mut rng);
        other.unflatten_from(&mut flat.iter());
        assert_eq!(cell, other);
    }

    #[test]
    fn adam_reduces_quadratic() {
        let mut p = vec![5.0, -3.0];
        let mut opt = Adam::new(0.1, 2);
        for _ in 0..500 {
            let g: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
            opt.update(&mut p, &g);
        }
        assert!(p.iter().all(|x| x.abs() < 1e-2));
    }
}
