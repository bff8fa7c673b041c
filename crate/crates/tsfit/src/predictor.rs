//! The black-box model: a single-layer gated recurrent classifier emitting a
//! Bernoulli probability after every prefix, trained with full
//! backpropagation through time, plus exact input gradients for the
//! gradient-based explainers.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::nn::{sigmoid, Adam, GruCell, GruGrads, GruStep};
use crate::prob::{PredictiveDistribution, SeededRng};
use crate::simdata::TimeSeriesDataset;

/// Anything that consumes a multivariate series step by step and exposes a
/// positive-class probability after each prefix. Implemented by the trained
/// recurrent classifier and by closed-form models in tests.
pub trait SequenceModel: Sync {
    type State: Clone + Send + Sync;

    fn init_state(&self) -> Self::State;

    fn step(&self, state: &Self::State, x_t: ArrayView1<f64>) -> Self::State;

    /// P(y=1 | consumed prefix), before any probability clamp.
    fn prob(&self, state: &Self::State) -> f64;

    /// Probabilities after advancing the shared `state` by each candidate
    /// observation row separately.
    fn step_probs(&self, state: &Self::State, x_cands: ArrayView2<f64>) -> Vec<f64> {
        (0..x_cands.nrows())
            .map(|b| self.prob(&self.step(state, x_cands.row(b))))
            .collect()
    }

    /// Final-step probabilities after advancing `state` by each candidate row
    /// and then by the shared original suffix.
    fn rollout_probs(
        &self,
        state: &Self::State,
        x_cands: ArrayView2<f64>,
        suffix: ArrayView2<f64>,
    ) -> Vec<f64> {
        (0..x_cands.nrows())
            .map(|b| {
                let mut st = self.step(state, x_cands.row(b));
                for s in 0..suffix.ncols() {
                    st = self.step(&st, suffix.column(s));
                }
                self.prob(&st)
            })
            .collect()
    }

    /// States after consuming each prefix `x[:, 0..=t]`, with the matching
    /// per-prefix probabilities.
    fn run_states(&self, x: ArrayView2<f64>) -> (Vec<Self::State>, Vec<f64>) {
        let t_len = x.ncols();
        let mut states = Vec::with_capacity(t_len);
        let mut probs = Vec::with_capacity(t_len);
        let mut st = self.init_state();
        for t in 0..t_len {
            st = self.step(&st, x.column(t));
            probs.push(self.prob(&st));
            states.push(st.clone());
        }
        (states, probs)
    }

    /// Predictive distribution after the whole prefix; the t-th output of a
    /// full forward pass equals `predict_prefix(x[:, ..=t])`.
    fn predict_prefix(&self, x_prefix: ArrayView2<f64>) -> Result<PredictiveDistribution> {
        if x_prefix.ncols() == 0 {
            return Err(Error::EmptyPrefix);
        }
        let mut st = self.init_state();
        for t in 0..x_prefix.ncols() {
            st = self.step(&st, x_prefix.column(t));
        }
        Ok(PredictiveDistribution::bernoulli(self.prob(&st)))
    }
}

// ---------------------------------------------------------------------------
// GRU classifier
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct GruClassifier {
    pub cell: GruCell,
    pub head_w: Array1<f64>,
    pub head_b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorHyper {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub val_fraction: f64,
}

impl Default for PredictorHyper {
    fn default() -> Self {
        Self {
            hidden: 64,
            lr: 1e-3,
            epochs: 80,
            batch: 100,
            val_fraction: 0.2,
        }
    }
}

/// Per-epoch curves recorded during training.
#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_auroc: Vec<f64>,
}

impl GruClassifier {
    pub fn init(input_dim: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let cell = GruCell::init(input_dim, hidden, rng);
        let k = 1.0 / (hidden as f64).sqrt();
        let head_w = crate::nn::uniform_vector(rng, hidden, k);
        let head_b = rand::Rng::gen_range(rng, -k..k);
        Self {
            cell,
            head_w,
            head_b,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.cell.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.cell.hidden_dim()
    }

    fn logits(&self, h: &Array2<f64>) -> Array1<f64> {
        let mut out = h.dot(&self.head_w);
        out += self.head_b;
        out
    }

    /// Checkpoint/optimizer order: GRU cell parameters, then head weights,
    /// then head bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.cell.flatten_into(&mut out);
        out.extend(self.head_w.iter());
        out.push(self.head_b);
        out
    }

    pub fn unflatten(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "parameter count mismatch");
        let mut cursor = flat.iter();
        self.cell.unflatten_from(&mut cursor);
        for v in self.head_w.iter_mut() {
            *v = *cursor.next().unwrap();
        }
        self.head_b = *cursor.next().unwrap();
    }

    pub fn param_count(&self) -> usize {
        self.cell.param_count() + self.hidden_dim() + 1
    }

    /// Gradient of the final-step probability (pre-clamp) w.r.t. every input
    /// cell, by reverse accumulation through the unrolled recurrence.
    /// `target_class` 1 differentiates P(y=1); 0 flips the sign.
    pub fn input_gradients(&self, x: ArrayView2<f64>, target_class: usize) -> Array2<f64> {
        let grads = self.batch_input_gradients(&[x]);
        let mut g = grads.into_iter().next().unwrap();
        if target_class == 0 {
            g.mapv_inplace(|v| -v);
        }
        g
    }

    /// Final-step probability gradients for several same-length inputs at
    /// once (the integrated-gradients path batch).
    pub fn batch_input_gradients(&self, xs: &[ArrayView2<f64>]) -> Vec<Array2<f64>> {
        let b = xs.len();
        assert!(b > 0);
        let d = self.input_dim();
        let t_len = xs[0].ncols();
        assert!(xs.iter().all(|x| x.ncols() == t_len && x.nrows() == d));

        let mut steps: Vec<GruStep> = Vec::with_capacity(t_len);
        let mut h = Array2::<f64>::zeros((b, self.hidden_dim()));
        for t in 0..t_len {
            let mut xt = Array2::<f64>::zeros((b, d));
            for (i, x) in xs.iter().enumerate() {
                for f in 0..d {
                    xt[[i, f]] = x[[f, t]];
                }
            }
            let step = self.cell.forward_step(xt.view(), h.view());
            h = step.h.clone();
            steps.push(step);
        }

        // d(prob)/d(logit) = p(1-p) at the final step only.
        let probs = self.logits(&h).mapv(sigmoid);
        let mut d_h = Array2::<f64>::zeros((b, self.hidden_dim()));
        for i in 0..b {
            let dp = probs[i] * (1.0 - probs[i]);
            for j in 0..self.hidden_dim() {
                d_h[[i, j]] = dp * self.head_w[j];
            }
        }

        let mut grads = GruGrads::zeros(d, self.hidden_dim());
        let mut out = vec![Array2::<f64>::zeros((d, t_len)); b];
        for t in (0..t_len).rev() {
            let (d_h_prev, d_x) = self.cell.backward_step(&steps[t], &d_h, &mut grads);
            for (i, g) in out.iter_mut().enumerate() {
                for f in 0..d {
                    g[[f, t]] = d_x[[i, f]];
                }
            }
            d_h = d_h_prev;
        }
        out
    }
}

impl SequenceModel for GruClassifier {
    type State = Array1<f64>;

    fn init_state(&self) -> Array1<f64> {
        Array1::zeros(self.hidden_dim())
    }

    fn step(&self, state: &Array1<f64>, x_t: ArrayView1<f64>) -> Array1<f64> {
        let x = x_t.insert_axis(Axis(0));
        let h = state.view().insert_axis(Axis(0));
        self.cell.infer_step(x, h).index_axis_move(Axis(0), 0)
    }

    fn prob(&self, state: &Array1<f64>) -> f64 {
        sigmoid(state.dot(&self.head_w) + self.head_b)
    }

    fn step_probs(&self, state: &Array1<f64>, x_cands: ArrayView2<f64>) -> Vec<f64> {
        let b = x_cands.nrows();
        let h_prev = broadcast_rows(state.view(), b);
        let h = self.cell.infer_step(x_cands, h_prev.view());
        self.logits(&h).mapv(sigmoid).to_vec()
    }

    fn rollout_probs(
        &self,
        state: &Array1<f64>,
        x_cands: ArrayView2<f64>,
        suffix: ArrayView2<f64>,
    ) -> Vec<f64> {
        let b = x_cands.nrows();
        let h_prev = broadcast_rows(state.view(), b);
        let mut h = self.cell.infer_step(x_cands, h_prev.view());
        for s in 0..suffix.ncols() {
            let xs = broadcast_rows(suffix.column(s), b);
            h = self.cell.infer_step(xs.view(), h.view());
        }
        self.logits(&h).mapv(sigmoid).to_vec()
    }
}

fn broadcast_rows(v: ArrayView1<f64>, b: usize) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((b, v.len()));
    for mut row in out.axis_iter_mut(Axis(0)) {
        row.assign(&v);
    }
    out
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Train on per-timestep binary cross-entropy with Adam. Deterministic for a
/// given rng; fails with [`Error::Diverged`] if the loss leaves the finite
/// range.
pub fn train_predictor(
    ds: &TimeSeriesDataset,
    hyper: &PredictorHyper,
    rng: &SeededRng,
) -> Result<(GruClassifier, TrainReport)> {
    assert!(!ds.is_empty(), "cannot train on an empty dataset");
    let mut init_rng = rng.derive(&[0xA11]);
    let mut model = GruClassifier::init(ds.d, hyper.hidden, &mut init_rng);

    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut rng.derive(&[0x5917]));
    let n_val = ((ds.len() as f64) * hyper.val_fraction).round() as usize;
    let (val_idx, train_idx) = order.split_at(n_val.min(ds.len().saturating_sub(1)));

    let mut opt = Adam::new(hyper.lr, model.param_count());
    let mut report = TrainReport::default();

    for epoch in 0..hyper.epochs {
        let mut epoch_order = train_idx.to_vec();
        epoch_order.shuffle(&mut rng.derive(&[0xEC0, epoch as u64]));

        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for chunk in epoch_order.chunks(hyper.batch) {
            let (loss, grads) = batch_pass(&model, ds, chunk)?;
            loss_sum += loss * (chunk.len() * ds.t_max) as f64;
            loss_count += chunk.len() * ds.t_max;
            let mut flat = model.flatten();
            opt.update(&mut flat, &grads);
            model.unflatten(&flat);
        }
        let train_loss = loss_sum / loss_count as f64;
        if !train_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        report.train_loss.push(train_loss);

        let (val_loss, val_auroc) = evaluate_split(&model, ds, val_idx);
        report.val_loss.push(val_loss);
        report.val_auroc.push(val_auroc);
    }
    Ok((model, report))
}

/// Forward/backward over one batch; returns (mean loss, flat gradients).
fn batch_pass(
    model: &GruClassifier,
    ds: &TimeSeriesDataset,
    idx: &[usize],
) -> Result<(f64, Vec<f64>)> {
    let b = idx.len();
    let d = ds.d;
    let t_len = ds.t_max;
    let hd = model.hidden_dim();
    let norm = 1.0 / (b * t_len) as f64;

    let mut steps: Vec<GruStep> = Vec::with_capacity(t_len);
    let mut h = Array2::<f64>::zeros((b, hd));
    let mut d_logits: Vec<Array1<f64>> = Vec::with_capacity(t_len);
    let mut loss = 0.0;
    for t in 0..t_len {
        let mut xt = Array2::<f64>::zeros((b, d));
        for (i, &s) in idx.iter().enumerate() {
            for f in 0..d {
                xt[[i, f]] = ds.samples[s].x[[f, t]];
            }
        }
        let step = model.cell.forward_step(xt.view(), h.view());
        h = step.h.clone();
        steps.push(step);

        let logits = model.logits(&h);
        let mut dl = Array1::<f64>::zeros(b);
        for (i, &s) in idx.iter().enumerate() {
            let y = f64::from(ds.samples[s].y[t]);
            let p = sigmoid(logits[i]);
            loss -= norm * (y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            dl[i] = norm * (p - y);
        }
        d_logits.push(dl);
    }

    let mut grads = GruGrads::zeros(d, hd);
    let mut g_head_w = Array1::<f64>::zeros(hd);
    let mut g_head_b = 0.0;
    let mut d_h = Array2::<f64>::zeros((b, hd));
    for t in (0..t_len).rev() {
        let dl = &d_logits[t];
        g_head_b += dl.sum();
        for i in 0..b {
            for j in 0..hd {
                d_h[[i, j]] += dl[i] * model.head_w[j];
            }
        }
        g_head_w += &steps[t].h.t().dot(dl);
        let (d_h_prev, _) = model.cell.backward_step(&steps[t], &d_h, &mut grads);
        d_h = d_h_prev;
    }

    let mut flat = Vec::with_capacity(model.param_count());
    grads.flatten_into(&mut flat);
    flat.extend(g_head_w.iter());
    flat.push(g_head_b);
    Ok((loss, flat))
}

/// Mean per-timestep BCE and flattened AUROC on a sample subset.
fn evaluate_split(model: &GruClassifier, ds: &TimeSeriesDataset, idx: &[usize]) -> (f64, f64) {
    if idx.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut scores = Vec::with_capacity(idx.len() * ds.t_max);
    let mut labels = Vec::with_capacity(idx.len() * ds.t_max);
    let mut loss = 0.0;
    for &s in idx {
        let (_, probs) = model.run_states(ds.samples[s].x.view());
        for (t, &p) in probs.iter().enumerate() {
            let y = f64::from(ds.samples[s].y[t]);
            let pc = p.clamp(crate::prob::PROB_EPS, 1.0 - crate::prob::PROB_EPS);
            loss -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
            scores.push(p);
            labels.push(ds.samples[s].y[t]);
        }
    }
    let loss = loss / scores.len() as f64;
    let auroc = crate::eval::auroc(&scores, &labels).unwrap_or(f64::NAN);
    (loss, auroc)
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

pub const CHECKPOINT_MAGIC: &str = "tsfit.checkpoint";

pub fn save_predictor(model: &GruClassifier, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "{CHECKPOINT_MAGIC} version=1 kind=predictor d={} h={}",
        model.input_dim(),
        model.hidden_dim()
    )?;
    for v in model.flatten() {
        writeln!(w, "{v:.16e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_predictor(path: &Path) -> Result<GruClassifier> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines.next().transpose()?.ok_or(Error::Format {
        line: 1,
        field: "header".into(),
        reason: "empty checkpoint".into(),
    })?;
    let (d, h) = parse_checkpoint_header(&header, "predictor")?;
    let mut model = GruClassifier::init(d, h, &mut SeededRng::new(0, 0));
    let flat = read_flat_params(lines, model.param_count())?;
    model.unflatten(&flat);
    Ok(model)
}

pub(crate) fn parse_checkpoint_header(header: &str, expect_kind: &str) -> Result<(usize, usize)> {
    let toks: Vec<&str> = header.split_whitespace().collect();
    let bad = |reason: String| Error::Format {
        line: 1,
        field: "header".into(),
        reason,
    };
    if toks.first() != Some(&CHECKPOINT_MAGIC) {
        return Err(bad("not a checkpoint file".into()));
    }
    if toks.get(1) != Some(&"version=1") {
        return Err(bad("unsupported version".into()));
    }
    let kind = toks
        .get(2)
        .and_then(|t| t.strip_prefix("kind="))
        .ok_or_else(|| bad("missing kind".into()))?;
    if kind != expect_kind {
        return Err(bad(format!("expected kind={expect_kind}, found {kind}")));
    }
    let d = toks
        .get(3)
        .and_then(|t| t.strip_prefix("d="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("missing d".into()))?;
    let h = toks
        .get(4)
        .and_then(|t| t.strip_prefix("h="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("missing h".into()))?;
    Ok((d, h))
}

pub(crate) fn read_flat_params(
    lines: std::io::Lines<BufReader<File>>,
    expect: usize,
) -> Result<Vec<f64>> {
    let mut flat = Vec::with_capacity(expect);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: f64 = line.trim().parse().map_err(|_| Error::Format {
            line: i + 2,
            field: format!("param {i}"),
            reason: "unparseable value".into(),
        })?;
        flat.push(v);
    }
    if flat.len() != expect {
        return Err(Error::Format {
            line: flat.len() + 1,
            field: "parameters".into(),
            reason: format!("expected {expect} values, found {}", flat.len()),
        });
    }
    Ok(flat)
}
