use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::{DatasetRun, SloshDataset};
use super::nrmse;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng};

pub const MODEL_VERSION: u32 = 1;

/// Z-score scaling fixed at training time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalizer {
    pub mean: f64,
    pub std: f64,
}

impl Normalizer {
    pub fn identity() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }

    /// Fitted to `data`; a flat series gets unit scale.
    pub fn fit<'a>(data: impl Iterator<Item = &'a [f64]> + Clone) -> Self {
        let (mut n, mut sum) = (0usize, 0.0);
        for s in data.clone() {
            n += s.len();
            sum += s.iter().sum::<f64>();
        }
        if n == 0 {
            return Self::identity();
        }
        let mean = sum / n as f64;
        let var = data.flat_map(|s| s.iter()).map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        Self {
            mean,
            std: if std > 1e-300 && std.is_finite() { std } else { 1.0 },
        }
    }

    #[inline]
    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    #[inline]
    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NarxHyper {
    /// Output feedback taps; 0 gives a plain feedforward network.
    pub n_a: usize,
    /// Exogenous taps on Ω and on the wheel command.
    pub n_b: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// Fraction of runs held out for model selection.
    pub validation_split: f64,
    /// Std of noise added to the normalized feedback taps during training.
    /// Keeps the network from leaning on its own past outputs alone.
    pub feedback_noise: f64,
}

impl Default for NarxHyper {
    fn default() -> Self {
        Self {
            n_a: 10,
            n_b: 10,
            hidden: 16,
            epochs: 500,
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 64,
            validation_split: 0.2,
            feedback_noise: 0.1,
        }
    }
}

impl NarxHyper {
    /// Same settings without output feedback.
    pub fn feedforward(self) -> Self {
        Self { n_a: 0, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_b == 0 || self.hidden == 0 {
            return Err(Error::config("n_b and hidden must be at least 1"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && (0.0..1.0).contains(&self.momentum)) {
            return Err(Error::config("learning rate must be positive and momentum in [0, 1)"));
        }
        if !(self.feedback_noise >= 0.0) {
            return Err(Error::config("feedback_noise must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.validation_split) {
            return Err(Error::config("validation_split must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Whether past outputs come from the model itself or from supplied targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackMode {
    /// Own past predictions; what runs on board.
    Open,
    /// Past true targets; evaluation only.
    Closed,
}

/// History ending at the prediction instant `k`, oldest first.
///
/// `outputs` and `gamma_rw` hold samples up to `k-1`; `omega` up to `k`.
#[derive(Debug, Clone, Copy)]
pub struct PredictWindow<'a> {
    pub outputs: &'a [f64],
    pub omega: &'a [f64],
    pub gamma_rw: &'a [f64],
}

/// One-hidden-layer tanh network over tapped delay lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NarxModel {
    pub version: u32,
    pub name: String,
    pub n_a: usize,
    pub n_b: usize,
    pub hidden: usize,
    pub norm_output: Normalizer,
    pub norm_omega: Normalizer,
    pub norm_gamma_rw: Normalizer,
    /// hidden × inputs, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    /// Sampling rate the taps are spaced at, Hz.
    pub sample_rate: f64,
    pub training_ids: Vec<String>,
}

impl NarxModel {
    fn new(hyper: &NarxHyper, sample_rate: f64, seed: u64) -> Self {
        let inputs = hyper.n_a + 2 * hyper.n_b;
        let mut r = rng(seed);
        let l1 = (6.0 / (inputs + hyper.hidden) as f64).sqrt();
        let l2 = (6.0 / (hyper.hidden + 1) as f64).sqrt();
        Self {
            version: MODEL_VERSION,
            name: if hyper.n_a == 0 { "ann" } else { "narx" }.into(),
            n_a: hyper.n_a,
            n_b: hyper.n_b,
            hidden: hyper.hidden,
            norm_output: Normalizer::identity(),
            norm_omega: Normalizer::identity(),
            norm_gamma_rw: Normalizer::identity(),
            w1: (0..inputs * hyper.hidden).map(|_| r.random_range(-l1..l1)).collect(),
            b1: vec![0.0; hyper.hidden],
            w2: (0..hyper.hidden).map(|_| r.random_range(-l2..l2)).collect(),
            b2: 0.0,
            sample_rate,
            training_ids: Vec::new(),
        }
    }

    pub fn inputs(&self) -> usize {
        self.n_a + 2 * self.n_b
    }

    /// Samples of history needed before the first prediction.
    pub fn lag(&self) -> usize {
        self.n_a.max(self.n_b)
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (a, rest) = p.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, d) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2 = d[0];
    }

    /// Normalized output for a normalized feature vector.
    fn forward(&self, x: &[f64], h: &mut [f64]) -> f64 {
        let n = x.len();
        let mut out = self.b2;
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &self.w1[j * n..(j + 1) * n];
            let a = self.b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            *hj = a.tanh();
            out += self.w2[j] * *hj;
        }
        out
    }

    fn features_into(&self, w: &PredictWindow<'_>, x: &mut Vec<f64>) {
        x.clear();
        let (no, nw, nu) = (w.outputs.len(), w.omega.len(), w.gamma_rw.len());
        for i in 1..=self.n_a {
            x.push(self.norm_output.normalize(w.outputs[no - i]));
        }
        for i in 0..self.n_b {
            x.push(self.norm_omega.normalize(w.omega[nw - 1 - i]));
        }
        for i in 1..=self.n_b {
            x.push(self.norm_gamma_rw.normalize(w.gamma_rw[nu - i]));
        }
    }

    /// Slosh-torque prediction, N·m. Returns 0 until enough history exists.
    pub fn predict(&self, w: &PredictWindow<'_>) -> f64 {
        if w.outputs.len() < self.n_a || w.omega.len() < self.n_b || w.gamma_rw.len() < self.n_b {
            return 0.0;
        }
        let mut x = Vec::with_capacity(self.inputs());
        let mut h = vec![0.0; self.hidden];
        self.features_into(w, &mut x);
        self.norm_output.denormalize(self.forward(&x, &mut h))
    }

    /// Predictions over a whole run. `Closed` mode needs `targets`.
    pub fn predict_series(
        &self,
        omega: &[f64],
        gamma_rw: &[f64],
        targets: Option<&[f64]>,
        mode: FeedbackMode,
    ) -> Result<Vec<f64>> {
        let n = omega.len();
        if gamma_rw.len() != n {
            return Err(Error::config("input series lengths differ"));
        }
        let targets = match (mode, targets) {
            (FeedbackMode::Closed, Some(t)) if t.len() == n => Some(t),
            (FeedbackMode::Closed, _) => {
                return Err(Error::config("closed mode needs a target series of equal length"))
            }
            (FeedbackMode::Open, _) => None,
        };
        let lag = self.lag();
        let mut out = vec![0.0; n];
        let mut x = Vec::with_capacity(self.inputs());
        let mut h = vec![0.0; self.hidden];
        for k in lag..n {
            let outputs = match targets {
                Some(t) => &t[..k],
                None => &out[..k],
            };
            let w = PredictWindow { outputs, omega: &omega[..=k], gamma_rw: &gamma_rw[..k] };
            self.features_into(&w, &mut x);
            out[k] = self.norm_output.denormalize(self.forward(&x, &mut h));
        }
        Ok(out)
    }

    pub fn predict_run(&self, run: &DatasetRun, mode: FeedbackMode) -> Result<Vec<f64>> {
        self.predict_series(&run.omega, &run.gamma_rw, Some(&run.gamma_s), mode)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let found = v.get("version").and_then(serde_json::Value::as_u64);
        if found != Some(u64::from(MODEL_VERSION)) {
            return Err(Error::ModelVersion {
                expected: MODEL_VERSION,
                found: found.map_or(0, |f| f as u32),
            });
        }
        let m: Self = serde_json::from_value(v)?;
        m.check_shape()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn check_shape(&self) -> Result<()> {
        if self.w1.len() != self.hidden * self.inputs()
            || self.b1.len() != self.hidden
            || self.w2.len() != self.hidden
            || self.n_b == 0
        {
            return Err(Error::config("model weight dimensions inconsistent"));
        }
        Ok(())
    }
}

/// Teacher-forced design matrix for training.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: usize,
    /// Row-major feature rows, normalized.
    pub x: Vec<f64>,
    /// Normalized targets.
    pub y: Vec<f64>,
}

impl Batch {
    pub fn rows(&self) -> usize {
        self.y.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.inputs..(i + 1) * self.inputs]
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut x = Vec::with_capacity(idx.len() * self.inputs);
        for &i in idx {
            x.extend_from_slice(self.row(i));
        }
        Self { inputs: self.inputs, x, y: idx.iter().map(|&i| self.y[i]).collect() }
    }
}

impl NarxModel {
    /// Series-parallel rows: past outputs are the true targets.
    pub fn design(&self, runs: &[DatasetRun]) -> Batch {
        let mut b = Batch { inputs: self.inputs(), x: Vec::new(), y: Vec::new() };
        let mut row = Vec::with_capacity(self.inputs());
        for r in runs {
            for k in self.lag()..r.len() {
                let w = PredictWindow {
                    outputs: &r.gamma_s[..k],
                    omega: &r.omega[..=k],
                    gamma_rw: &r.gamma_rw[..k],
                };
                self.features_into(&w, &mut row);
                b.x.extend_from_slice(&row);
                b.y.push(self.norm_output.normalize(r.gamma_s[k]));
            }
        }
        b
    }

    /// Half mean squared error in normalized units and its gradient, laid out as [`params`](Self::params).
    pub fn loss_and_grad(&self, batch: &Batch) -> (f64, Vec<f64>) {
        let n_in = batch.inputs;
        let mut g = vec![0.0; self.param_count()];
        let (gw1, rest) = g.split_at_mut(self.w1.len());
        let (gb1, rest) = rest.split_at_mut(self.b1.len());
        let (gw2, gb2) = rest.split_at_mut(self.w2.len());
        let mut h = vec![0.0; self.hidden];
        let m = batch.rows().max(1) as f64;
        let mut loss = 0.0;
        for i in 0..batch.rows() {
            let x = batch.row(i);
            let e = self.forward(x, &mut h) - batch.y[i];
            loss += 0.5 * e * e;
            let d = e / m;
            gb2[0] += d;
            for j in 0..self.hidden {
                gw2[j] += d * h[j];
                let da = d * self.w2[j] * (1.0 - h[j] * h[j]);
                gb1[j] += da;
                let row = &mut gw1[j * n_in..(j + 1) * n_in];
                for (gw, v) in row.iter_mut().zip(x) {
                    *gw += da * v;
                }
            }
        }
        (loss / m, g)
    }

    pub fn loss(&self, batch: &Batch) -> f64 {
        let mut h = vec![0.0; self.hidden];
        let m = batch.rows().max(1) as f64;
        (0..batch.rows())
            .map(|i| {
                let e = self.forward(batch.row(i), &mut h) - batch.y[i];
                0.5 * e * e
            })
            .sum::<f64>()
            / m
    }

    fn teacher_forced_nrmse(&self, runs: &[DatasetRun]) -> f64 {
        let mut pred = Vec::new();
        let mut target = Vec::new();
        for r in runs {
            if let Ok(p) = self.predict_run(r, FeedbackMode::Closed) {
                pred.extend_from_slice(&p[self.lag().min(p.len())..]);
                target.extend_from_slice(&r.gamma_s[self.lag().min(r.len())..]);
            }
        }
        nrmse(&pred, &target).value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_nrmse: f64,
    pub val_nrmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose weights were kept, 1-based.
    pub best_epoch: usize,
    /// Targets are (numerically) constant, so NRMSE is undefined.
    pub constant_target: bool,
    pub train_ids: Vec<String>,
    pub validation_ids: Vec<String>,
}

impl TrainingReport {
    pub fn best(&self) -> &EpochStats {
        &self.epochs[self.best_epoch - 1]
    }
}

/// Trains by mini-batch gradient descent with momentum on teacher-forced rows.
///
/// Whole runs are held out for validation; the weights from the epoch with the
/// lowest validation NRMSE are returned.
pub fn train_narx(
    dataset: &SloshDataset,
    hyper: &NarxHyper,
    seed: u64,
) -> Result<(NarxModel, TrainingReport)> {
    hyper.validate()?;
    dataset.validate()?;
    if dataset.is_empty() {
        return Err(Error::config("training dataset is empty"));
    }
    let (train, val) = if dataset.len() >= 2 && hyper.validation_split > 0.0 {
        let (t, v) = dataset.split(hyper.validation_split, derive_seed(seed, 1));
        if v.is_empty() { dataset.split(1.0 / dataset.len() as f64, derive_seed(seed, 1)) } else { (t, v) }
    } else {
        (dataset.clone(), dataset.clone())
    };

    let mut model = NarxModel::new(hyper, dataset.sample_rate, derive_seed(seed, 0));
    model.norm_output = Normalizer::fit(train.runs.iter().map(|r| r.gamma_s.as_slice()));
    model.norm_omega = Normalizer::fit(train.runs.iter().map(|r| r.omega.as_slice()));
    model.norm_gamma_rw = Normalizer::fit(train.runs.iter().map(|r| r.gamma_rw.as_slice()));
    model.training_ids = dataset.runs.iter().map(|r| r.meta.id.clone()).collect();

    let target_range = {
        let all = dataset.runs.iter().flat_map(|r| r.gamma_s.iter().copied());
        let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        hi - lo
    };
    let constant_target = !(target_range >= super::DEGENERATE_RANGE);

    let design = model.design(&train.runs);
    if design.rows() == 0 {
        return Err(Error::config("runs are shorter than the tap length"));
    }
    let mut order: Vec<usize> = (0..design.rows()).collect();
    let mut r = rng(derive_seed(seed, 2));
    let mut velocity = vec![0.0; model.param_count()];
    let mut params = model.params();
    let mut best = (f64::INFINITY, 0usize, params.clone());
    let mut epochs = Vec::with_capacity(hyper.epochs);

    for epoch in 1..=hyper.epochs {
        for i in (1..order.len()).rev() {
            order.swap(i, r.random_range(0..=i));
        }
        for chunk in order.chunks(hyper.batch_size) {
            let mut batch = design.subset(chunk);
            if hyper.feedback_noise > 0.0 && model.n_a > 0 {
                for row in batch.x.chunks_mut(batch.inputs) {
                    for v in &mut row[..model.n_a] {
                        *v += hyper.feedback_noise * r.sample::<f64, _>(StandardNormal);
                    }
                }
            }
            let (loss, g) = model.loss_and_grad(&batch);
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            for ((p, v), gi) in params.iter_mut().zip(&mut velocity).zip(&g) {
                *v = hyper.momentum * *v - hyper.learning_rate * gi;
                *p += *v;
            }
            model.set_params(&params);
        }
        let train_nrmse = model.teacher_forced_nrmse(&train.runs);
        let val_nrmse = model.teacher_forced_nrmse(&val.runs);
        if !(train_nrmse.is_finite() && val_nrmse.is_finite()) {
            return Err(Error::TrainingDiverged { epoch });
        }
        if val_nrmse < best.0 {
            best = (val_nrmse, epoch, params.clone());
        }
        epochs.push(EpochStats { epoch, train_nrmse, val_nrmse });
    }
    model.set_params(&best.2);
    let report = TrainingReport {
        epochs,
        best_epoch: best.1.max(1),
        constant_target,
        train_ids: train.runs.iter().map(|r| r.meta.id.clone()).collect(),
        validation_ids: val.runs.iter().map(|r| r.meta.id.clone()).collect(),
    };
    Ok((model, report))
}
