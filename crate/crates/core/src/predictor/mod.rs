//! Slosh-torque prediction: excitation datasets, a NARX network trained from
//! scratch, a feedforward baseline, and scoring under input noise.

mod dataset;
mod narx;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use dataset::{
    generate_dataset, DatasetConfig, DatasetRun, GridAxis, RunMeta, SloshDataset, SAMPLE_RATE_HZ,
};
pub use narx::{
    train_narx, Batch, EpochStats, FeedbackMode, NarxHyper, NarxModel, Normalizer, PredictWindow,
    TrainingReport, MODEL_VERSION,
};

use crate::error::{Error, Result};
use crate::scalar::correlation;
use crate::seed::{derive_seed, rng};

/// Target ranges below this make NRMSE meaningless.
pub const DEGENERATE_RANGE: f64 = 1e-12;

/// Noise level reported as the worst case the predictor must tolerate.
pub const REFERENCE_SNR: f64 = 16.5;

/// Adds white noise with standard deviation `rms(series) / snr`.
///
/// A zero-RMS series is returned unchanged.
pub fn add_noise(series: &[f64], snr: f64, seed: u64) -> Result<Vec<f64>> {
    if !(snr > 0.0) {
        return Err(Error::config(format!("snr must be positive, got {snr}")));
    }
    let rms = rms(series);
    if rms == 0.0 || series.is_empty() {
        return Ok(series.to_vec());
    }
    let std = rms / snr;
    let normal = Normal::new(0.0, std).map_err(|e| Error::config(e.to_string()))?;
    let mut r = rng(seed);
    Ok(series.iter().map(|v| v + normal.sample(&mut r)).collect())
}

pub fn rms(series: &[f64]) -> f64 {
    if series.is_empty() {
        return 0.0;
    }
    (series.iter().map(|v| v * v).sum::<f64>() / series.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nrmse {
    /// RMSE over the target range; plain RMSE when `degenerate`.
    pub value: f64,
    pub degenerate: bool,
}

/// Root-mean-square error normalized by the target range.
pub fn nrmse(pred: &[f64], target: &[f64]) -> Nrmse {
    let n = pred.len().min(target.len());
    if n == 0 {
        return Nrmse { value: 0.0, degenerate: true };
    }
    let mse = pred[..n].iter().zip(&target[..n]).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n as f64;
    let (lo, hi) = target[..n]
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    if range < DEGENERATE_RANGE {
        Nrmse { value: mse.sqrt(), degenerate: true }
    } else {
        Nrmse { value: mse.sqrt() / range, degenerate: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub model: String,
    /// `None` is the noise-free case.
    pub snr: Option<f64>,
    pub nrmse: f64,
    pub correlation: f64,
    pub degenerate: bool,
}

/// Open-mode predictions of every model on `testset`, with input noise at each level.
///
/// All models see the same noisy inputs at a given level. Fails if any test run
/// id was used to train any of the models.
pub fn evaluate(
    models: &[&NarxModel],
    testset: &SloshDataset,
    snr_levels: &[Option<f64>],
    seed: u64,
) -> Result<Vec<EvalRow>> {
    testset.validate()?;
    for m in models {
        let trained: BTreeSet<&str> = m.training_ids.iter().map(String::as_str).collect();
        if let Some(id) = testset.ids().into_iter().find(|id| trained.contains(id)) {
            return Err(Error::DatasetOverlap(id.to_string()));
        }
    }
    let mut rows = Vec::with_capacity(models.len() * snr_levels.len());
    for (li, level) in snr_levels.iter().enumerate() {
        let data = match level {
            Some(snr) => testset.with_noise(*snr, derive_seed(seed, li as u64))?,
            None => testset.clone(),
        };
        for m in models {
            let (mut pred, mut target) = (Vec::new(), Vec::new());
            for run in &data.runs {
                pred.extend(m.predict_run(run, FeedbackMode::Open)?);
                target.extend_from_slice(&run.gamma_s);
            }
            let score = nrmse(&pred, &target);
            rows.push(EvalRow {
                model: m.name.clone(),
                snr: *level,
                nrmse: score.value,
                correlation: correlation(&pred, &target),
                degenerate: score.degenerate,
            });
        }
    }
    Ok(rows)
}

pub fn render_eval_table(rows: &[EvalRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<8} {:>8} {:>10} {:>12}", "model", "snr", "nrmse", "correlation");
    for r in rows {
        let snr = r.snr.map_or_else(|| "inf".to_string(), |v| format!("{v:.1}"));
        let flag = if r.degenerate { " (degenerate)" } else { "" };
        let _ = writeln!(
            s,
            "{:<8} {:>8} {:>10.4} {:>12.4}{flag}",
            r.model, snr, r.nrmse, r.correlation
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huge_snr_is_nearly_transparent() {
        let x: Vec<f64> = (0..1000).map(|k| (k as f64 * 0.01).sin()).collect();
        let y = add_noise(&x, 1e12, 4).unwrap();
        let r = rms(&x);
        assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-9 * r));
    }

    #[test]
    fn empirical_snr_matches() {
        let x: Vec<f64> = (0..100_000).map(|k| (k as f64 * 0.003).sin() + 0.2).collect();
        let y = add_noise(&x, 16.5, 11).unwrap();
        let noise: Vec<f64> = x.iter().zip(&y).map(|(a, b)| b - a).collect();
        let snr = rms(&x) / rms(&noise);
        assert!((15.5..=17.5).contains(&snr), "{snr}");
        assert_eq!(y, add_noise(&x, 16.5, 11).unwrap());
        assert_ne!(y, add_noise(&x, 16.5, 12).unwrap());
    }

    #[test]
    fn noise_edge_cases() {
        assert_eq!(add_noise(&[0.0; 5], 2.0, 1).unwrap(), vec![0.0; 5]);
        assert!(add_noise(&[1.0], 0.0, 1).is_err());
        assert!(add_noise(&[1.0], -1.0, 1).is_err());
    }

    #[test]
    fn nrmse_hand_values() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(nrmse(&t, &t).value, 0.0);
        let p = [1.0, 2.0, 3.0, 4.0];
        let s = nrmse(&p, &t);
        assert!((s.value - 1.0 / 3.0).abs() < 1e-15 && !s.degenerate);
        let flat = nrmse(&[0.5; 4], &[0.0; 4]);
        assert!(flat.degenerate);
        assert_eq!(flat.value, 0.5);
    }

    #[test]
    fn normalizer_round_trip() {
        let data = [1.5, -2.0, 3.25, 1e-4];
        let n = Normalizer::fit(std::iter::once(&data[..]));
        for &x in &data {
            assert!((n.denormalize(n.normalize(x)) - x).abs() < 1e-12);
        }
        let flat = Normalizer::fit(std::iter::once(&[2.0, 2.0][..]));
        assert_eq!(flat.std, 1.0);
    }
}
