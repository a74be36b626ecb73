use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::add_noise;
use crate::actuator::{bang_stop_bang, ActuatorModel, DURATION_RANGE, DWELL_RANGE, TORQUE_RANGE};
use crate::dynamics::{Disturbances, EmmParams, Plant};
use crate::error::{Error, Result};
use crate::ode::sample_count;
use crate::seed::{derive_seed, rng};
use rand::Rng;

/// Training cadence, Hz.
pub const SAMPLE_RATE_HZ: f64 = 10.0;

/// Evenly spaced grid values between `lo` and `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridAxis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.n {
            0 => Vec::new(),
            1 => vec![0.5 * (self.lo + self.hi)],
            n => (0..n)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.n == 0 || !(self.lo > 0.0 && self.hi >= self.lo && self.hi.is_finite()) {
            return Err(Error::config(format!("grid axis {name} invalid: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub torque: GridAxis,
    pub duration: GridAxis,
    pub dwell: GridAxis,
    pub runs_per_cell: usize,
    /// Relative uniform jitter on the cell parameters for repeat runs.
    pub jitter: f64,
    /// Quiet time before the first bang, s.
    pub t_start: f64,
    /// Simulated time after the last bang, s.
    pub tail: f64,
    pub sim_dt: f64,
    pub sample_rate: f64,
    pub id_prefix: String,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            torque: GridAxis::new(TORQUE_RANGE.0, TORQUE_RANGE.1, 3),
            duration: GridAxis::new(DURATION_RANGE.0, DURATION_RANGE.1, 3),
            dwell: GridAxis::new(DWELL_RANGE.0, DWELL_RANGE.1, 3),
            runs_per_cell: 1,
            jitter: 0.05,
            t_start: 2.0,
            tail: 20.0,
            sim_dt: 0.01,
            sample_rate: SAMPLE_RATE_HZ,
            id_prefix: "run".into(),
        }
    }
}

impl DatasetConfig {
    /// Grid beyond the nominal ranges, reaching twice the longest duration and dwell.
    pub fn out_of_range() -> Self {
        Self {
            duration: GridAxis::new(1.2 * DURATION_RANGE.1, 2.0 * DURATION_RANGE.1, 3),
            dwell: GridAxis::new(1.25 * DWELL_RANGE.1, 2.0 * DWELL_RANGE.1, 3),
            id_prefix: "ood".into(),
            ..Self::default()
        }
    }

    pub fn cell_count(&self) -> usize {
        self.torque.n * self.duration.n * self.dwell.n
    }

    pub fn validate(&self) -> Result<()> {
        self.torque.validate("torque")?;
        self.duration.validate("duration")?;
        self.dwell.validate("dwell")?;
        if self.runs_per_cell == 0 {
            return Err(Error::config("runs_per_cell must be at least 1"));
        }
        if !(0.0..0.5).contains(&self.jitter) {
            return Err(Error::config("jitter must lie in [0, 0.5)"));
        }
        if !(self.t_start >= 0.0 && self.tail >= 0.0) {
            return Err(Error::config("t_start and tail must be non-negative"));
        }
        self.stride()?;
        Ok(())
    }

    fn stride(&self) -> Result<usize> {
        let ratio = 1.0 / (self.sample_rate * self.sim_dt);
        let stride = ratio.round();
        if !(stride >= 1.0 && (ratio - stride).abs() < 1e-9) {
            return Err(Error::config(format!(
                "sample rate {} Hz is not an integer division of 1/sim_dt",
                self.sample_rate
            )));
        }
        Ok(stride as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMeta {
    pub id: String,
    /// N·m
    pub torque: f64,
    /// s
    pub duration: f64,
    /// s
    pub dwell: f64,
    pub sign: f64,
    pub t_start: f64,
    pub seed: u64,
    /// Noise level applied to the inputs, if any.
    pub snr: Option<f64>,
    /// All profile parameters inside the nominal excitation ranges.
    pub in_range: bool,
}

/// One excitation sampled at the dataset rate.
///
/// `gamma_rw[k]` is the command applied from sample `k` onward, `omega[k]` the
/// body rate at sample `k` (rad/s), `gamma_s[k]` the true slosh torque (N·m).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRun {
    pub meta: RunMeta,
    pub gamma_rw: Vec<f64>,
    pub omega: Vec<f64>,
    pub gamma_s: Vec<f64>,
}

impl DatasetRun {
    pub fn len(&self) -> usize {
        self.gamma_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma_s.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SloshDataset {
    pub sample_rate: f64,
    pub runs: Vec<DatasetRun>,
}

impl SloshDataset {
    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.runs.iter().map(|r| r.meta.id.as_str()).collect()
    }

    pub fn sample_count(&self) -> usize {
        self.runs.iter().map(DatasetRun::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(Error::config("dataset sample rate must be positive"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for r in &self.runs {
            if !seen.insert(r.meta.id.as_str()) {
                return Err(Error::config(format!("duplicate run id {}", r.meta.id)));
            }
            if r.gamma_rw.len() != r.len() || r.omega.len() != r.len() {
                return Err(Error::config(format!("run {} has ragged series", r.meta.id)));
            }
            if r.gamma_s.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("run {} has non-finite targets", r.meta.id)));
            }
        }
        Ok(())
    }

    /// Copy with white noise at `snr` added to both input series of every run.
    pub fn with_noise(&self, snr: f64, seed: u64) -> Result<Self> {
        let runs = self
            .runs
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let s = derive_seed(seed, i as u64);
                Ok(DatasetRun {
                    meta: RunMeta { snr: Some(snr), ..r.meta.clone() },
                    gamma_rw: add_noise(&r.gamma_rw, snr, derive_seed(s, 0))?,
                    omega: add_noise(&r.omega, snr, derive_seed(s, 1))?,
                    gamma_s: r.gamma_s.clone(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { sample_rate: self.sample_rate, runs })
    }

    /// Splits by run into (kept, held out); `fraction` of runs go to the second part.
    pub fn split(&self, fraction: f64, seed: u64) -> (Self, Self) {
        let mut idx: Vec<usize> = (0..self.runs.len()).collect();
        let mut r = rng(seed);
        for i in (1..idx.len()).rev() {
            idx.swap(i, r.random_range(0..=i));
        }
        let n_out = ((self.runs.len() as f64) * fraction).round() as usize;
        let n_out = n_out.min(self.runs.len());
        let (out, keep) = idx.split_at(n_out);
        let pick = |ix: &[usize]| {
            let mut ix = ix.to_vec();
            ix.sort_unstable();
            Self {
                sample_rate: self.sample_rate,
                runs: ix.into_iter().map(|i| self.runs[i].clone()).collect(),
            }
        };
        (pick(keep), pick(out))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "run_id,t,gamma_rw,omega,gamma_s")?;
        for r in &self.runs {
            for k in 0..r.len() {
                writeln!(
                    w,
                    "{},{:.4},{:.8e},{:.8e},{:.8e}",
                    r.meta.id,
                    k as f64 / self.sample_rate,
                    r.gamma_rw[k],
                    r.omega[k],
                    r.gamma_s[k]
                )?;
            }
        }
        Ok(())
    }
}

struct CellSpec {
    index: usize,
    torque: f64,
    duration: f64,
    dwell: f64,
    repeat: usize,
}

fn simulate_run(
    cell: &CellSpec,
    cfg: &DatasetConfig,
    params: &EmmParams<f64>,
    actuator: ActuatorModel,
    seed: u64,
) -> Result<DatasetRun> {
    let run_seed = derive_seed(seed, cell.index as u64);
    let (mut torque, mut duration, mut dwell) = (cell.torque, cell.duration, cell.dwell);
    if cell.repeat > 0 && cfg.jitter > 0.0 {
        let mut r = rng(run_seed);
        let mut jit = |v: f64| v * (1.0 + r.random_range(-cfg.jitter..=cfg.jitter));
        torque = jit(torque);
        duration = jit(duration);
        dwell = jit(dwell);
    }
    let sign = if cell.index.is_multiple_of(2) { 1.0 } else { -1.0 };
    let profile = bang_stop_bang(torque, duration, dwell, cfg.t_start, sign)?;
    let stride = cfg.stride()?;
    let t_end = profile.end_time() + cfg.tail;
    let n = sample_count(t_end, cfg.sim_dt);
    let mut plant = Plant::new(*params, Disturbances::none(), actuator, cfg.sim_dt)?;
    let cap = n / stride + 1;
    let (mut gamma_rw, mut omega, mut gamma_s) =
        (Vec::with_capacity(cap), Vec::with_capacity(cap), Vec::with_capacity(cap));
    let half = 0.5 * cfg.sim_dt;
    for k in 0..n {
        let u = profile.torque_at(plant.t() + half);
        if k % stride == 0 {
            let s = plant.state();
            gamma_rw.push(u);
            omega.push(s.omega);
            gamma_s.push(s.gamma_s);
        }
        plant.step(u, false)?;
    }
    Ok(DatasetRun {
        meta: RunMeta {
            id: format!("{}-{:03}", cfg.id_prefix, cell.index),
            torque,
            duration,
            dwell,
            sign,
            t_start: cfg.t_start,
            seed: run_seed,
            snr: None,
            in_range: !profile.has_warnings(),
        },
        gamma_rw,
        omega,
        gamma_s,
    })
}

/// Open-loop excitations over the torque × duration × dwell grid.
///
/// Runs alternate sign so the data is symmetric. Repeats within a cell jitter
/// the cell parameters. Cells are simulated in parallel; output order and
/// content depend only on the configuration and seed.
pub fn generate_dataset(
    cfg: &DatasetConfig,
    params: &EmmParams<f64>,
    actuator: ActuatorModel,
    seed: u64,
) -> Result<SloshDataset> {
    cfg.validate()?;
    params.validate()?;
    let mut cells = Vec::with_capacity(cfg.cell_count() * cfg.runs_per_cell);
    for &torque in &cfg.torque.values() {
        for &duration in &cfg.duration.values() {
            for &dwell in &cfg.dwell.values() {
                for repeat in 0..cfg.runs_per_cell {
                    cells.push(CellSpec { index: cells.len(), torque, duration, dwell, repeat });
                }
            }
        }
    }
    let runs = cells
        .par_iter()
        .map(|c| simulate_run(c, cfg, params, actuator, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(SloshDataset { sample_rate: cfg.sample_rate, runs })
}
