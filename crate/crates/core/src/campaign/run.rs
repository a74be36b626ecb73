use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_rational::Rational64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{Excitation, ExperimentManifest, ExperimentMode};
use super::{step_mode, ModeEvent, OperatingMode};
use crate::control::{median, predictor_label, run_closed_loop, ClosedLoopConfig, Maneuver, RecordMetrics, SloshPredictor};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::telemetry::{campaign_volume, BudgetConfig, BudgetMode, CampaignVolume};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    pub closed_loop: ClosedLoopConfig,
    pub budget_mode: BudgetMode,
    /// Time spent under the safe-mode controller after a trigger, s.
    pub recovery_time: f64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self { closed_loop: ClosedLoopConfig::default(), budget_mode: BudgetMode::AsPublished, recovery_time: 60.0 }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        self.closed_loop.validate()?;
        if !(self.recovery_time >= 0.0 && self.recovery_time.is_finite()) {
            return Err(Error::config("recovery_time must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentStatus {
    Completed,
    Recovery,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub id: String,
    pub phase: String,
    /// Controller actually flown, after resolving a combined selection.
    pub controller: String,
    pub predictor: String,
    pub excitation: Excitation,
    pub trial: u8,
    pub camera: bool,
    pub mode: ExperimentMode,
    pub minimum_success: bool,
    pub status: ExperimentStatus,
    pub error: Option<String>,
    /// Worst axis; `None` if any axis did not settle.
    pub settling_time_omega: Option<f64>,
    pub settling_time_slosh: Option<f64>,
    /// Offset from the experiment start at which the fluid settled on every axis.
    pub fluid_settled_at: Option<f64>,
    pub peak_gamma_s: f64,
    pub peak_command: f64,
    pub constraint_violations: usize,
    pub governor_inadmissible: usize,
    /// Modes entered, starting from idle.
    pub modes: Vec<OperatingMode>,
    /// Time the experiment occupies the vehicle, s.
    pub duration: f64,
    /// Serialized schedule, s from campaign start.
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSummary {
    pub controller: String,
    pub experiments: usize,
    pub completed: usize,
    pub recoveries: usize,
    pub failures: usize,
    pub median_settling_omega: Option<f64>,
    pub median_settling_slosh: Option<f64>,
    pub max_peak_gamma_s: f64,
    pub constraint_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phase: String,
    pub experiments: usize,
    pub completed: usize,
    pub minimum_success: bool,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub report_version: u32,
    pub experiments: Vec<ExperimentResult>,
    pub controllers: Vec<ControllerSummary>,
    pub phases: Vec<PhaseSummary>,
    /// Every minimum-success experiment completed (false for plans without any).
    pub minimum_success_complete: bool,
    pub recoveries: usize,
    pub failures: usize,
    /// Completed runs whose fluid had not settled when the record ended.
    pub unsettled: usize,
    pub n_camera: u64,
    pub n_no_camera: u64,
    pub data_volume_mb: CampaignVolume<f64>,
    /// Exact rational volumes, camera / no camera / total.
    pub data_volume_exact_mb: [String; 3],
    /// End of the serialized schedule, s.
    pub schedule_end: f64,
}

struct Walk {
    mode: OperatingMode,
    visited: Vec<OperatingMode>,
}

impl Walk {
    fn new() -> Self {
        Self { mode: OperatingMode::Idle, visited: vec![OperatingMode::Idle] }
    }

    fn go(&mut self, event: ModeEvent) -> Result<()> {
        let next = step_mode(self.mode, event)?;
        if next != self.mode {
            self.visited.push(next);
        }
        self.mode = next;
        Ok(())
    }
}

fn fold_axes(records: &[RecordMetrics]) -> (Option<f64>, Option<f64>, Option<f64>) {
    let worst = |f: fn(&RecordMetrics) -> Option<f64>| {
        records.iter().map(f).try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
    };
    (worst(|m| m.settling_time_omega), worst(|m| m.settling_time_slosh), worst(|m| m.fluid_settled_at))
}

/// One manifest inside the mode machine: idle, excitation, then idle again
/// once the fluid has settled, or through recovery if a limit trips.
pub fn run_experiment(
    manifest: &ExperimentManifest,
    cfg: &CampaignConfig,
    predictor: &SloshPredictor,
) -> ExperimentResult {
    let kind = manifest.controller.resolve(&cfg.closed_loop.combined, manifest.excitation.label());
    let mut result = ExperimentResult {
        id: manifest.id.clone(),
        phase: manifest.phase.clone(),
        controller: kind.label(),
        predictor: predictor_label(kind.inner(), predictor).into(),
        excitation: manifest.excitation,
        trial: manifest.trial,
        camera: manifest.camera,
        mode: manifest.mode,
        minimum_success: manifest.minimum_success,
        status: ExperimentStatus::Failed,
        error: None,
        settling_time_omega: None,
        settling_time_slosh: None,
        fluid_settled_at: None,
        peak_gamma_s: 0.0,
        peak_command: 0.0,
        constraint_violations: 0,
        governor_inadmissible: 0,
        modes: Vec::new(),
        duration: 0.0,
        start: 0.0,
        end: 0.0,
    };
    let mut walk = Walk::new();
    let outcome = (|| -> Result<()> {
        walk.go(ModeEvent::StartExcitation { mitigation: manifest.mode == ExperimentMode::Mitigation })?;
        let mut metrics = Vec::new();
        let mut record_end: f64 = 0.0;
        for (i, &axis) in manifest.excitation.axes().iter().enumerate() {
            let maneuver = Maneuver::profile(manifest.profile.profile(axis)?);
            let rec = run_closed_loop(&cfg.closed_loop, &kind, &maneuver, predictor, axis, derive_seed(manifest.seed, i as u64))?;
            record_end = record_end.max(rec.trajectory.samples.last().map_or(0.0, |s| s.state.t));
            metrics.push(rec.metrics);
        }
        result.peak_gamma_s = metrics.iter().map(|m| m.peak_gamma_s).fold(0.0, f64::max);
        result.peak_command = metrics.iter().map(|m| m.peak_command).fold(0.0, f64::max);
        result.constraint_violations = metrics.iter().map(|m| m.constraint_violations).sum();
        result.governor_inadmissible = metrics.iter().map(|m| m.governor_inadmissible).sum();
        let trip = metrics.iter().filter_map(|m| m.recovery_at).reduce(f64::min);
        if let Some(t) = trip {
            walk.go(ModeEvent::LimitExceeded)?;
            walk.go(ModeEvent::RecoveryDone)?;
            result.status = ExperimentStatus::Recovery;
            result.duration = t + cfg.recovery_time;
            return Ok(());
        }
        let (omega, slosh, fluid) = fold_axes(&metrics);
        result.settling_time_omega = omega;
        result.settling_time_slosh = slosh;
        result.fluid_settled_at = fluid;
        walk.go(ModeEvent::ExcitationDone)?;
        walk.go(ModeEvent::FluidSettled)?;
        result.status = ExperimentStatus::Completed;
        // Unsettled fluid holds the vehicle until the record ends.
        result.duration = fluid.unwrap_or(record_end).max(manifest.profile.t_start);
        Ok(())
    })();
    if let Err(e) = outcome {
        result.status = ExperimentStatus::Failed;
        result.error = Some(e.to_string());
    }
    result.modes = walk.visited;
    result
}

fn summarize(results: &[ExperimentResult]) -> Vec<ControllerSummary> {
    let mut by: BTreeMap<&str, Vec<&ExperimentResult>> = BTreeMap::new();
    for r in results {
        by.entry(r.controller.as_str()).or_default().push(r);
    }
    by.into_iter()
        .map(|(name, rs)| {
            let med = |f: fn(&ExperimentResult) -> Option<f64>| {
                let v: Vec<f64> = rs.iter().filter_map(|r| f(r)).collect();
                (!v.is_empty()).then(|| median(v))
            };
            let count = |s| rs.iter().filter(|r| r.status == s).count();
            ControllerSummary {
                controller: name.to_string(),
                experiments: rs.len(),
                completed: count(ExperimentStatus::Completed),
                recoveries: count(ExperimentStatus::Recovery),
                failures: count(ExperimentStatus::Failed),
                median_settling_omega: med(|r| r.settling_time_omega),
                median_settling_slosh: med(|r| r.settling_time_slosh),
                max_peak_gamma_s: rs.iter().map(|r| r.peak_gamma_s).fold(0.0, f64::max),
                constraint_violations: rs.iter().map(|r| r.constraint_violations).sum(),
            }
        })
        .collect()
}

/// Runs every manifest and assembles the report.
///
/// `jobs > 1` runs experiments on a dedicated thread pool. Results are merged
/// by manifest id and the serialized schedule is laid out afterwards in plan
/// order, so the report does not depend on `jobs`.
pub fn run_campaign(
    plan: &[ExperimentManifest],
    cfg: &CampaignConfig,
    predictor: &SloshPredictor,
    jobs: usize,
) -> Result<CampaignReport> {
    cfg.validate()?;
    let ids: BTreeSet<&str> = plan.iter().map(|m| m.id.as_str()).collect();
    if ids.len() != plan.len() {
        return Err(Error::config("plan contains duplicate manifest ids"));
    }
    let merged: BTreeMap<String, ExperimentResult> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
        pool.install(|| plan.par_iter().map(|m| (m.id.clone(), run_experiment(m, cfg, predictor))).collect())
    } else {
        plan.iter().map(|m| (m.id.clone(), run_experiment(m, cfg, predictor))).collect()
    };

    let mut experiments = Vec::with_capacity(plan.len());
    let mut clock = 0.0;
    for m in plan {
        let mut r = merged[&m.id].clone();
        r.start = clock;
        r.end = clock + r.duration;
        clock = r.end;
        experiments.push(r);
    }

    let mut phases: Vec<PhaseSummary> = Vec::new();
    for r in &experiments {
        let idx = match phases.iter().position(|p| p.phase == r.phase) {
            Some(i) => i,
            None => {
                phases.push(PhaseSummary {
                    phase: r.phase.clone(),
                    experiments: 0,
                    completed: 0,
                    minimum_success: false,
                    complete: false,
                });
                phases.len() - 1
            }
        };
        let p = &mut phases[idx];
        p.experiments += 1;
        p.completed += usize::from(r.status == ExperimentStatus::Completed);
        p.minimum_success |= r.minimum_success;
    }
    for p in &mut phases {
        p.complete = p.completed == p.experiments;
    }
    let min_runs: Vec<_> = experiments.iter().filter(|r| r.minimum_success).collect();
    let minimum_success_complete =
        !min_runs.is_empty() && min_runs.iter().all(|r| r.status == ExperimentStatus::Completed);

    let n_camera = plan.iter().filter(|m| m.camera).count() as u64;
    let n_no_camera = plan.len() as u64 - n_camera;
    let budget = BudgetConfig::<Rational64> { mode: cfg.budget_mode, ..BudgetConfig::default() };
    let exact = campaign_volume(n_camera, n_no_camera, &budget);
    let lossy = |v: &Rational64| *v.numer() as f64 / *v.denom() as f64;

    Ok(CampaignReport {
        report_version: REPORT_VERSION,
        controllers: summarize(&experiments),
        phases,
        minimum_success_complete,
        recoveries: experiments.iter().filter(|r| r.status == ExperimentStatus::Recovery).count(),
        failures: experiments.iter().filter(|r| r.status == ExperimentStatus::Failed).count(),
        unsettled: experiments
            .iter()
            .filter(|r| r.status == ExperimentStatus::Completed && r.fluid_settled_at.is_none())
            .count(),
        n_camera,
        n_no_camera,
        data_volume_mb: CampaignVolume {
            camera_mb: lossy(&exact.camera_mb),
            no_camera_mb: lossy(&exact.no_camera_mb),
            total_mb: lossy(&exact.total_mb),
        },
        data_volume_exact_mb: [exact.camera_mb.to_string(), exact.no_camera_mb.to_string(), exact.total_mb.to_string()],
        schedule_end: clock,
        experiments,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.2}"))
}

impl CampaignReport {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<6} {:>6} {:>9} {:>8} {:>9}", "phase", "runs", "completed", "min-succ", "complete");
        for p in &self.phases {
            let _ = writeln!(
                s,
                "{:<6} {:>6} {:>9} {:>8} {:>9}",
                p.phase,
                p.experiments,
                p.completed,
                if p.minimum_success { "yes" } else { "no" },
                if p.complete { "yes" } else { "no" }
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<22} {:>5} {:>5} {:>5} {:>5} {:>10} {:>10} {:>11} {:>6}",
            "controller", "runs", "ok", "rec", "fail", "med ts(Ω)", "med ts(Γs)", "peak Γs", "viol"
        );
        for c in &self.controllers {
            let _ = writeln!(
                s,
                "{:<22} {:>5} {:>5} {:>5} {:>5} {:>10} {:>10} {:>11.3e} {:>6}",
                c.controller,
                c.experiments,
                c.completed,
                c.recoveries,
                c.failures,
                opt(c.median_settling_omega),
                opt(c.median_settling_slosh),
                c.max_peak_gamma_s,
                c.constraint_violations
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "minimum success: {}",
            if self.minimum_success_complete { "complete" } else { "incomplete" }
        );
        let _ = writeln!(
            s,
            "recoveries {}  failures {}  unsettled {}  schedule {:.1} s",
            self.recoveries, self.failures, self.unsettled, self.schedule_end
        );
        let _ = writeln!(
            s,
            "data: {} camera + {} without = {:.2} MB",
            self.n_camera, self.n_no_camera, self.data_volume_mb.total_mb
        );
        s
    }
}
