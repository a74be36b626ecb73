use std::fmt;

use serde::{Deserialize, Serialize};

use crate::actuator::{bang_stop_bang, Axis, CommandProfile};
use crate::control::ControllerKind;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Trials per experiment group.
pub const TRIALS: u8 = 3;

/// Rotation axes excited together in one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Excitation {
    X,
    Y,
    Z,
    Xy,
    Xz,
    Yz,
    Xyz,
}

impl Excitation {
    pub const ALL: [Excitation; 7] = [
        Excitation::X,
        Excitation::Y,
        Excitation::Z,
        Excitation::Xy,
        Excitation::Xz,
        Excitation::Yz,
        Excitation::Xyz,
    ];

    pub fn axes(self) -> &'static [Axis] {
        use Axis::{X, Y, Z};
        match self {
            Excitation::X => &[X],
            Excitation::Y => &[Y],
            Excitation::Z => &[Z],
            Excitation::Xy => &[X, Y],
            Excitation::Xz => &[X, Z],
            Excitation::Yz => &[Y, Z],
            Excitation::Xyz => &[X, Y, Z],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Excitation::X => "x",
            Excitation::Y => "y",
            Excitation::Z => "z",
            Excitation::Xy => "xy",
            Excitation::Xz => "xz",
            Excitation::Yz => "yz",
            Excitation::Xyz => "xyz",
        }
    }
}

impl fmt::Display for Excitation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    Observation,
    Mitigation,
}

/// Bang-stop-bang excitation level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileLevel {
    /// N·m
    pub torque: f64,
    /// s
    pub duration: f64,
    /// s
    pub dwell: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileParams {
    pub torque: f64,
    pub duration: f64,
    pub dwell: f64,
    pub t_start: f64,
    pub sign: f64,
}

impl ProfileParams {
    pub fn profile(&self, axis: Axis) -> Result<CommandProfile<f64>> {
        Ok(bang_stop_bang(self.torque, self.duration, self.dwell, self.t_start, self.sign)?.with_axis(axis))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub id: String,
    pub phase: String,
    /// Group number inside the phase; trials of one group share it.
    pub group: usize,
    pub controller: ControllerKind,
    pub excitation: Excitation,
    pub trial: u8,
    pub camera: bool,
    pub mode: ExperimentMode,
    pub profile: ProfileParams,
    pub seed: u64,
    pub minimum_success: bool,
    /// Stand-alone checkout run outside the trial groups.
    pub commissioning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpec {
    pub label: String,
    pub controller: ControllerKind,
    pub mode: ExperimentMode,
    /// Experiment groups, each run as [`TRIALS`] trials.
    pub groups: usize,
    /// Single commissioning runs placed before the groups.
    #[serde(default)]
    pub singles: usize,
    #[serde(default)]
    pub minimum_success: bool,
}

/// Counts the built plan must reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedCounts {
    pub total: usize,
    pub camera: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanConfig {
    pub phases: Vec<PhaseSpec>,
    /// Excitations cycled through by group index.
    pub excitations: Vec<Excitation>,
    /// Levels advanced once per full excitation cycle.
    pub levels: Vec<ProfileLevel>,
    /// Trial numbers recorded with the camera.
    pub camera_trials: Vec<u8>,
    /// Commissioning runs carry camera data.
    pub camera_singles: bool,
    /// s
    pub t_start: f64,
    pub expected: Option<ExpectedCounts>,
}

impl Default for PlanConfig {
    /// 76 groups of three trials plus one commissioning run: 229 experiments,
    /// the first trial of every group on camera (76), the rest without (153).
    fn default() -> Self {
        let phase = |label: &str, controller, mode, groups, singles, minimum_success| PhaseSpec {
            label: label.into(),
            controller,
            mode,
            groups,
            singles,
            minimum_success,
        };
        use ControllerKind as K;
        use ExperimentMode::{Mitigation, Observation};
        Self {
            phases: vec![
                phase("A", K::Baseline, Observation, 20, 1, true),
                phase("B", K::OutputFeedbackAdaptive, Mitigation, 14, 0, false),
                phase("C", K::MachineLearning, Mitigation, 14, 0, false),
                phase("D", K::governed(K::Baseline), Mitigation, 14, 0, false),
                phase("E", K::Combined, Mitigation, 14, 0, false),
            ],
            excitations: Excitation::ALL.to_vec(),
            levels: vec![
                ProfileLevel { torque: 0.005, duration: 5.0, dwell: 25.0 },
                ProfileLevel { torque: 0.003, duration: 6.0, dwell: 30.0 },
                ProfileLevel { torque: 0.002, duration: 8.0, dwell: 35.0 },
            ],
            camera_trials: vec![1],
            camera_singles: false,
            t_start: 2.0,
            expected: Some(ExpectedCounts { total: 229, camera: 76 }),
        }
    }
}

impl PlanConfig {
    /// One phase of observation runs: every excitation once, three trials each.
    pub fn single_phase(controller: ControllerKind, mode: ExperimentMode) -> Self {
        Self {
            phases: vec![PhaseSpec {
                label: "A".into(),
                controller,
                mode,
                groups: Excitation::ALL.len(),
                singles: 0,
                minimum_success: true,
            }],
            expected: None,
            ..Self::default()
        }
    }

    pub fn empty() -> Self {
        Self { phases: Vec::new(), expected: None, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.excitations.is_empty() || self.levels.is_empty() {
            return Err(Error::config("plan needs at least one excitation and one level"));
        }
        if let Some(t) = self.camera_trials.iter().find(|t| !(1..=TRIALS).contains(*t)) {
            return Err(Error::config(format!("camera trial {t} outside 1..={TRIALS}")));
        }
        for l in &self.levels {
            if !(l.torque > 0.0 && l.duration > 0.0 && l.dwell > 0.0) {
                return Err(Error::config("profile levels must be positive"));
            }
        }
        if !(self.t_start >= 0.0) {
            return Err(Error::config("t_start must be non-negative"));
        }
        let mut labels: Vec<&str> = self.phases.iter().map(|p| p.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("phase labels must be unique"));
        }
        for p in &self.phases {
            if p.label.is_empty() || p.label.contains(|c: char| c == '-' || c.is_whitespace()) {
                return Err(Error::config(format!("bad phase label {:?}", p.label)));
            }
            p.controller.validate()?;
        }
        Ok(())
    }
}

/// Expands a plan configuration into manifests, phase by phase.
///
/// Group `g` of a phase uses excitation `g mod E` and level `⌊g/E⌋ mod L`;
/// the sign of the profile alternates by group. Seeds derive from `seed` and
/// the manifest's position.
pub fn build_plan(cfg: &PlanConfig, seed: u64) -> Result<Vec<ExperimentManifest>> {
    cfg.validate()?;
    let mut out = Vec::new();
    let n_exc = cfg.excitations.len();
    for phase in &cfg.phases {
        let mut push = |group: usize, exc: Excitation, level: &ProfileLevel, trial: u8, camera: bool, commissioning: bool| {
            let index = out.len() as u64;
            let sign = if group.is_multiple_of(2) { 1.0 } else { -1.0 };
            out.push(ExperimentManifest {
                id: format!("{}{:02}-{}-t{}", phase.label, group, exc, trial),
                phase: phase.label.clone(),
                group,
                controller: phase.controller.clone(),
                excitation: exc,
                trial,
                camera,
                mode: phase.mode,
                profile: ProfileParams {
                    torque: level.torque,
                    duration: level.duration,
                    dwell: level.dwell,
                    t_start: cfg.t_start,
                    sign,
                },
                seed: derive_seed(seed, index),
                minimum_success: phase.minimum_success,
                commissioning,
            });
        };
        // Commissioning runs take group numbers 0.., the trial groups follow.
        for s in 0..phase.singles {
            push(s, cfg.excitations[s % n_exc], &cfg.levels[0], 1, cfg.camera_singles, true);
        }
        for g in 0..phase.groups {
            let exc = cfg.excitations[g % n_exc];
            let level = &cfg.levels[(g / n_exc) % cfg.levels.len()];
            for trial in 1..=TRIALS {
                push(phase.singles + g, exc, level, trial, cfg.camera_trials.contains(&trial), false);
            }
        }
    }
    if let Some(e) = cfg.expected {
        let camera = out.iter().filter(|m| m.camera).count();
        if out.len() != e.total || camera != e.camera {
            return Err(Error::config(format!(
                "plan has {} experiments ({} with camera); expected {} ({})",
                out.len(),
                camera,
                e.total,
                e.camera
            )));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeMap, BTreeSet};

    #[test]
    fn default_plan_counts() {
        let plan = build_plan(&PlanConfig::default(), 1).unwrap();
        assert_eq!(plan.len(), 229);
        assert_eq!(plan.iter().filter(|m| m.camera).count(), 76);
        assert_eq!(plan.iter().filter(|m| !m.camera).count(), 153);
        let ids: BTreeSet<_> = plan.iter().map(|m| m.id.as_str()).collect();
        assert_eq!(ids.len(), plan.len());
        assert!(plan.iter().filter(|m| m.phase == "A").all(|m| m.minimum_success));
        assert!(plan.iter().filter(|m| m.phase != "A").all(|m| !m.minimum_success));
    }

    #[test]
    fn trial_groups_come_in_threes() {
        let plan = build_plan(&PlanConfig::default(), 1).unwrap();
        let mut groups: BTreeMap<(String, Excitation, ExperimentMode), usize> = BTreeMap::new();
        for m in plan.iter().filter(|m| !m.commissioning) {
            *groups.entry((m.controller.label(), m.excitation, m.mode)).or_default() += 1;
        }
        assert!(groups.values().all(|n| n % 3 == 0), "{groups:?}");
    }

    #[test]
    fn single_phase_has_21() {
        let cfg = PlanConfig::single_phase(ControllerKind::Baseline, ExperimentMode::Observation);
        let plan = build_plan(&cfg, 0).unwrap();
        assert_eq!(plan.len(), 21);
        let exc: BTreeSet<_> = plan.iter().map(|m| m.excitation).collect();
        assert_eq!(exc.len(), 7);
    }

    #[test]
    fn mismatched_expectation_is_rejected() {
        let cfg = PlanConfig {
            camera_trials: vec![1, 2],
            ..PlanConfig::default()
        };
        assert!(build_plan(&cfg, 0).is_err());
    }

    #[test]
    fn default_levels_stay_below_the_recovery_rate() {
        let cfg = PlanConfig::default();
        for l in &cfg.levels {
            let peak = l.torque * l.duration / crate::dynamics::I_SAT_SLEW;
            assert!(peak < 26f64.to_radians(), "{l:?}");
        }
    }
}
