//! Attitude controllers and the closed-loop experiment executor.
//!
//! Five variants share one PD(+I) law with an additive slosh compensation
//! term: the baseline, a time-delay disturbance estimator (our reading of an
//! output-feedback adaptive controller), a learned slosh predictor, a scalar
//! reference governor around any of these, and a combination that picks the
//! better compensator per maneuver class and governs it.

mod compare;
mod governor;
mod run;
mod tdc;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use compare::{paired_grid, settling_ratio, CompareRow, Comparison, Contender};
pub use governor::{governor_step, CompensationModel, GovernorConstraints, GovernorOutcome, LinearPrediction};
pub use run::{
    predictor_label, run_closed_loop, ClosedLoopConfig, ExperimentRecord, Maneuver, RecordMetrics,
    SettleCriterion, TdcConfig, RECORD_VERSION,
};
pub use tdc::{tdc_estimate, TdcEstimator};

use crate::actuator::{filter_output, filter_rhs};
use crate::error::{Error, Result};
use crate::ode::rk4_step;
use crate::predictor::NarxModel;
use crate::scalar::Real;

/// PD gains with an optional integral term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains<T> {
    /// N·m/rad
    pub k_p: T,
    /// N·m·s/rad
    pub k_d: T,
    /// N·m/(rad·s)
    #[serde(default)]
    pub k_i: T,
}

impl<T: Real> PidGains<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_p >= T::zero() && self.k_d >= T::zero() && self.k_i >= T::zero()) {
            return Err(Error::config("PID gains must be non-negative"));
        }
        if !(self.k_p.is_finite() && self.k_d.is_finite() && self.k_i.is_finite()) {
            return Err(Error::config("PID gains must be finite"));
        }
        Ok(())
    }
}

impl Default for PidGains<f64> {
    fn default() -> Self {
        Self { k_p: 0.01, k_d: 0.05, k_i: 0.0 }
    }
}

/// `Γ_RW = −k_p(θ − θ_d) − k_d·Ω − compensation`. The integral gain is not used here.
#[inline]
pub fn pid_step<T: Real>(theta: T, theta_d: T, omega: T, gains: &PidGains<T>, compensation: T) -> T {
    -gains.k_p * (theta - theta_d) - gains.k_d * omega - compensation
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "inner", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerKind {
    Baseline,
    OutputFeedbackAdaptive,
    MachineLearning,
    ReferenceGovernor(Box<ControllerKind>),
    /// Better of the two compensators for the maneuver class, under a governor.
    Combined,
}

impl ControllerKind {
    pub fn governed(inner: ControllerKind) -> Self {
        Self::ReferenceGovernor(Box::new(inner))
    }

    pub fn label(&self) -> String {
        match self {
            Self::Baseline => "baseline".into(),
            Self::OutputFeedbackAdaptive => "adaptive".into(),
            Self::MachineLearning => "ml".into(),
            Self::ReferenceGovernor(inner) => format!("governor({})", inner.label()),
            Self::Combined => "combined".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::ReferenceGovernor(inner) => match **inner {
                Self::ReferenceGovernor(_) | Self::Combined => Err(Error::config(
                    "a reference governor wraps exactly one plain controller",
                )),
                _ => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// Replaces `Combined` by the governed compensator chosen for `class`.
    pub fn resolve(&self, selection: &CombinedSelection, class: &str) -> Self {
        match self {
            Self::Combined => Self::governed(selection.choice(class).kind()),
            other => other.clone(),
        }
    }

    pub fn is_governed(&self) -> bool {
        matches!(self, Self::ReferenceGovernor(_) | Self::Combined)
    }

    /// The controller under the governor, if any.
    pub fn inner(&self) -> &ControllerKind {
        match self {
            Self::ReferenceGovernor(inner) => inner,
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compensator {
    OutputFeedbackAdaptive,
    MachineLearning,
}

impl Compensator {
    pub fn kind(self) -> ControllerKind {
        match self {
            Self::OutputFeedbackAdaptive => ControllerKind::OutputFeedbackAdaptive,
            Self::MachineLearning => ControllerKind::MachineLearning,
        }
    }
}

/// Compensator choice per maneuver class for [`ControllerKind::Combined`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombinedSelection {
    pub default: Compensator,
    #[serde(default)]
    pub by_class: BTreeMap<String, Compensator>,
}

impl Default for CombinedSelection {
    fn default() -> Self {
        Self { default: Compensator::MachineLearning, by_class: BTreeMap::new() }
    }
}

impl CombinedSelection {
    pub fn choice(&self, class: &str) -> Compensator {
        self.by_class.get(class).copied().unwrap_or(self.default)
    }

    /// Picks, per class, the compensator with the lower median settling time.
    ///
    /// `results` holds (class, compensator, settling time); unsettled runs count as infinite.
    pub fn from_results(results: &[(String, Compensator, Option<f64>)]) -> Self {
        let mut groups: BTreeMap<&str, BTreeMap<Compensator, Vec<f64>>> = BTreeMap::new();
        for (class, comp, t) in results {
            groups
                .entry(class.as_str())
                .or_default()
                .entry(*comp)
                .or_default()
                .push(t.unwrap_or(f64::INFINITY));
        }
        let mut sel = Self::default();
        for (class, by_comp) in groups {
            let best = by_comp
                .into_iter()
                .map(|(c, v)| (median(v), c))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let Some((_, c)) = best {
                sel.by_class.insert(class.to_string(), c);
            }
        }
        sel
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Source of the slosh-torque estimate for the learning-based controller.
#[derive(Debug, Clone, Default)]
pub enum SloshPredictor {
    /// No estimate; the controller reduces to the baseline.
    #[default]
    Zero,
    /// Exact slosh torque cancelled inside the plant; a reference bound.
    Oracle,
    Narx(Arc<NarxModel>),
}

impl SloshPredictor {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::Oracle => "oracle",
            Self::Narx(_) => "narx",
        }
    }
}

/// How a torque estimate becomes a wheel command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompensationShaping {
    /// Command the estimate as is; the wheel filter lags and attenuates it.
    Direct,
    /// Invert the wheel filter so the delivered torque follows the estimate.
    #[default]
    InverseActuator,
}

/// Error decay rate of [`InverseShaper`], 1/s.
pub const SHAPER_LAMBDA: f64 = 20.0;

/// Dynamic inversion of the wheel filter for a compensation signal.
///
/// Runs an internal copy of the filter driven by its own output and chooses
/// the command so the copy's output error decays at rate `lambda` for a
/// frozen reference. No reference derivative is used: estimates arrive with
/// step-to-step jitter that differentiation would amplify.
#[derive(Debug, Clone)]
pub struct InverseShaper {
    z: [f64; 2],
    lambda: f64,
    dt: f64,
}

impl InverseShaper {
    pub fn new(dt: f64, lambda: f64) -> Self {
        Self { z: [0.0; 2], lambda, dt }
    }

    /// Internal filter copy `[z1, z2]`.
    pub fn state(&self) -> [f64; 2] {
        self.z
    }

    pub fn step(&mut self, r: f64) -> f64 {
                let [z1, z2] = self.z;
        let y = filter_output(z1, z2);
        let drift = {
            let f = filter_rhs(z1, z2, 0.0);
            filter_output(f[0], f[1])
        };
        let gain = filter_output(0.0, 1.0);
        let u = (self.lambda * (r - y) - drift) / gain;
        self.z = rk4_step(|_, x: &[f64; 2]| filter_rhs(x[0], x[1], u), 0.0, &self.z, self.dt);
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuator::{rw_filter_step, RwFilterState};

    #[test]
    fn pid_hand_values() {
        let g = PidGains { k_p: 1.0, k_d: 0.0, k_i: 0.0 };
        assert_eq!(pid_step(0.3, 0.3, 0.0, &g, 0.0), 0.0);
        assert!((pid_step(0.1f64, 0.0, 0.0, &g, 0.0) + 0.1).abs() < 1e-15);
        let g = PidGains { k_p: 0.5, k_d: 2.0, k_i: 0.0 };
        assert_eq!(pid_step(1.0, 0.0, 0.25, &g, 0.125), -0.5 - 0.5 - 0.125);
        assert!(PidGains { k_p: -1.0, k_d: 0.0, k_i: 0.0 }.validate().is_err());
    }

    #[test]
    fn governor_nesting_rejected() {
        let nested = ControllerKind::governed(ControllerKind::governed(ControllerKind::Baseline));
        assert!(nested.validate().is_err());
        assert!(ControllerKind::governed(ControllerKind::Combined).validate().is_err());
        assert!(ControllerKind::governed(ControllerKind::MachineLearning).validate().is_ok());
    }

    #[test]
    fn controller_kind_json() {
        let k = ControllerKind::governed(ControllerKind::MachineLearning);
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(serde_json::from_str::<ControllerKind>(&s).unwrap(), k);
        let b: ControllerKind = serde_json::from_str(r#"{"kind":"baseline"}"#).unwrap();
        assert_eq!(b, ControllerKind::Baseline);
    }

    #[test]
    fn combined_picks_lower_median() {
        let r = vec![
            ("x".to_string(), Compensator::MachineLearning, Some(5.0)),
            ("x".to_string(), Compensator::MachineLearning, Some(7.0)),
            ("x".to_string(), Compensator::OutputFeedbackAdaptive, Some(4.0)),
            ("y".to_string(), Compensator::OutputFeedbackAdaptive, None),
            ("y".to_string(), Compensator::MachineLearning, Some(9.0)),
        ];
        let sel = CombinedSelection::from_results(&r);
        assert_eq!(sel.choice("x"), Compensator::OutputFeedbackAdaptive);
        assert_eq!(sel.choice("y"), Compensator::MachineLearning);
        assert_eq!(sel.choice("z"), Compensator::MachineLearning);
        assert_eq!(
            ControllerKind::Combined.resolve(&sel, "x"),
            ControllerKind::governed(ControllerKind::OutputFeedbackAdaptive)
        );
    }

    #[test]
    fn inverse_shaper_beats_direct_at_slosh_frequency() {
        let dt = 0.01;
        let mut shaper = InverseShaper::new(dt, SHAPER_LAMBDA);
        let (mut shaped, mut direct) = (RwFilterState::<f64>::zero(), RwFilterState::<f64>::zero());
        let (mut worst_shaped, mut worst_direct): (f64, f64) = (0.0, 0.0);
        let r_at = |t: f64| 1e-3 * (2.0 * std::f64::consts::PI * t).sin();
        for k in 0..2000 {
            let t = k as f64 * dt;
            let r = r_at(t);
            shaped = rw_filter_step(&shaped, shaper.step(r), dt).0;
            direct = rw_filter_step(&direct, r, dt).0;
            if t > 2.0 {
                worst_shaped = worst_shaped.max((shaped.output() - r_at(t + dt)).abs());
                worst_direct = worst_direct.max((direct.output() - r_at(t + dt)).abs());
            }
        }
        // Lag of a first-order tracker: about ω/λ of the amplitude.
        assert!(worst_shaped < 0.35e-3, "{worst_shaped}");
        assert!(worst_direct > 0.8e-3, "{worst_direct}");
    }

    #[test]
    fn inverse_shaper_of_zero_is_zero() {
        let mut s = InverseShaper::new(0.01, 20.0);
        for _ in 0..100 {
            assert_eq!(s.step(0.0).to_bits(), 0.0f64.to_bits());
        }
    }
}
