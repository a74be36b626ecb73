//! Reaction-wheel commands and the wheel's second-order torque response.
//!
//! Delivered torque follows `H(s) = (1.2 s + 0.76) / (s² + 2.4 s + 0.76)` from
//! the commanded torque, realized in controllable canonical form and clamped to
//! the wheel limit after the filter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::rk4_step;
use crate::scalar::Real;

/// Wheel torque limit, N·m.
pub const TORQUE_MAX: f64 = 0.006;

/// Training ranges for bang-stop-bang profiles: torque (N·m), dwell (s), bang duration (s).
pub const TORQUE_RANGE: (f64, f64) = (0.002, 0.006);
pub const DWELL_RANGE: (f64, f64) = (25.0, 40.0);
pub const DURATION_RANGE: (f64, f64) = (5.0, 25.0);

/// Slew rate the default maneuver is planned for, deg/s.
pub const DEFAULT_SLEW_RATE_DEG: f64 = 16.0;

const NUM1: f64 = 1.2;
const NUM0: f64 = 0.76;
const DEN1: f64 = 2.4;
const DEN0: f64 = 0.76;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment<T> {
    pub t0: T,
    pub t1: T,
    pub torque: T,
}

/// Piecewise-constant wheel torque command on one axis; zero outside the segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandProfile<T> {
    pub axis: Axis,
    pub segments: Vec<Segment<T>>,
    /// Parameters that fall outside the training ranges. Informational only.
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl<T: Real> CommandProfile<T> {
    pub fn empty(axis: Axis) -> Self {
        Self {
            axis,
            segments: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// Command at `t`; segments are half-open `[t0, t1)`.
    pub fn torque_at(&self, t: T) -> T {
        self.segments
            .iter()
            .find(|s| t >= s.t0 && t < s.t1)
            .map_or(T::zero(), |s| s.torque)
    }

    /// End of the last nonzero segment, or zero for an empty profile.
    pub fn end_time(&self) -> T {
        self.segments
            .iter()
            .filter(|s| s.torque != T::zero())
            .fold(T::zero(), |m, s| m.max(s.t1))
    }

    pub fn net_impulse(&self) -> T {
        self.segments
            .iter()
            .fold(T::zero(), |acc, s| acc + s.torque * (s.t1 - s.t0))
    }

    pub fn peak_torque(&self) -> T {
        self.segments
            .iter()
            .fold(T::zero(), |m, s| m.max(s.torque.abs()))
    }

    pub fn has_warnings(&self) -> bool {
        !self.warnings.is_empty()
    }

    pub fn with_axis(mut self, axis: Axis) -> Self {
        self.axis = axis;
        self
    }

    pub fn validate(&self, torque_max: T) -> Result<()> {
        let mut prev_end = T::neg_infinity();
        for s in &self.segments {
            if !(s.t0.is_finite() && s.t1.is_finite() && s.torque.is_finite()) {
                return Err(Error::config("profile segment is not finite"));
            }
            if s.t1 < s.t0 {
                return Err(Error::config("profile segment ends before it starts"));
            }
            if s.t0 < prev_end {
                return Err(Error::config("profile segments overlap or are out of order"));
            }
            if s.torque.abs() > torque_max {
                return Err(Error::config(format!(
                    "segment torque {} exceeds limit {torque_max}",
                    s.torque
                )));
            }
            prev_end = s.t1;
        }
        Ok(())
    }

    /// Body angle and rate at `t` for an ideal rigid body starting at rest.
    pub fn ideal_kinematics(&self, i_sat: T, t: T) -> (T, T) {
        let half = T::lit(0.5);
        let (mut theta, mut omega) = (T::zero(), T::zero());
        for s in &self.segments {
            if t <= s.t0 {
                continue;
            }
            let a = s.torque / i_sat;
            let on = t.min(s.t1) - s.t0;
            let coast = t - t.min(s.t1);
            theta = theta + half * a * on * on + a * on * coast;
            omega = omega + a * on;
        }
        (theta, omega)
    }
}

fn flag_range<T: Real>(warnings: &mut Vec<String>, name: &str, value: T, range: (f64, f64)) {
    let v = value.to_f64_lossy();
    if v < range.0 || v > range.1 {
        warnings.push(format!(
            "{name} = {v} outside training range [{}, {}]",
            range.0, range.1
        ));
    }
}

/// Rest-to-rest pair of opposite bangs separated by a dwell.
///
/// Parameters outside the training ranges are accepted and recorded in
/// [`CommandProfile::warnings`].
pub fn bang_stop_bang<T: Real>(
    gamma_max: T,
    t_dur: T,
    t_dwell: T,
    t_start: T,
    sign: T,
) -> Result<CommandProfile<T>> {
    if !(t_dur > T::zero()) || !(t_dwell > T::zero()) {
        return Err(Error::config("bang duration and dwell must be positive"));
    }
    if !(gamma_max >= T::zero()) || !t_start.is_finite() {
        return Err(Error::config("torque must be non-negative and start finite"));
    }
    if sign == T::zero() || !sign.is_finite() {
        return Err(Error::config("sign must be +1 or -1"));
    }
    let tau = gamma_max * sign.signum();
    let mut warnings = Vec::new();
    flag_range(&mut warnings, "torque", gamma_max, TORQUE_RANGE);
    flag_range(&mut warnings, "t_dwell", t_dwell, DWELL_RANGE);
    flag_range(&mut warnings, "t_dur", t_dur, DURATION_RANGE);
    let second = t_start + t_dur + t_dwell;
    Ok(CommandProfile {
        axis: Axis::X,
        segments: vec![
            Segment {
                t0: t_start,
                t1: t_start + t_dur,
                torque: tau,
            },
            Segment {
                t0: second,
                t1: second + t_dur,
                torque: -tau,
            },
        ],
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManeuverOptions<T> {
    /// Coast rate the plan aims for, rad/s.
    pub max_rate: T,
    pub t_start: T,
}

impl<T: Real> Default for ManeuverOptions<T> {
    fn default() -> Self {
        Self {
            max_rate: T::lit(DEFAULT_SLEW_RATE_DEG.to_radians()),
            t_start: T::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverPlan<T> {
    pub profile: CommandProfile<T>,
    pub t_dur: T,
    pub t_dwell: T,
    /// Peak body rate of the ideal response, rad/s.
    pub max_rate: T,
}

/// Slew plan with the default coast rate.
pub fn maneuver_profile<T: Real>(angle_target: T, i_sat: T, gamma_max: T) -> Result<ManeuverPlan<T>> {
    maneuver_profile_with(angle_target, i_sat, gamma_max, &ManeuverOptions::default())
}

/// Symmetric bang-coast-bang reaching `angle_target` at rest for an ideal rigid body.
///
/// Total angle is `Γ/I · t_dur · (t_dur + t_dwell)`. The bang is sized so the
/// coast rate equals `opts.max_rate`; short slews that never reach it become a
/// bang-bang with a vanishing dwell.
pub fn maneuver_profile_with<T: Real>(
    angle_target: T,
    i_sat: T,
    gamma_max: T,
    opts: &ManeuverOptions<T>,
) -> Result<ManeuverPlan<T>> {
    if angle_target == T::zero() || !angle_target.is_finite() {
        return Err(Error::Infeasible("zero or non-finite target angle".into()));
    }
    if !(i_sat > T::zero() && gamma_max > T::zero() && opts.max_rate > T::zero()) {
        return Err(Error::Infeasible(
            "inertia, torque and rate limit must be positive".into(),
        ));
    }
    let accel = gamma_max / i_sat;
    let angle = angle_target.abs();
    let mut t_dur = opts.max_rate / accel;
    let mut t_dwell = angle / (accel * t_dur) - t_dur;
    if t_dwell < T::zero() {
        t_dur = (angle / accel).sqrt();
        t_dwell = T::zero();
    }
    if !(t_dur > T::zero()) {
        return Err(Error::Infeasible("required bang duration is not positive".into()));
    }
    let tau = gamma_max * angle_target.signum();
    let t0 = opts.t_start;
    let second = t0 + t_dur + t_dwell;
    let profile = CommandProfile {
        axis: Axis::X,
        segments: vec![
            Segment {
                t0,
                t1: t0 + t_dur,
                torque: tau,
            },
            Segment {
                t0: second,
                t1: second + t_dur,
                torque: -tau,
            },
        ],
        warnings: Vec::new(),
    };
    Ok(ManeuverPlan {
        profile,
        t_dur,
        t_dwell,
        max_rate: accel * t_dur,
    })
}

/// Internal states of the wheel response filter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RwFilterState<T> {
    pub x1: T,
    pub x2: T,
}

impl<T: Real> RwFilterState<T> {
    pub fn zero() -> Self {
        Self {
            x1: T::zero(),
            x2: T::zero(),
        }
    }

    /// Unsaturated filter output.
    pub fn output(&self) -> T {
        T::lit(NUM0) * self.x1 + T::lit(NUM1) * self.x2
    }
}

#[inline]
pub(crate) fn filter_rhs<T: Real>(x1: T, x2: T, u: T) -> [T; 2] {
    [x2, -T::lit(DEN0) * x1 - T::lit(DEN1) * x2 + u]
}

#[inline]
pub(crate) fn filter_output<T: Real>(x1: T, x2: T) -> T {
    T::lit(NUM0) * x1 + T::lit(NUM1) * x2
}

/// Advances the wheel filter one RK4 step with `commanded` held; returns the clamped output.
pub fn rw_filter_step<T: Real>(state: &RwFilterState<T>, commanded: T, dt: T) -> (RwFilterState<T>, T) {
    let x = rk4_step(|_, x: &[T; 2]| filter_rhs(x[0], x[1], commanded), T::zero(), &[state.x1, state.x2], dt);
    let next = RwFilterState { x1: x[0], x2: x[1] };
    let limit = T::lit(TORQUE_MAX);
    (next, next.output().max(-limit).min(limit))
}

/// Roots of the filter denominator, slowest first.
pub fn filter_poles() -> (f64, f64) {
    let disc = (DEN1 * DEN1 - 4.0 * DEN0).sqrt();
    ((-DEN1 + disc) / 2.0, (-DEN1 - disc) / 2.0)
}

/// How commanded torque becomes delivered torque.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ActuatorModel {
    /// Delivered equals commanded (clamped).
    Ideal,
    /// Second-order wheel response, then clamp.
    #[default]
    Filtered,
}
