use std::collections::VecDeque;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    pid_step, governor_step, CompensationModel, CombinedSelection, CompensationShaping, ControllerKind,
    GovernorConstraints, InverseShaper, LinearPrediction, PidGains, SloshPredictor, TdcEstimator,
    SHAPER_LAMBDA,
};
use crate::actuator::{ActuatorModel, Axis, CommandProfile};
use crate::campaign::{recovery_check, RecoveryLimits};
use crate::dynamics::{
    calibrated_default, settling_time_with, Channel, Disturbances, EmmParams, Plant, Sample,
    SettlingSpec, TankGeometry, Trajectory, I_SAT_SLEW,
};
use crate::error::{Error, Result};
use crate::ode::sample_count;
use crate::predictor::{NarxModel, PredictWindow};
use crate::seed::derive_seed;
use crate::sensors::{wall_pressure_psi, AccelSpec, Accelerometer, Gyro, GyroSpec, PressureArraySpec};

pub const RECORD_VERSION: u32 = 1;

/// Time-delay estimator settings for the adaptive controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TdcConfig {
    pub delay_steps: usize,
    /// Time constant of the first-order smoothing applied to the estimate, s; 0 disables.
    pub smoothing: f64,
    pub shaping: CompensationShaping,
}

impl Default for TdcConfig {
    fn default() -> Self {
        Self { delay_steps: 1, smoothing: 0.5, shaping: CompensationShaping::Direct }
    }
}

/// When an attitude maneuver counts as finished.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SettleCriterion {
    /// Allowed rate error, rad/s.
    pub rate_tol: f64,
    /// Allowed attitude error, rad.
    pub angle_tol: f64,
    /// The errors must stay inside for at least this long before the record ends, s.
    pub hold: f64,
    /// Relative band on |Γs| for the fluid to count as settled.
    pub slosh_band: f64,
}

impl Default for SettleCriterion {
    fn default() -> Self {
        Self { rate_tol: 1e-4, angle_tol: 1e-3, hold: 2.0, slosh_band: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Maneuver {
    /// Torque profile fed forward; feedback tracks the rigid-body response to it.
    Profile { profile: CommandProfile<f64> },
    /// Attitude set-point change at `t_step`; the record ends at `t_end`.
    Step { angle: f64, t_step: f64, t_end: f64 },
}

impl Maneuver {
    pub fn profile(profile: CommandProfile<f64>) -> Self {
        Self::Profile { profile }
    }

    /// Instant after which settling is measured.
    pub fn command_end(&self) -> f64 {
        match self {
            Self::Profile { profile } => profile.end_time(),
            Self::Step { t_step, .. } => *t_step,
        }
    }

    fn duration(&self, tail: f64) -> f64 {
        match self {
            Self::Profile { profile } => profile.end_time() + tail,
            Self::Step { t_end, .. } => *t_end,
        }
    }

    /// Set-point form used under a governor: the profile's net rotation,
    /// requested when the profile starts.
    pub fn as_step(&self, i_sat: f64, tail: f64) -> Self {
        match self {
            Self::Profile { profile } => {
                let end = profile.end_time();
                let (angle, _) = profile.ideal_kinematics(i_sat, end);
                let t_step = profile.segments.first().map_or(0.0, |s| s.t0);
                Self::Step { angle, t_step, t_end: end + tail }
            }
            step => step.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Profile { profile } => {
                if profile.segments.iter().any(|s| !(s.t0 >= 0.0 && s.t1 >= s.t0 && s.torque.is_finite())) {
                    return Err(Error::config("profile segments malformed"));
                }
                Ok(())
            }
            Self::Step { angle, t_step, t_end } => {
                if !(angle.is_finite() && *t_step >= 0.0 && t_end > t_step) {
                    return Err(Error::config("step maneuver needs finite angle and t_end > t_step ≥ 0"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClosedLoopConfig {
    pub params: EmmParams<f64>,
    pub disturbance: Disturbances<f64>,
    pub actuator: ActuatorModel,
    /// Control, sensing and integration step, s.
    pub dt: f64,
    pub gains: PidGains<f64>,
    pub gyro: GyroSpec<f64>,
    pub accel: AccelSpec,
    pub pressure: PressureArraySpec,
    pub tank: TankGeometry<f64>,
    pub constraints: GovernorConstraints,
    pub tdc: TdcConfig,
    /// Shaping of the learned slosh estimate.
    pub shaping: CompensationShaping,
    pub settle: SettleCriterion,
    /// `None` disables the safe-mode trigger.
    pub recovery: Option<RecoveryLimits>,
    /// Simulated time after a profile ends, s.
    pub tail: f64,
    pub combined: CombinedSelection,
}

impl Default for ClosedLoopConfig {
    fn default() -> Self {
        Self {
            params: calibrated_default(I_SAT_SLEW).expect("default calibration converges"),
            disturbance: Disturbances::none(),
            actuator: ActuatorModel::Filtered,
            dt: 0.01,
            gains: PidGains::default(),
            gyro: GyroSpec::mems_100hz(),
            accel: AccelSpec::default(),
            pressure: PressureArraySpec::default(),
            tank: TankGeometry::flight(),
            constraints: GovernorConstraints::default(),
            tdc: TdcConfig::default(),
            shaping: CompensationShaping::InverseActuator,
            settle: SettleCriterion::default(),
            recovery: Some(RecoveryLimits::default()),
            tail: 30.0,
            combined: CombinedSelection::default(),
        }
    }
}

impl ClosedLoopConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.gains.validate()?;
        self.gyro.validate()?;
        self.pressure.validate()?;
        self.tank.validate()?;
        self.constraints.validate()?;
        if let Some(r) = &self.recovery {
            r.validate()?;
        }
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return Err(Error::config("dt must lie in (0, 0.1]"));
        }
        if (self.gyro.dt - self.dt).abs() > 1e-12 {
            return Err(Error::config(format!(
                "gyro sampling interval {} differs from the control step {}",
                self.gyro.dt, self.dt
            )));
        }
        if !(self.tail >= 0.0) {
            return Err(Error::config("tail must be non-negative"));
        }
        let s = &self.settle;
        if !(s.rate_tol > 0.0 && s.angle_tol > 0.0 && s.hold >= 0.0 && s.slosh_band > 0.0 && s.slosh_band < 1.0) {
            return Err(Error::config("settle criterion invalid"));
        }
        if !(self.tdc.smoothing >= 0.0) || self.tdc.delay_steps == 0 {
            return Err(Error::config("tdc needs delay_steps ≥ 1 and smoothing ≥ 0"));
        }
        Ok(())
    }

    /// Same configuration with a noiseless gyro and accelerometer.
    pub fn noiseless(mut self) -> Self {
        self.gyro = GyroSpec::noiseless(self.dt);
        self.accel.noise_std = 0.0;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMetrics {
    /// Time from command end until rate and attitude errors stay in band, s.
    pub settling_time_omega: Option<f64>,
    /// Time from command end until |Γs| stays in its relative band, s.
    pub settling_time_slosh: Option<f64>,
    /// Absolute time the fluid counts as settled.
    pub fluid_settled_at: Option<f64>,
    /// N·m
    pub peak_gamma_s: f64,
    /// N·m
    pub peak_command: f64,
    pub torque_violations: usize,
    pub pressure_violations: usize,
    /// Steps violating either limit.
    pub constraint_violations: usize,
    /// Governor steps where holding the previous reference was predicted unsafe.
    pub governor_inadmissible: usize,
    /// Time the safe-mode trigger fired, if it did.
    pub recovery_at: Option<f64>,
    pub completed: bool,
    pub samples: usize,
}

/// Series and metrics of one closed-loop run on one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub record_version: u32,
    pub controller: String,
    pub predictor: String,
    pub axis: Axis,
    pub seed: u64,
    pub maneuver: Maneuver,
    /// Samples carry the delivered wheel torque.
    pub trajectory: Trajectory<f64>,
    pub commanded: Vec<f64>,
    pub compensation: Vec<f64>,
    /// Attitude reference handed to the PD law, rad.
    pub reference: Vec<f64>,
    /// deg/s
    pub omega_measured: Vec<f64>,
    /// m/s²
    pub accel: Vec<f64>,
    /// psi
    pub pressure: Vec<f64>,
    pub metrics: RecordMetrics,
}

#[derive(Serialize)]
struct MetricsDoc<'a> {
    record_version: u32,
    controller: &'a str,
    predictor: &'a str,
    axis: Axis,
    seed: u64,
    metrics: &'a RecordMetrics,
}

impl ExperimentRecord {
    pub fn metrics_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MetricsDoc {
            record_version: self.record_version,
            controller: &self.controller,
            predictor: &self.predictor,
            axis: self.axis,
            seed: self.seed,
            metrics: &self.metrics,
        })?)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "t,theta,theta_ref,omega,omega_meas_deg,gamma_s,gamma_rw_cmd,gamma_rw,compensation,accel,pressure_psi"
        )?;
        for (k, s) in self.trajectory.samples.iter().enumerate() {
            writeln!(
                w,
                "{:.4},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
                s.state.t,
                s.state.theta,
                self.reference[k],
                s.state.omega,
                self.omega_measured[k],
                s.state.gamma_s,
                self.commanded[k],
                s.gamma_rw,
                self.compensation[k],
                self.accel[k],
                self.pressure[k],
            )?;
        }
        Ok(())
    }

    /// Drops the series, keeping metrics and identity.
    pub fn without_series(mut self) -> Self {
        self.trajectory.samples = Vec::new();
        for v in [
            &mut self.commanded,
            &mut self.compensation,
            &mut self.reference,
            &mut self.omega_measured,
            &mut self.accel,
            &mut self.pressure,
        ] {
            *v = Vec::new();
        }
        self
    }
}

/// NARX evaluation at the control rate with taps spaced at the model's own rate.
struct NarxStream {
    model: Arc<NarxModel>,
    spacing: usize,
    omega: VecDeque<f64>,
    command: VecDeque<f64>,
    output: VecDeque<f64>,
    cap: usize,
}

impl NarxStream {
    fn new(model: Arc<NarxModel>, dt: f64) -> Result<Self> {
        let ratio = 1.0 / (dt * model.sample_rate);
        let spacing = ratio.round();
        if !(spacing >= 1.0 && (ratio - spacing).abs() < 1e-9) {
            return Err(Error::config(format!(
                "model rate {} Hz is not an integer division of the control rate",
                model.sample_rate
            )));
        }
        let spacing = spacing as usize;
        let cap = model.lag() * spacing + 1;
        Ok(Self { model, spacing, omega: VecDeque::new(), command: VecDeque::new(), output: VecDeque::new(), cap })
    }

    fn push(buf: &mut VecDeque<f64>, v: f64, cap: usize) {
        if buf.len() == cap {
            buf.pop_front();
        }
        buf.push_back(v);
    }

    /// Taps `back, back + s, …` samples behind the newest entry, oldest first.
    fn taps(buf: &VecDeque<f64>, n: usize, back: usize, s: usize) -> Option<Vec<f64>> {
        if n == 0 {
            return Some(Vec::new());
        }
        let need = back + (n - 1) * s + 1;
        if buf.len() < need {
            return None;
        }
        let last = buf.len() - 1 - back;
        Some((0..n).rev().map(|i| buf[last - i * s]).collect())
    }

    /// Prediction at the current step from the rate measured now.
    fn predict(&mut self, omega: f64) -> f64 {
        Self::push(&mut self.omega, omega, self.cap);
        let m = &self.model;
        let s = self.spacing;
        // Commands and outputs end one control step back; their taps are `s` apart
        // with the newest `s` steps old.
        let pred = match (
            Self::taps(&self.omega, m.n_b, 0, s),
            Self::taps(&self.command, m.n_b, s - 1, s),
            Self::taps(&self.output, m.n_a, s - 1, s),
        ) {
            (Some(o), Some(c), Some(y)) => {
                m.predict(&PredictWindow { outputs: &y, omega: &o, gamma_rw: &c })
            }
            _ => 0.0,
        };
        Self::push(&mut self.output, pred, self.cap);
        pred
    }

    fn record_command(&mut self, u: f64) {
        Self::push(&mut self.command, u, self.cap);
    }
}

enum Compensation {
    None,
    Tdc { est: TdcEstimator, smooth: f64, state: f64 },
    Narx(NarxStream),
}

enum Shaper {
    Direct,
    Inverse(InverseShaper),
}

impl Shaper {
    fn new(shaping: CompensationShaping, actuator: ActuatorModel, dt: f64) -> Self {
        match (shaping, actuator) {
            (CompensationShaping::InverseActuator, ActuatorModel::Filtered) => {
                Self::Inverse(InverseShaper::new(dt, SHAPER_LAMBDA))
            }
            _ => Self::Direct,
        }
    }

    fn apply(&mut self, r: f64) -> f64 {
        match self {
            Self::Direct => r,
            Self::Inverse(s) => s.step(r),
        }
    }
}

/// First time at or after `t_from` from which `ok` holds to the end, as an
/// offset from `t_from`; `None` if that stretch is shorter than `hold`.
fn settle_after(times: &[f64], ok: &[bool], t_from: f64, hold: f64) -> Option<f64> {
    let start = times.iter().position(|&t| t >= t_from)?;
    let last_bad = (start..times.len()).rev().find(|&k| !ok[k]);
    let settled = match last_bad {
        None => times[start],
        Some(k) if k + 1 == times.len() => return None,
        Some(k) => times[k + 1],
    };
    let t_last = *times.last()?;
    (t_last - settled >= hold).then(|| (settled - t_from).max(0.0))
}

/// One closed-loop maneuver on one axis at the control rate.
///
/// Each step: sense (gyro, accelerometer, pressure proxy), check the safe-mode
/// trigger, form the reference (feedforward tracking or governed set point),
/// estimate slosh, apply the PD law with compensation, and advance the plant.
/// A safe-mode trigger ends the run early with the partial record.
pub fn run_closed_loop(
    cfg: &ClosedLoopConfig,
    kind: &ControllerKind,
    maneuver: &Maneuver,
    predictor: &SloshPredictor,
    axis: Axis,
    seed: u64,
) -> Result<ExperimentRecord> {
    cfg.validate()?;
    let kind = kind.resolve(&cfg.combined, "default");
    kind.validate()?;
    maneuver.validate()?;
    let governed = kind.is_governed();
    let inner = kind.inner().clone();
    let maneuver_run = if governed { maneuver.as_step(cfg.params.i_sat, cfg.tail) } else { maneuver.clone() };
    let dt = cfg.dt;
    let duration = maneuver_run.duration(cfg.tail);
    let n = sample_count(duration, dt);
    let half = 0.5 * dt;

    let oracle = inner == ControllerKind::MachineLearning && matches!(predictor, SloshPredictor::Oracle);
    let mut comp = match (&inner, predictor) {
        (ControllerKind::OutputFeedbackAdaptive, _) => Compensation::Tdc {
            est: TdcEstimator::new(cfg.params.i_sat, dt, cfg.tdc.delay_steps),
            smooth: if cfg.tdc.smoothing > 0.0 { dt / (cfg.tdc.smoothing + dt) } else { 1.0 },
            state: 0.0,
        },
        (ControllerKind::MachineLearning, SloshPredictor::Narx(m)) => {
            Compensation::Narx(NarxStream::new(m.clone(), dt)?)
        }
        _ => Compensation::None,
    };
    let shaping = match inner {
        ControllerKind::OutputFeedbackAdaptive => cfg.tdc.shaping,
        _ => cfg.shaping,
    };
    let mut shaper = Shaper::new(shaping, cfg.actuator, dt);

    // Reference: rigid-body response to the feedforward, or a set point.
    let (ref_theta, ref_omega, ff): (Vec<f64>, Vec<f64>, Vec<f64>) = match &maneuver_run {
        Maneuver::Profile { profile } => {
            let mut rigid = Plant::new(cfg.params.decoupled(), Disturbances::none(), cfg.actuator, dt)?;
            let (mut th, mut om, mut u) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
            for _ in 0..n {
                let s = rigid.state();
                let f = profile.torque_at(rigid.t() + half);
                th.push(s.theta);
                om.push(s.omega);
                u.push(f);
                rigid.step(f, false)?;
            }
            (th, om, u)
        }
        Maneuver::Step { angle, t_step, .. } => {
            let th = (0..n)
                .map(|k| if k as f64 * dt + 1e-9 >= *t_step { *angle } else { 0.0 })
                .collect();
            (th, vec![0.0; n], vec![0.0; n])
        }
    };

    let governor = if governed {
        let compensation = match (&inner, predictor) {
            (ControllerKind::MachineLearning, SloshPredictor::Oracle) => CompensationModel::Cancelled,
            (ControllerKind::MachineLearning, SloshPredictor::Narx(_)) | (ControllerKind::OutputFeedbackAdaptive, _) => {
                CompensationModel::Estimate(shaping)
            }
            _ => CompensationModel::None,
        };
        Some(LinearPrediction::new(
            &cfg.params,
            &cfg.gains,
            cfg.actuator,
            dt,
            cfg.constraints.horizon,
            wall_pressure_psi(1.0, &cfg.pressure, &cfg.tank),
            compensation,
        )?)
    } else {
        None
    };

    let mut plant = Plant::new(cfg.params, cfg.disturbance, cfg.actuator, dt)?;
    let mut gyro = Gyro::new(&cfg.gyro, derive_seed(seed, 0))?;
    let mut accel = Accelerometer::new(cfg.accel, derive_seed(seed, 1))?;

    let mut samples: Vec<Sample<f64>> = Vec::with_capacity(n);
    let mut commanded = Vec::with_capacity(n);
    let mut compensation = Vec::with_capacity(n);
    let mut reference = Vec::with_capacity(n);
    let mut omega_measured = Vec::with_capacity(n);
    let mut accel_series = Vec::with_capacity(n);
    let mut pressure = Vec::with_capacity(n);
    let mut m = RecordMetrics {
        settling_time_omega: None,
        settling_time_slosh: None,
        fluid_settled_at: None,
        peak_gamma_s: 0.0,
        peak_command: 0.0,
        torque_violations: 0,
        pressure_violations: 0,
        constraint_violations: 0,
        governor_inadmissible: 0,
        recovery_at: None,
        completed: true,
        samples: 0,
    };
    let mut applied = 0.0;
    let mut integral = 0.0;

    for k in 0..n {
        let s = plant.state();
        let omega_deg = gyro.measure(s.omega.to_degrees());
        let omega_meas = omega_deg.to_radians();

        let (theta_ref, omega_ref) = if let Some(model) = &governor {
            let f = plant.filter_state();
            let x = [s.theta, s.omega, s.gamma_s, s.gamma_s_dot, f.x1, f.x2, shaper_z(&shaper)[0], shaper_z(&shaper)[1]];
            let out = governor_step(ref_theta[k], applied, &x, model, &cfg.constraints);
            if !out.admissible {
                m.governor_inadmissible += 1;
            }
            applied = out.applied;
            (applied, 0.0)
        } else {
            (ref_theta[k], ref_omega[k])
        };

        let estimate = match &mut comp {
            Compensation::None => 0.0,
            Compensation::Tdc { est, smooth, state } => {
                est.push_omega(omega_meas);
                *state += *smooth * (est.estimate() - *state);
                *state
            }
            Compensation::Narx(stream) => stream.predict(omega_meas),
        };
        let comp_cmd = if estimate == 0.0 && matches!(comp, Compensation::None) { 0.0 } else { shaper.apply(estimate) };

        let mut u = ff[k] + pid_step(s.theta, theta_ref, omega_meas - omega_ref, &cfg.gains, comp_cmd);
        if cfg.gains.k_i > 0.0 {
            integral += (s.theta - theta_ref) * dt;
            u -= cfg.gains.k_i * integral;
        }
        if let Compensation::Narx(stream) = &mut comp {
            stream.record_command(u);
        }

        let p = wall_pressure_psi(s.gamma_s, &cfg.pressure, &cfg.tank);
        let tv = u.abs() > cfg.constraints.torque_limit;
        let pv = p > cfg.constraints.pressure_limit;
        m.torque_violations += usize::from(tv);
        m.pressure_violations += usize::from(pv);
        m.constraint_violations += usize::from(tv || pv);
        m.peak_command = m.peak_command.max(u.abs());
        m.peak_gamma_s = m.peak_gamma_s.max(s.gamma_s.abs());

        samples.push(Sample { state: s, omega_dot: plant.omega_dot(u), gamma_rw: plant.delivered_torque(u) });
        commanded.push(u);
        compensation.push(comp_cmd);
        reference.push(theta_ref);
        omega_measured.push(omega_deg);
        accel_series.push(accel.measure(plant.omega_dot(u)));
        pressure.push(p);

        if let Some(limits) = &cfg.recovery {
            if recovery_check(&s, limits) {
                m.recovery_at = Some(s.t);
                m.completed = false;
                break;
            }
        }
        if k + 1 < n {
            let step = plant.step(u, oracle)?;
            if let Compensation::Tdc { est, .. } = &mut comp {
                est.push_torque(step.avg_torque);
            }
        }
    }

    m.samples = samples.len();
    let trajectory = Trajectory { dt, samples };
    if m.completed {
        let t_from = maneuver_run.command_end();
        let times: Vec<f64> = trajectory.samples.iter().map(|s| s.state.t).collect();
        let ok: Vec<bool> = trajectory
            .samples
            .iter()
            .enumerate()
            .map(|(k, s)| {
                (s.state.omega - ref_omega[k]).abs() <= cfg.settle.rate_tol
                    && (s.state.theta - ref_theta[k]).abs() <= cfg.settle.angle_tol
            })
            .collect();
        m.settling_time_omega = settle_after(&times, &ok, t_from, cfg.settle.hold);
        let spec = SettlingSpec { band: cfg.settle.slosh_band, command_end: Some(t_from), hold: cfg.settle.hold };
        let ts = settling_time_with(&trajectory, Channel::GammaS, &spec)?;
        if ts.is_finite() {
            m.fluid_settled_at = Some(ts);
            m.settling_time_slosh = Some((ts - t_from).max(0.0));
        }
    }

    Ok(ExperimentRecord {
        record_version: RECORD_VERSION,
        controller: kind.label(),
        predictor: predictor_label(&inner, predictor).into(),
        axis,
        seed,
        maneuver: maneuver_run,
        trajectory,
        commanded,
        compensation,
        reference,
        omega_measured,
        accel: accel_series,
        pressure,
        metrics: m,
    })
}

/// Label of the predictor in use; controllers without one report `none`.
pub fn predictor_label(inner: &ControllerKind, predictor: &SloshPredictor) -> &'static str {
    if *inner == ControllerKind::MachineLearning {
        predictor.label()
    } else {
        "none"
    }
}

fn shaper_z(s: &Shaper) -> [f64; 2] {
    match s {
        Shaper::Direct => [0.0; 2],
        Shaper::Inverse(i) => i.state(),
    }
}
