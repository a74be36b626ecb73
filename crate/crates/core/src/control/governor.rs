use serde::{Deserialize, Serialize};

use super::{CompensationShaping, PidGains, SHAPER_LAMBDA};
use crate::actuator::{filter_output, filter_rhs, ActuatorModel};
use crate::dynamics::{rhs, EmmParams};
use crate::error::{Error, Result};
use crate::ode::rk4_step;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GovernorConstraints {
    /// Bound on the commanded wheel torque, N·m.
    pub torque_limit: f64,
    /// Bound on the wall-pressure proxy, psi.
    pub pressure_limit: f64,
    /// Prediction horizon, s.
    pub horizon: f64,
    /// Grid spacing for κ.
    pub kappa_resolution: f64,
    /// Relative tightening of both limits inside the prediction, covering
    /// sensor noise the linear model does not see.
    pub margin: f64,
}

impl Default for GovernorConstraints {
    fn default() -> Self {
        Self {
            torque_limit: crate::actuator::TORQUE_MAX,
            pressure_limit: 0.5,
            horizon: 5.0,
            kappa_resolution: 1.0 / 64.0,
            margin: 0.02,
        }
    }
}

impl GovernorConstraints {
    pub fn unconstrained() -> Self {
        Self { torque_limit: f64::INFINITY, pressure_limit: f64::INFINITY, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.torque_limit > 0.0 && self.pressure_limit > 0.0) {
            return Err(Error::config("governor limits must be positive"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config("governor horizon must be positive"));
        }
        if !(self.kappa_resolution > 0.0 && self.kappa_resolution <= 1.0) {
            return Err(Error::config("kappa resolution must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.margin) {
            return Err(Error::config("governor margin must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// How the prediction model treats slosh compensation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompensationModel {
    None,
    /// An exact estimate passed through the given shaping into the wheel command.
    Estimate(CompensationShaping),
    /// Slosh torque removed at the plant input, as with oracle cancellation.
    Cancelled,
}

const N: usize = 8;
type Vec8 = [f64; N];

/// Discrete closed-loop prediction model: plant, wheel filter and PD law with
/// the applied reference as the only input.
///
/// State is `[θ, Ω, Γs, Γ̇s, x1, x2, z1, z2]`; `z` is the compensation
/// shaper's internal filter copy. With a compensation shaping the slosh
/// estimate is taken to be exact, as the governor design assumes.
#[derive(Debug, Clone)]
pub struct LinearPrediction {
    a: [Vec8; N],
    g: Vec8,
    /// Commanded torque is `k·x + k_p·v`.
    k: Vec8,
    k_p: f64,
    /// Pressure proxy per unit slosh torque, psi/(N·m).
    pub psi_per_nm: f64,
    steps: usize,
    step_u: Vec<f64>,
    step_gs: Vec<f64>,
}

/// Plant, wheel filter and shaper copy with commands `u` (wheel) and `uc` (shaper) held.
fn lin_rhs(x: &Vec8, u: f64, uc: f64, p: &EmmParams<f64>, filtered: bool, cancel: bool) -> Vec8 {
    let y = if filtered { filter_output(x[4], x[5]) } else { u };
    let y = if cancel { y - x[2] } else { y };
    let body = rhs(&[x[0], x[1], x[2], x[3]], y, p, 0.0);
    let wheel = if filtered { filter_rhs(x[4], x[5], u) } else { [0.0; 2] };
    let copy = if filtered { filter_rhs(x[6], x[7], uc) } else { [0.0; 2] };
    [body[0], body[1], body[2], body[3], wheel[0], wheel[1], copy[0], copy[1]]
}

/// Compensation command as a linear function of the state, for an exact estimate.
fn compensation_row(model: CompensationModel, filtered: bool) -> Vec8 {
    let mut c = [0.0; N];
    match model {
        CompensationModel::None | CompensationModel::Cancelled => {}
        CompensationModel::Estimate(CompensationShaping::InverseActuator) if filtered => {
            // uc = (λ(Γs − y_z) − drift(z)) / gain
            let gain = filter_output(0.0, 1.0);
            let y_z = [filter_output(1.0, 0.0), filter_output(0.0, 1.0)];
            let f1 = filter_rhs(1.0, 0.0, 0.0);
            let f2 = filter_rhs(0.0, 1.0, 0.0);
            let drift = [filter_output(f1[0], f1[1]), filter_output(f2[0], f2[1])];
            c[2] = SHAPER_LAMBDA / gain;
            c[6] = (-SHAPER_LAMBDA * y_z[0] - drift[0]) / gain;
            c[7] = (-SHAPER_LAMBDA * y_z[1] - drift[1]) / gain;
        }
        CompensationModel::Estimate(_) => c[2] = 1.0,
    }
    c
}

fn mat_vec(a: &[Vec8; N], x: &Vec8) -> Vec8 {
    let mut out = [0.0; N];
    for (o, row) in out.iter_mut().zip(a) {
        *o = row.iter().zip(x).map(|(r, v)| r * v).sum();
    }
    out
}

fn dot(a: &Vec8, b: &Vec8) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearPrediction {
    pub fn new(
        params: &EmmParams<f64>,
        gains: &PidGains<f64>,
        actuator: ActuatorModel,
        dt: f64,
        horizon: f64,
        psi_per_nm: f64,
        compensation: CompensationModel,
    ) -> Result<Self> {
        params.validate()?;
        gains.validate()?;
        if !(dt > 0.0 && horizon > 0.0) {
            return Err(Error::config("prediction step and horizon must be positive"));
        }
        let filtered = actuator == ActuatorModel::Filtered;
        let cancel = compensation == CompensationModel::Cancelled;
        let step = |x: &Vec8, u: f64, uc: f64| {
            rk4_step(|_, s: &Vec8| lin_rhs(s, u, uc, params, filtered, cancel), 0.0, x, dt)
        };
        let mut phi = [[0.0; N]; N];
        for i in 0..N {
            let mut e = [0.0; N];
            e[i] = 1.0;
            let col = step(&e, 0.0, 0.0);
            for r in 0..N {
                phi[r][i] = col[r];
            }
        }
        let gamma_u = step(&[0.0; N], 1.0, 0.0);
        let gamma_c = step(&[0.0; N], 0.0, 1.0);
        let c = compensation_row(compensation, filtered);
        let mut k = [0.0; N];
        k[0] = -gains.k_p;
        k[1] = -gains.k_d;
        for i in 0..N {
            k[i] -= c[i];
        }
        let mut a = phi;
        for r in 0..N {
            for j in 0..N {
                a[r][j] += gamma_u[r] * k[j] + gamma_c[r] * c[j];
            }
        }
        let g = gamma_u.map(|v| v * gains.k_p);
        let steps = (horizon / dt).round().max(1.0) as usize;
        let mut model = Self {
            a,
            g,
            k,
            k_p: gains.k_p,
            psi_per_nm,
            steps,
            step_u: Vec::new(),
            step_gs: Vec::new(),
        };
        let (u, gs) = model.trajectory(&[0.0; N], 1.0);
        model.step_u = u;
        model.step_gs = gs;
        Ok(model)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Commanded torque for `j = 0..steps` and slosh torque for `j = 0..=steps`.
    pub fn trajectory(&self, x0: &Vec8, v: f64) -> (Vec<f64>, Vec<f64>) {
        let mut u = Vec::with_capacity(self.steps);
        let mut gs = Vec::with_capacity(self.steps + 1);
        let mut x = *x0;
        for _ in 0..self.steps {
            u.push(dot(&self.k, &x) + self.k_p * v);
            gs.push(x[2]);
            let ax = mat_vec(&self.a, &x);
            for i in 0..N {
                x[i] = ax[i] + self.g[i] * v;
            }
        }
        gs.push(x[2]);
        (u, gs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GovernorOutcome {
    pub applied: f64,
    pub kappa: f64,
    /// False when holding the previous reference is itself predicted to
    /// violate a limit.
    pub admissible: bool,
}

/// Largest κ ≥ 0 with `|a_j + κ·b_j| ≤ limit` for all `j`, or `None` if κ = 0 fails.
fn kappa_bound(a: &[f64], b: &[f64], scale: f64, limit: f64) -> Option<f64> {
    let mut kmax = f64::INFINITY;
    for (&aj, &bj) in a.iter().zip(b) {
        let bj = bj * scale;
        if aj.abs() > limit {
            return None;
        }
        if bj > 0.0 {
            kmax = kmax.min((limit - aj) / bj);
        } else if bj < 0.0 {
            kmax = kmax.min((-limit - aj) / bj);
        }
    }
    Some(kmax)
}

/// Scalar reference governor: moves the applied reference toward the request
/// by the largest grid fraction κ ∈ [0, 1] whose predicted commanded torque
/// and pressure proxy stay within the tightened limits over the horizon.
///
/// If holding `prev` already breaks the tightened limits κ is 0; the outcome
/// is flagged inadmissible only when it breaks the limits themselves.
pub fn governor_step(
    requested: f64,
    prev: f64,
    state: &[f64; 8],
    model: &LinearPrediction,
    constraints: &GovernorConstraints,
) -> GovernorOutcome {
    let delta = requested - prev;
    if delta == 0.0 {
        return GovernorOutcome { applied: prev, kappa: 1.0, admissible: true };
    }
    let shrink = 1.0 - constraints.margin;
    let torque_limit = constraints.torque_limit * shrink;
    let gs_limit = constraints.pressure_limit * shrink / model.psi_per_nm;
    let (free_u, free_gs) = model.trajectory(state, prev);
    let kt = kappa_bound(&free_u, &model.step_u, delta, torque_limit);
    let kp = kappa_bound(&free_gs, &model.step_gs, delta, gs_limit);
    let (kappa, admissible) = match (kt, kp) {
        (Some(a), Some(b)) => {
            let k = a.min(b).min(1.0);
            let res = constraints.kappa_resolution;
            let k = if k >= 1.0 { 1.0 } else { (k / res).floor() * res };
            (k.max(0.0), true)
        }
        _ => {
            let gs_hard = constraints.pressure_limit / model.psi_per_nm;
            let ok = free_u.iter().all(|u| u.abs() <= constraints.torque_limit)
                && free_gs.iter().all(|g| g.abs() <= gs_hard);
            (0.0, ok)
        }
    };
    let applied = if kappa == 1.0 { requested } else { prev + kappa * delta };
    GovernorOutcome { applied, kappa, admissible }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(horizon: f64) -> LinearPrediction {
        let p = EmmParams::uncalibrated(0.058);
        LinearPrediction::new(&p, &PidGains::default(), ActuatorModel::Filtered, 0.01, horizon, 1.0, CompensationModel::None)
            .unwrap()
    }

    #[test]
    fn trivial_cases() {
        let m = model(2.0);
        let c = GovernorConstraints::default();
        let out = governor_step(0.4, 0.4, &[0.0; 8], &m, &c);
        assert_eq!(out.applied, 0.4);
        let out = governor_step(3.0, 0.0, &[0.0; 8], &m, &GovernorConstraints::unconstrained());
        assert_eq!((out.applied, out.kappa), (3.0, 1.0));
    }

    #[test]
    fn tight_limit_slows_the_reference() {
        let m = model(5.0);
        let c = GovernorConstraints::default();
        let out = governor_step(2.0 * std::f64::consts::PI, 0.0, &[0.0; 8], &m, &c);
        assert!(out.admissible);
        assert!(out.kappa > 0.0 && out.kappa < 1.0, "{}", out.kappa);
        let (u, _) = m.trajectory(&[0.0; 8], out.applied);
        assert!(u.iter().all(|v| v.abs() <= c.torque_limit));
    }

    #[test]
    fn prediction_matches_plant() {
        use crate::dynamics::{Disturbances, Plant};
        let p = EmmParams::uncalibrated(0.058);
        let gains = PidGains::default();
        let m = LinearPrediction::new(&p, &gains, ActuatorModel::Filtered, 0.01, 3.0, 1.0, CompensationModel::None).unwrap();
        let (u_pred, gs_pred) = m.trajectory(&[0.0; 8], 0.2);
        let mut plant = Plant::new(p, Disturbances::none(), ActuatorModel::Filtered, 0.01).unwrap();
        for j in 0..m.steps() {
            let s = plant.state();
            let u = pid_cmd(s.theta, s.omega, 0.2, &gains);
            assert!((u - u_pred[j]).abs() < 1e-12);
            assert!((s.gamma_s - gs_pred[j]).abs() < 1e-12);
            plant.step(u, false).unwrap();
        }
    }

    fn pid_cmd(theta: f64, omega: f64, v: f64, g: &PidGains<f64>) -> f64 {
        super::super::pid_step(theta, v, omega, g, 0.0)
    }
}
