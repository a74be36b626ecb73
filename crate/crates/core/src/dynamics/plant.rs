use super::{rhs, Disturbances, EmmParams, SatelliteState, Sample, Trajectory};
use crate::actuator::{filter_output, filter_rhs, ActuatorModel, CommandProfile, RwFilterState, TORQUE_MAX};
use crate::error::{Error, Result};
use crate::ode::{rk4_step, sample_count};
use crate::scalar::Real;

/// Result of one plant step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantStep<T> {
    /// Delivered wheel torque averaged over the step, N·m.
    pub avg_torque: T,
}

/// Plant and wheel integrated together: `[θ, Ω, Γs, Γ̇s, x1, x2, ∫Γ dt]`.
///
/// The commanded torque is held over each step. With the filtered actuator the
/// wheel states are part of the RK4 state, so delivered torque varies smoothly
/// inside the step.
#[derive(Debug, Clone)]
pub struct Plant<T> {
    pub params: EmmParams<T>,
    pub dist: Disturbances<T>,
    pub actuator: ActuatorModel,
    pub torque_max: T,
    pub dt: T,
    x: [T; 7],
    t0: T,
    step: usize,
}

impl<T: Real> Plant<T> {
    pub fn new(
        params: EmmParams<T>,
        dist: Disturbances<T>,
        actuator: ActuatorModel,
        dt: T,
    ) -> Result<Self> {
        params.validate()?;
        if !(dt > T::zero() && dt <= T::lit(0.1)) {
            return Err(Error::config(format!("dt = {dt} outside (0, 0.1]")));
        }
        Ok(Self {
            params,
            dist,
            actuator,
            torque_max: T::lit(TORQUE_MAX),
            dt,
            x: [T::zero(); 7],
            t0: T::zero(),
            step: 0,
        })
    }

    pub fn with_initial(mut self, s: &SatelliteState<T>) -> Self {
        self.x[..4].copy_from_slice(&s.vector());
        self.t0 = s.t;
        self
    }

    pub fn t(&self) -> T {
        self.t0 + T::from_usize_lossy(self.step) * self.dt
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn state(&self) -> SatelliteState<T> {
        SatelliteState::from_vector([self.x[0], self.x[1], self.x[2], self.x[3]], self.t())
    }

    pub fn filter_state(&self) -> RwFilterState<T> {
        RwFilterState {
            x1: self.x[4],
            x2: self.x[5],
        }
    }

    #[inline]
    fn delivered(&self, x: &[T; 7], commanded: T, cancel_slosh: bool) -> T {
        let mut y = match self.actuator {
            ActuatorModel::Ideal => commanded,
            ActuatorModel::Filtered => filter_output(x[4], x[5]),
        };
        if cancel_slosh {
            y = y - x[2];
        }
        y.max(-self.torque_max).min(self.torque_max)
    }

    /// Delivered torque at the current instant if `commanded` is applied now.
    pub fn delivered_torque(&self, commanded: T) -> T {
        self.delivered(&self.x, commanded, false)
    }

    pub fn omega_dot(&self, commanded: T) -> T {
        (self.delivered_torque(commanded) + self.x[2] + self.dist.gamma_d) / self.params.i_sat
    }

    /// Advances one step with `commanded` held.
    ///
    /// `cancel_slosh` subtracts the true slosh torque from the delivered torque
    /// continuously, an idealized compensator used as a reference.
    pub fn step(&mut self, commanded: T, cancel_slosh: bool) -> Result<PlantStep<T>> {
        if !commanded.is_finite() {
            return Err(Error::StateCorruption {
                field: "gamma_rw",
                value: commanded.to_f64_lossy(),
            });
        }
        let p = self.params;
        let gd = self.dist.gamma_d;
        let filtered = self.actuator == ActuatorModel::Filtered;
        let f = |_t: T, x: &[T; 7]| {
            let y = self.delivered(x, commanded, cancel_slosh);
            let body = rhs(&[x[0], x[1], x[2], x[3]], y, &p, gd);
            let wheel = if filtered {
                filter_rhs(x[4], x[5], commanded)
            } else {
                [T::zero(); 2]
            };
            [body[0], body[1], body[2], body[3], wheel[0], wheel[1], y]
        };
        let t = self.t();
        let mut next = rk4_step(f, t, &self.x, self.dt);
        let avg_torque = next[6] / self.dt;
        next[6] = T::zero();
        self.step += 1;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                step: self.step,
                t: self.t().to_f64_lossy(),
            });
        }
        self.x = next;
        Ok(PlantStep { avg_torque })
    }
}

/// Open-loop response to a command profile through the given actuator.
///
/// Samples record the delivered torque at each instant.
pub fn simulate_profile<T: Real>(
    profile: &CommandProfile<T>,
    params: &EmmParams<T>,
    dist: &Disturbances<T>,
    actuator: ActuatorModel,
    dt: T,
    t_end: T,
) -> Result<Trajectory<T>> {
    if !(t_end > T::zero()) {
        return Err(Error::config("t_end must be positive"));
    }
    let mut plant = Plant::new(*params, *dist, actuator, dt)?;
    let n = sample_count(t_end, dt);
    let half = dt / T::lit(2.0);
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let t = plant.t();
        let u = profile.torque_at(t + half);
        samples.push(Sample {
            state: plant.state(),
            omega_dot: plant.omega_dot(u),
            gamma_rw: plant.delivered_torque(u),
        });
        if k + 1 < n {
            plant.step(u, false)?;
        }
    }
    Ok(Trajectory { dt, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuator::bang_stop_bang;
    use crate::dynamics::integrate;

    #[test]
    fn ideal_actuator_matches_integrate() {
        let p = EmmParams::uncalibrated(0.058f64);
        let prof = bang_stop_bang(0.003, 6.0, 10.0, 1.0, 1.0).unwrap();
        let a = simulate_profile(&prof, &p, &Disturbances::none(), ActuatorModel::Ideal, 0.01, 30.0)
            .unwrap();
        let b = integrate(
            &SatelliteState::at_rest(),
            |t| prof.torque_at(t),
            &p,
            &Disturbances::none(),
            0.01,
            30.0,
        )
        .unwrap();
        assert_eq!(a.len(), b.len());
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            assert!((sa.state.theta - sb.state.theta).abs() < 1e-12);
            assert!((sa.state.gamma_s - sb.state.gamma_s).abs() < 1e-15);
        }
    }

    #[test]
    fn average_torque_is_exact_for_ideal_actuator() {
        let p = EmmParams::uncalibrated(0.058f64);
        let mut plant = Plant::new(p, Disturbances::none(), ActuatorModel::Ideal, 0.01).unwrap();
        let step = plant.step(0.004, false).unwrap();
        assert!((step.avg_torque - 0.004).abs() < 1e-15);
        let step = plant.step(0.02, false).unwrap();
        assert!((step.avg_torque - TORQUE_MAX).abs() < 1e-15);
    }

    #[test]
    fn filtered_delivery_lags_command() {
        let p = EmmParams::uncalibrated(0.058f64);
        let mut plant = Plant::new(p, Disturbances::none(), ActuatorModel::Filtered, 0.01).unwrap();
        assert_eq!(plant.delivered_torque(0.006), 0.0);
        for _ in 0..10 {
            plant.step(0.006, false).unwrap();
        }
        let y = plant.delivered_torque(0.006);
        assert!(y > 0.0 && y < 0.006);
    }
}
