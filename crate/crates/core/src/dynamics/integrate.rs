use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{rhs, Disturbances, EmmParams, SatelliteState};
use crate::error::{Error, Result};
use crate::ode::{rk4_step, sample_count};
use crate::scalar::Real;

/// One trajectory sample: state, body acceleration, and the wheel torque acting from this instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample<T> {
    pub state: SatelliteState<T>,
    pub omega_dot: T,
    pub gamma_rw: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub dt: T,
    pub samples: Vec<Sample<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&Sample<T>> {
        self.samples.last()
    }

    pub fn times(&self) -> impl Iterator<Item = T> + '_ {
        self.samples.iter().map(|s| s.state.t)
    }

    pub fn gamma_s(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.state.gamma_s).collect()
    }

    pub fn omega(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.state.omega).collect()
    }

    pub fn peak_gamma_s(&self) -> T {
        self.samples
            .iter()
            .fold(T::zero(), |m, s| m.max(s.state.gamma_s.abs()))
    }

    /// Writes `t,theta,omega,omega_dot,gamma_s,gamma_s_dot,gamma_rw`, SI units, 9 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,theta,omega,omega_dot,gamma_s,gamma_s_dot,gamma_rw")?;
        for s in &self.samples {
            let row = [
                s.state.t,
                s.state.theta,
                s.state.omega,
                s.omega_dot,
                s.state.gamma_s,
                s.state.gamma_s_dot,
                s.gamma_rw,
            ];
            let cells: Vec<String> = row
                .iter()
                .map(|v| format!("{:.8e}", v.to_f64_lossy()))
                .collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Fixed-step RK4 integration of the coupled plant from `initial` to `t_end`.
///
/// `torque_source(t)` is sampled once per step at the step midpoint and held for
/// the whole step, so piecewise-constant commands switching on the step grid are
/// reproduced exactly. Sample `k` sits at `initial.t + k·dt`.
pub fn integrate<T: Real>(
    initial: &SatelliteState<T>,
    mut torque_source: impl FnMut(T) -> T,
    params: &EmmParams<T>,
    dist: &Disturbances<T>,
    dt: T,
    t_end: T,
) -> Result<Trajectory<T>> {
    if !(dt > T::zero() && dt <= T::lit(0.1)) {
        return Err(Error::config(format!("dt = {dt} outside (0, 0.1]")));
    }
    if !(t_end > T::zero()) {
        return Err(Error::config("t_end must be positive"));
    }
    params.validate()?;
    initial.check_finite()?;

    let n = sample_count(t_end, dt);
    let t0 = initial.t;
    let half = dt / T::lit(2.0);
    let gd = dist.gamma_d;
    let mut samples = Vec::with_capacity(n);
    let mut x = initial.vector();
    for k in 0..n {
        let t = t0 + T::from_usize_lossy(k) * dt;
        let u = torque_source(t + half);
        let omega_dot = (u + x[2] + gd) / params.i_sat;
        samples.push(Sample {
            state: SatelliteState::from_vector(x, t),
            omega_dot,
            gamma_rw: u,
        });
        if k + 1 == n {
            break;
        }
        x = rk4_step(|_, y| rhs(y, u, params, gd), t, &x, dt);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                step: k + 1,
                t: (t + dt).to_f64_lossy(),
            });
        }
    }
    Ok(Trajectory { dt, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic(k_s: f64) -> EmmParams<f64> {
        EmmParams {
            a_s: 0.0,
            b_s: 0.0,
            c_s: 0.0,
            k_s,
            i_sat: 0.0542,
        }
    }

    #[test]
    fn zero_input_stays_flat() {
        let p = EmmParams::uncalibrated(0.0542f64);
        let init = SatelliteState {
            theta: 0.3,
            ..SatelliteState::at_rest()
        };
        let traj = integrate(&init, |_| 0.0, &p, &Disturbances::none(), 0.01, 100.0).unwrap();
        assert_eq!(traj.len(), 10_001);
        for s in &traj.samples {
            assert_eq!(s.state.theta, 0.3);
            assert_eq!(s.state.omega, 0.0);
            assert_eq!(s.state.gamma_s, 0.0);
        }
        assert!((traj.last().unwrap().state.t - 100.0).abs() < 1e-9);
    }

    #[test]
    fn length_is_floor_plus_one() {
        let p = EmmParams::uncalibrated(0.0542f64);
        let init = SatelliteState::at_rest();
        let traj = integrate(&init, |_| 0.0, &p, &Disturbances::none(), 0.03, 1.0).unwrap();
        assert_eq!(traj.len(), 34);
    }

    #[test]
    fn free_oscillation_keeps_period_and_amplitude() {
        let k_s = 39.48;
        let p = harmonic(k_s);
        let g0 = 1e-4;
        let init = SatelliteState {
            gamma_s: g0,
            ..SatelliteState::at_rest()
        };
        let w = k_s.sqrt();
        let period = 2.0 * std::f64::consts::PI / w;
        let t_end = 10.0 * period;
        let traj = integrate(&init, |_| 0.0, &p, &Disturbances::none(), 0.001, t_end).unwrap();
        for s in &traj.samples {
            // Energy of the oscillator must stay at its initial value.
            let amp = (s.state.gamma_s.powi(2) + (s.state.gamma_s_dot / w).powi(2)).sqrt();
            assert!((amp / g0 - 1.0).abs() < 1e-6);
            let exact = g0 * (w * s.state.t).cos();
            assert!((s.state.gamma_s - exact).abs() < 1e-6 * g0);
        }
    }

    #[test]
    fn input_rejected_when_step_out_of_range() {
        let p = EmmParams::uncalibrated(0.0542f64);
        let init = SatelliteState::at_rest();
        assert!(integrate(&init, |_| 0.0, &p, &Disturbances::none(), 0.2, 1.0).is_err());
        assert!(integrate(&init, |_| 0.0, &p, &Disturbances::none(), 0.01, 0.0).is_err());
    }

    #[test]
    fn overflow_reports_step() {
        let p = EmmParams::uncalibrated(0.0542f64);
        let init = SatelliteState::at_rest();
        let err = integrate(&init, |_| f64::MAX, &p, &Disturbances::none(), 0.01, 1.0).unwrap_err();
        assert!(matches!(err, Error::Diverged { step: 1, .. }), "{err:?}");
    }

    #[test]
    fn csv_header_and_precision() {
        let p = EmmParams::uncalibrated(0.0542f64);
        let traj = integrate(
            &SatelliteState::at_rest(),
            |t| if t < 0.05 { 0.006 } else { 0.0 },
            &p,
            &Disturbances::none(),
            0.01,
            0.1,
        )
        .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,theta,omega,omega_dot,gamma_s,gamma_s_dot,gamma_rw"
        );
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 7);
        assert_eq!(first[6], "6.00000000e-3");
        assert_eq!(text.lines().count(), 12);
    }
}
