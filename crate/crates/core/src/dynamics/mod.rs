//! Single-axis rigid body coupled to an equivalent-mechanical-model slosh oscillator.
//!
//! The slosh torque obeys
//!
//! ```text
//! Γ̈s = −As·Ω − Bs·Ω̇ − Cs·Γ̇s − Ks·Γs
//! Ω̇  = (ΓRW + Γs + Γd) / I
//! ```
//!
//! with Ω̇ substituted algebraically into the first line on every evaluation.

mod calibrate;
mod integrate;
mod plant;
mod settling;
mod tank;

pub use calibrate::{
    calibrate_emm, calibrated_default, calibration_profile, peak_slosh, CalibrationOptions,
    SLOSH_TORQUE_RANGE,
};
pub use integrate::{integrate, Sample, Trajectory};
pub use plant::{simulate_profile, Plant, PlantStep};
pub use settling::{settling_time, settling_time_with, Channel, SettlingSpec};
pub use tank::{tank_volume, TankGeometry, TankReport, QUOTED_FLUID_VOLUME};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Extended state `[θ, Ω, Γs, Γ̇s]` plus time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SatelliteState<T> {
    pub theta: T,
    pub omega: T,
    pub gamma_s: T,
    pub gamma_s_dot: T,
    pub t: T,
}

impl<T: Real> SatelliteState<T> {
    pub fn at_rest() -> Self {
        Self {
            theta: T::zero(),
            omega: T::zero(),
            gamma_s: T::zero(),
            gamma_s_dot: T::zero(),
            t: T::zero(),
        }
    }

    pub(crate) fn vector(&self) -> [T; 4] {
        [self.theta, self.omega, self.gamma_s, self.gamma_s_dot]
    }

    pub(crate) fn from_vector(x: [T; 4], t: T) -> Self {
        Self {
            theta: x[0],
            omega: x[1],
            gamma_s: x[2],
            gamma_s_dot: x[3],
            t,
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        let fields = [
            ("theta", self.theta),
            ("omega", self.omega),
            ("gamma_s", self.gamma_s),
            ("gamma_s_dot", self.gamma_s_dot),
            ("t", self.t),
        ];
        for (field, value) in fields {
            if !value.is_finite() {
                return Err(Error::StateCorruption {
                    field,
                    value: value.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }
}

/// Time derivative of [`SatelliteState`]; `omega_dot` is also the body angular acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative<T> {
    pub theta_dot: T,
    pub omega_dot: T,
    pub gamma_s_dot: T,
    pub gamma_s_ddot: T,
    pub t_dot: T,
}

/// Slosh oscillator coefficients and body inertia. Held constant over one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmmParams<T> {
    /// Coupling to body rate, N·m/s² per rad/s.
    pub a_s: T,
    /// Coupling to body acceleration, N·m/s² per rad/s².
    pub b_s: T,
    /// Damping, 1/s.
    pub c_s: T,
    /// Stiffness, 1/s².
    pub k_s: T,
    /// Single-axis moment of inertia, kg·m².
    pub i_sat: T,
}

/// CAD-derived body inertia, kg·m².
pub const I_SAT_CAD: f64 = 0.0542;
/// Inertia used for the 360° slew study, kg·m².
pub const I_SAT_SLEW: f64 = 0.058;
/// Nominal slosh mode frequency, Hz.
pub const SLOSH_FREQUENCY_HZ: f64 = 1.0;
/// Nominal slosh damping ratio.
pub const SLOSH_DAMPING_RATIO: f64 = 0.05;

impl<T: Real> EmmParams<T> {
    /// Uncalibrated shape: 1 Hz mode, ζ = 0.05, coupling ratio As/Bs = 0.05.
    ///
    /// The coupling magnitudes are meant to be scaled by [`calibrate_emm`].
    pub fn uncalibrated(i_sat: T) -> Self {
        let wn = T::lit(2.0) * T::PI() * T::lit(SLOSH_FREQUENCY_HZ);
        Self {
            a_s: T::lit(0.05),
            b_s: T::one(),
            c_s: T::lit(2.0 * SLOSH_DAMPING_RATIO) * wn,
            k_s: wn * wn,
            i_sat,
        }
    }

    /// Same oscillator with the coupling removed.
    pub fn decoupled(&self) -> Self {
        Self {
            a_s: T::zero(),
            b_s: T::zero(),
            ..*self
        }
    }

    pub fn natural_frequency_hz(&self) -> T {
        self.k_s.sqrt() / (T::lit(2.0) * T::PI())
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.a_s, self.b_s, self.c_s, self.k_s, self.i_sat];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("EMM coefficients must be finite"));
        }
        if self.i_sat <= T::zero() {
            return Err(Error::config("i_sat must be positive"));
        }
        if self.k_s <= T::zero() {
            return Err(Error::config("k_s must be positive"));
        }
        if self.c_s < T::zero() {
            return Err(Error::config("c_s must be non-negative"));
        }
        let f = self.natural_frequency_hz();
        if !(f > T::lit(0.1) && f < T::lit(5.0)) {
            return Err(Error::config(format!(
                "slosh natural frequency {f} Hz outside (0.1, 5) Hz"
            )));
        }
        Ok(())
    }
}

/// Constant external torque over one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbances<T> {
    pub gamma_d: T,
}

impl<T: Real> Disturbances<T> {
    pub fn none() -> Self {
        Self { gamma_d: T::zero() }
    }
}

/// Right-hand side on the bare 4-vector; no validation.
#[inline]
pub(crate) fn rhs<T: Real>(x: &[T; 4], gamma_rw: T, p: &EmmParams<T>, gamma_d: T) -> [T; 4] {
    let omega_dot = (gamma_rw + x[2] + gamma_d) / p.i_sat;
    let gamma_s_ddot = -p.a_s * x[1] - p.b_s * omega_dot - p.c_s * x[3] - p.k_s * x[2];
    [x[1], omega_dot, x[3], gamma_s_ddot]
}

/// State derivative of the coupled plant for wheel torque `gamma_rw`.
pub fn emm_derivatives<T: Real>(
    state: &SatelliteState<T>,
    gamma_rw: T,
    params: &EmmParams<T>,
    dist: &Disturbances<T>,
) -> Result<StateDerivative<T>> {
    state.check_finite()?;
    if !gamma_rw.is_finite() {
        return Err(Error::StateCorruption {
            field: "gamma_rw",
            value: gamma_rw.to_f64_lossy(),
        });
    }
    if !dist.gamma_d.is_finite() {
        return Err(Error::StateCorruption {
            field: "gamma_d",
            value: dist.gamma_d.to_f64_lossy(),
        });
    }
    let d = rhs(&state.vector(), gamma_rw, params, dist.gamma_d);
    Ok(StateDerivative {
        theta_dot: d[0],
        omega_dot: d[1],
        gamma_s_dot: d[2],
        gamma_s_ddot: d[3],
        t_dot: T::one(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> EmmParams<f64> {
        EmmParams::uncalibrated(I_SAT_CAD)
    }

    #[test]
    fn equilibrium_has_zero_derivative() {
        let d = emm_derivatives(&SatelliteState::at_rest(), 0.0, &params(), &Disturbances::none())
            .unwrap();
        assert_eq!(
            [d.theta_dot, d.omega_dot, d.gamma_s_dot, d.gamma_s_ddot],
            [0.0; 4]
        );
        assert_eq!(d.t_dot, 1.0);
    }

    #[test]
    fn slosh_torque_accelerates_body() {
        let s = SatelliteState {
            gamma_s: 1e-3,
            ..SatelliteState::at_rest()
        };
        let d = emm_derivatives(&s, 0.0, &params(), &Disturbances::none()).unwrap();
        assert!((d.omega_dot - 1.845e-2).abs() < 1e-5);
        // Same arithmetic as the minimum-disturbance acceleration 0.000134 / 0.0542.
        let s = SatelliteState {
            gamma_s: 0.000134,
            ..SatelliteState::at_rest()
        };
        let d = emm_derivatives(&s, 0.0, &params(), &Disturbances::none()).unwrap();
        assert!((d.omega_dot - 2.47e-3).abs() < 5e-6);
    }

    #[test]
    fn rate_coupling_only_through_a_s() {
        let alpha = 0.37f64;
        let p = EmmParams {
            a_s: alpha,
            b_s: 0.8,
            c_s: 0.2,
            k_s: 39.48,
            i_sat: 0.0542,
        };
        let s = SatelliteState {
            omega: 0.1,
            ..SatelliteState::at_rest()
        };
        let d = emm_derivatives(&s, 0.0, &p, &Disturbances::none()).unwrap();
        // Ω̇ = 0, Γs = Γ̇s = 0 ⇒ Γ̈s = −0.1·α.
        assert_eq!(d.omega_dot, 0.0);
        assert!((d.gamma_s_ddot + 0.1 * alpha).abs() < 1e-15);
    }

    #[test]
    fn acceleration_is_substituted_without_lag() {
        let p = params();
        let s = SatelliteState::at_rest();
        let d = emm_derivatives(&s, 0.006, &p, &Disturbances::none()).unwrap();
        assert!((d.gamma_s_ddot + p.b_s * 0.006 / p.i_sat).abs() < 1e-12);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let s = SatelliteState {
            omega: f64::NAN,
            ..SatelliteState::at_rest()
        };
        let err = emm_derivatives(&s, 0.0, &params(), &Disturbances::none()).unwrap_err();
        assert!(matches!(err, Error::StateCorruption { field: "omega", .. }));
        let err = emm_derivatives(
            &SatelliteState::at_rest(),
            f64::INFINITY,
            &params(),
            &Disturbances::none(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::StateCorruption { field: "gamma_rw", .. }));
    }

    #[test]
    fn defaults_are_a_one_hertz_mode() {
        let p = params();
        assert!((p.k_s - 39.478).abs() < 1e-3);
        assert!((p.natural_frequency_hz() - 1.0).abs() < 1e-12);
        p.validate().unwrap();
        let stiff = EmmParams { k_s: 1e4, ..p };
        assert!(stiff.validate().is_err());
        assert!(EmmParams { i_sat: 0.0, ..p }.validate().is_err());
        assert!(EmmParams { c_s: -1.0, ..p }.validate().is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let p = EmmParams::<f32>::uncalibrated(0.0542);
        let s = SatelliteState::<f32> {
            gamma_s: 1e-3,
            ..SatelliteState::at_rest()
        };
        let d = emm_derivatives(&s, 0.0, &p, &Disturbances::none()).unwrap();
        assert!((d.omega_dot - 1.845e-2).abs() < 1e-5);
    }
}
