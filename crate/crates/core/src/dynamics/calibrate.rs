use super::{simulate_profile, Disturbances, EmmParams};
use crate::actuator::{bang_stop_bang, ActuatorModel, CommandProfile, TORQUE_MAX};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions<T> {
    pub dt: T,
    pub actuator: ActuatorModel,
    /// Simulated time after the last bang, s.
    pub tail: T,
    /// Accepted relative miss of the target peak.
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Real> Default for CalibrationOptions<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(0.01),
            actuator: ActuatorModel::Filtered,
            tail: T::lit(30.0),
            tolerance: T::lit(0.01),
            max_iterations: 60,
        }
    }
}

/// Expected peak slosh torque under the strongest excitation, N·m.
pub const SLOSH_TORQUE_RANGE: (f64, f64) = (1e-4, 1e-3);

/// Strongest short excitation: full torque, 6 s bangs, 10 s coast, starting at 30 s.
pub fn calibration_profile<T: Real>() -> CommandProfile<T> {
    bang_stop_bang(T::lit(TORQUE_MAX), T::lit(6.0), T::lit(10.0), T::lit(30.0), T::one())
        .expect("calibration profile is valid")
}

/// Uncalibrated oscillator for `i_sat`, scaled onto [`SLOSH_TORQUE_RANGE`].
pub fn calibrated_default<T: Real>(i_sat: T) -> Result<EmmParams<T>> {
    calibrate_emm(
        (T::lit(SLOSH_TORQUE_RANGE.0), T::lit(SLOSH_TORQUE_RANGE.1)),
        &calibration_profile(),
        &EmmParams::uncalibrated(i_sat),
        &CalibrationOptions::default(),
    )
}

/// Peak |Γs| of the open-loop response to `profile`.
pub fn peak_slosh<T: Real>(
    profile: &CommandProfile<T>,
    params: &EmmParams<T>,
    opts: &CalibrationOptions<T>,
) -> Result<T> {
    let t_end = profile.end_time() + opts.tail;
    let traj = simulate_profile(
        profile,
        params,
        &Disturbances::none(),
        opts.actuator,
        opts.dt,
        t_end,
    )?;
    Ok(traj.peak_gamma_s())
}

fn scaled<T: Real>(base: &EmmParams<T>, s: T) -> EmmParams<T> {
    EmmParams {
        a_s: base.a_s * s,
        b_s: base.b_s * s,
        ..*base
    }
}

/// Scales `a_s` and `b_s` together so the peak slosh torque under `profile`
/// lands on the geometric mean of `target`. Stiffness and damping are untouched.
pub fn calibrate_emm<T: Real>(
    target: (T, T),
    profile: &CommandProfile<T>,
    base: &EmmParams<T>,
    opts: &CalibrationOptions<T>,
) -> Result<EmmParams<T>> {
    let (lo_t, hi_t) = target;
    if !(lo_t > T::zero() && hi_t >= lo_t && hi_t.is_finite()) {
        return Err(Error::config("target interval must be positive and ordered"));
    }
    base.validate()?;
    let goal = (lo_t * hi_t).sqrt();
    let peak_at = |s: T| peak_slosh(profile, &scaled(base, s), opts);
    let close = |p: T| ((p / goal) - T::one()).abs() <= opts.tolerance;
    let fail = |achieved: T, iterations| Error::Calibration {
        iterations,
        achieved: achieved.to_f64_lossy(),
    };

    let two = T::lit(2.0);
    let mut iterations = 1;
    let mut s = T::one();
    let mut p = peak_at(s)?;
    if p == T::zero() {
        return Err(fail(p, iterations));
    }
    if close(p) {
        return Ok(scaled(base, s));
    }
    // Bracket [lo, hi] with peak(lo) < goal < peak(hi).
    let (mut lo, mut hi) = (s, s);
    if p < goal {
        while p < goal {
            if iterations >= opts.max_iterations {
                return Err(fail(p, iterations));
            }
            lo = s;
            s = s * two;
            p = peak_at(s)?;
            iterations += 1;
            if close(p) {
                return Ok(scaled(base, s));
            }
        }
        hi = s;
    } else {
        while p > goal {
            if iterations >= opts.max_iterations {
                return Err(fail(p, iterations));
            }
            hi = s;
            s = s / two;
            p = peak_at(s)?;
            iterations += 1;
            if close(p) {
                return Ok(scaled(base, s));
            }
        }
        lo = s;
    }
    let mut best = (p, s);
    for _ in 0..opts.max_iterations {
        let mid = (lo * hi).sqrt();
        let pm = peak_at(mid)?;
        if ((pm / goal) - T::one()).abs() < ((best.0 / goal) - T::one()).abs() {
            best = (pm, mid);
        }
        if close(pm) {
            return Ok(scaled(base, mid));
        }
        if pm < goal {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(fail(best.0, iterations + opts.max_iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuator::{bang_stop_bang, Axis, CommandProfile};

    fn max_profile() -> CommandProfile<f64> {
        bang_stop_bang(0.006, 6.0, 10.0, 30.0, 1.0).unwrap()
    }

    #[test]
    fn degenerate_interval_hits_the_point() {
        let base = EmmParams::uncalibrated(0.0542);
        let opts = CalibrationOptions::default();
        let p = calibrate_emm((5e-4, 5e-4), &max_profile(), &base, &opts).unwrap();
        let peak = peak_slosh(&max_profile(), &p, &opts).unwrap();
        assert!((peak / 5e-4 - 1.0).abs() <= 0.05, "{peak}");
        assert_eq!(p.k_s, base.k_s);
        assert_eq!(p.c_s, base.c_s);
        assert!((p.a_s / p.b_s - base.a_s / base.b_s).abs() < 1e-12);
    }

    #[test]
    fn silent_profile_cannot_calibrate() {
        let base = EmmParams::uncalibrated(0.0542);
        let err = calibrate_emm(
            (1e-4, 1e-3),
            &CommandProfile::empty(Axis::X),
            &base,
            &CalibrationOptions { tail: 5.0, ..Default::default() },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Calibration { achieved, .. } if achieved == 0.0));
    }

    #[test]
    fn bad_target_rejected() {
        let base = EmmParams::uncalibrated(0.0542);
        let opts = CalibrationOptions::default();
        assert!(calibrate_emm((1e-3, 1e-4), &max_profile(), &base, &opts).is_err());
        assert!(calibrate_emm((0.0, 1e-4), &max_profile(), &base, &opts).is_err());
    }
}
