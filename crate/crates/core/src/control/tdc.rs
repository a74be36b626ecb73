use std::collections::VecDeque;

/// Time-delay estimate of the external torque on the body, N·m.
///
/// `omega` ends at the current sample `k`; `torque` holds step-average
/// delivered torques and ends at step `k-1`. With `c = k - delay_steps` the
/// estimate is `I·(Ω[c+1] − Ω[c−1])/(2·dt)` minus the mean delivered torque over
/// steps `c−1` and `c`, so a constant disturbance is recovered exactly.
/// Returns 0 until enough history exists.
pub fn tdc_estimate(omega: &[f64], torque: &[f64], i_sat: f64, dt: f64, delay_steps: usize) -> f64 {
    if delay_steps == 0 || omega.len() < delay_steps + 2 || torque.len() < delay_steps + 1 {
        return 0.0;
    }
    let k = omega.len() - 1;
    let c = k - delay_steps;
    let omega_dot = (omega[c + 1] - omega[c - 1]) / (2.0 * dt);
    let tk = torque.len() - 1;
    let tc = tk + 1 - delay_steps;
    let applied = 0.5 * (torque[tc - 1] + torque[tc]);
    i_sat * omega_dot - applied
}

/// Rolling form of [`tdc_estimate`].
#[derive(Debug, Clone)]
pub struct TdcEstimator {
    i_sat: f64,
    dt: f64,
    delay_steps: usize,
    omega: VecDeque<f64>,
    torque: VecDeque<f64>,
}

impl TdcEstimator {
    pub fn new(i_sat: f64, dt: f64, delay_steps: usize) -> Self {
        Self {
            i_sat,
            dt,
            delay_steps: delay_steps.max(1),
            omega: VecDeque::with_capacity(delay_steps + 3),
            torque: VecDeque::with_capacity(delay_steps + 3),
        }
    }

    /// Records the rate measured at the current sample.
    pub fn push_omega(&mut self, omega: f64) {
        if self.omega.len() == self.delay_steps + 2 {
            self.omega.pop_front();
        }
        self.omega.push_back(omega);
    }

    /// Records the average delivered torque of the step just completed.
    pub fn push_torque(&mut self, torque: f64) {
        if self.torque.len() == self.delay_steps + 1 {
            self.torque.pop_front();
        }
        self.torque.push_back(torque);
    }

    pub fn estimate(&mut self) -> f64 {
        self.omega.make_contiguous();
        self.torque.make_contiguous();
        tdc_estimate(
            self.omega.as_slices().0,
            self.torque.as_slices().0,
            self.i_sat,
            self.dt,
            self.delay_steps,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warm_up_returns_zero() {
        assert_eq!(tdc_estimate(&[0.0, 1.0], &[0.0], 1.0, 0.1, 1), 0.0);
        assert_eq!(tdc_estimate(&[0.0, 1.0, 2.0], &[0.0, 0.0], 1.0, 0.1, 0), 0.0);
    }

    #[test]
    fn constant_acceleration_hand_case() {
        // Ω rises 0.1 per 0.1 s under 0.3 N·m applied on I = 2: disturbance 2·1 − 0.3.
        let omega = [0.0, 0.1, 0.2, 0.3];
        let torque = [0.3, 0.3, 0.3];
        let e = tdc_estimate(&omega, &torque, 2.0, 0.1, 1);
        assert!((e - 1.7).abs() < 1e-12, "{e}");
    }

    #[test]
    fn rolling_matches_slices() {
        let mut est = TdcEstimator::new(0.05, 0.01, 2);
        let omega: Vec<f64> = (0..20).map(|k| (k as f64 * 0.3).sin()).collect();
        let torque: Vec<f64> = (0..20).map(|k| 1e-3 * (k as f64 * 0.7).cos()).collect();
        for k in 0..20 {
            est.push_omega(omega[k]);
            let e = est.estimate();
            assert_eq!(e, tdc_estimate(&omega[..=k], &torque[..k], 0.05, 0.01, 2));
            est.push_torque(torque[k]);
        }
    }
}
