use serde::{Deserialize, Serialize};

use crate::dynamics::SatelliteState;
use crate::error::{Error, Result};

/// Thresholds that hand the vehicle to the safe-mode controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryLimits {
    /// rad/s
    pub omega_max: f64,
    /// N·m
    pub gamma_s_max: f64,
}

impl Default for RecoveryLimits {
    /// 26 deg/s, the highest rate the vehicle is expected to see, and a
    /// slosh torque above the largest simulated peak.
    fn default() -> Self {
        Self { omega_max: 26f64.to_radians(), gamma_s_max: 0.01 }
    }
}

impl RecoveryLimits {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_max > 0.0 && self.gamma_s_max > 0.0) {
            return Err(Error::config("recovery limits must be positive"));
        }
        Ok(())
    }
}

/// True when the rate or the slosh torque exceeds its limit.
pub fn recovery_check(state: &SatelliteState<f64>, limits: &RecoveryLimits) -> bool {
    state.omega.abs() > limits.omega_max || state.gamma_s.abs() > limits.gamma_s_max
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovery_examples() {
        let l = RecoveryLimits::default();
        assert!(!recovery_check(&SatelliteState::at_rest(), &l));
        let fast = SatelliteState { omega: 30f64.to_radians(), ..SatelliteState::at_rest() };
        assert!(recovery_check(&fast, &l));
        let spin = SatelliteState { omega: -30f64.to_radians(), ..SatelliteState::at_rest() };
        assert!(recovery_check(&spin, &l));
        let slosh = SatelliteState { gamma_s: 7.56e-3, ..SatelliteState::at_rest() };
        assert!(!recovery_check(&slosh, &l));
        let big = SatelliteState { gamma_s: -0.011, ..SatelliteState::at_rest() };
        assert!(recovery_check(&big, &l));
    }
}
