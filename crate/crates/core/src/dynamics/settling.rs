use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    GammaS,
    Omega,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettlingSpec<T> {
    /// Fraction of the post-command peak the signal must stay within.
    pub band: T,
    /// End of excitation. `None` uses the last sample with nonzero wheel torque.
    pub command_end: Option<T>,
    /// Minimum quiet time that must remain in the record for it to count as settled, s.
    pub hold: T,
}

impl<T: Real> SettlingSpec<T> {
    pub fn band(band: T) -> Self {
        Self {
            band,
            command_end: None,
            hold: T::lit(2.0),
        }
    }
}

/// Settling time with the default hold and an inferred command end.
pub fn settling_time<T: Real>(traj: &Trajectory<T>, channel: Channel, band: T) -> Result<T> {
    settling_time_with(traj, channel, &SettlingSpec::band(band))
}

/// Earliest time after the command ends beyond which `|channel|` stays within
/// `band` times its post-command peak. Returns `+∞` when the record never settles.
pub fn settling_time_with<T: Real>(
    traj: &Trajectory<T>,
    channel: Channel,
    spec: &SettlingSpec<T>,
) -> Result<T> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if !(spec.band > T::zero() && spec.band < T::one()) {
        return Err(Error::config("settling band must lie in (0, 1)"));
    }
    let value = |i: usize| {
        let s = &traj.samples[i].state;
        match channel {
            Channel::GammaS => s.gamma_s.abs(),
            Channel::Omega => s.omega.abs(),
        }
    };
    let t_cmd = spec.command_end.unwrap_or_else(|| {
        traj.samples
            .iter()
            .rev()
            .find(|s| s.gamma_rw != T::zero())
            .map_or(traj.samples[0].state.t, |s| s.state.t)
    });
    let start = traj
        .samples
        .iter()
        .position(|s| s.state.t >= t_cmd)
        .unwrap_or(traj.len());
    if start == traj.len() {
        return Ok(T::infinity());
    }
    let peak = (start..traj.len()).map(value).fold(T::zero(), T::max);
    if peak == T::zero() {
        return Ok(t_cmd);
    }
    let threshold = spec.band * peak;
    let last_out = (start..traj.len()).rev().find(|&i| value(i) > threshold);
    let settled_at = match last_out {
        None => return Ok(t_cmd),
        Some(i) if i + 1 == traj.len() => return Ok(T::infinity()),
        Some(i) => traj.samples[i + 1].state.t,
    };
    let t_last = traj.samples[traj.len() - 1].state.t;
    if t_last - settled_at < spec.hold {
        Ok(T::infinity())
    } else {
        Ok(settled_at)
    }
}
