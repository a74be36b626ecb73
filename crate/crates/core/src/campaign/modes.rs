use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatingMode {
    Idle,
    ExcitationObservation,
    ExcitationMitigation,
    Recovery,
    AlgorithmUpdate,
}

impl OperatingMode {
    pub const ALL: [OperatingMode; 5] = [
        OperatingMode::Idle,
        OperatingMode::ExcitationObservation,
        OperatingMode::ExcitationMitigation,
        OperatingMode::Recovery,
        OperatingMode::AlgorithmUpdate,
    ];

    pub fn is_excitation(self) -> bool {
        matches!(
            self,
            OperatingMode::ExcitationObservation | OperatingMode::ExcitationMitigation
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeEvent {
    /// Begin a maneuver; `mitigation` selects the mitigation branch.
    StartExcitation { mitigation: bool },
    ExcitationDone,
    FluidSettled,
    LimitExceeded,
    RecoveryDone,
    UploadRequested,
    UploadDone,
}

impl ModeEvent {
    pub const ALL: [ModeEvent; 8] = [
        ModeEvent::StartExcitation { mitigation: false },
        ModeEvent::StartExcitation { mitigation: true },
        ModeEvent::ExcitationDone,
        ModeEvent::FluidSettled,
        ModeEvent::LimitExceeded,
        ModeEvent::RecoveryDone,
        ModeEvent::UploadRequested,
        ModeEvent::UploadDone,
    ];
}

/// Operating-mode transition function. Anything not listed is illegal.
///
/// `ExcitationDone` keeps the excitation mode: commanding has ended but the
/// experiment only closes once the fluid settles.
pub fn step_mode(current: OperatingMode, event: ModeEvent) -> Result<OperatingMode> {
    use ModeEvent as E;
    use OperatingMode as M;
    let next = match (current, event) {
        (_, E::LimitExceeded) => M::Recovery,
        (M::Idle, E::StartExcitation { mitigation: false }) => M::ExcitationObservation,
        (M::Idle, E::StartExcitation { mitigation: true }) => M::ExcitationMitigation,
        (M::Idle, E::UploadRequested) => M::AlgorithmUpdate,
        (m, E::ExcitationDone) if m.is_excitation() => m,
        (m, E::FluidSettled) if m.is_excitation() => M::Idle,
        (M::Recovery, E::RecoveryDone) => M::Idle,
        (M::AlgorithmUpdate, E::UploadDone) => M::Idle,
        (state, event) => return Err(Error::IllegalTransition { state, event }),
    };
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ModeEvent as E;
    use OperatingMode as M;

    #[test]
    fn examples() {
        assert_eq!(
            step_mode(M::Idle, E::StartExcitation { mitigation: false }).unwrap(),
            M::ExcitationObservation
        );
        assert_eq!(
            step_mode(M::ExcitationMitigation, E::LimitExceeded).unwrap(),
            M::Recovery
        );
        let err = step_mode(M::Recovery, E::StartExcitation { mitigation: false }).unwrap_err();
        assert!(matches!(err, Error::IllegalTransition { state: M::Recovery, .. }));
    }
}
