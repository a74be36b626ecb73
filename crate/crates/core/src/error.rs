use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("state corrupted: non-finite {field} = {value}")]
    StateCorruption { field: &'static str, value: f64 },

    #[error("integration diverged at step {step} (t = {t} s)")]
    Diverged { step: usize, t: f64 },

    #[error("calibration failed after {iterations} iterations, achieved peak {achieved:e} N·m")]
    Calibration { iterations: usize, achieved: f64 },

    #[error("maneuver infeasible: {0}")]
    Infeasible(String),

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("test set overlaps training data (run id {0})")]
    DatasetOverlap(String),

    #[error("model version mismatch: expected {expected}, found {found}")]
    ModelVersion { expected: u32, found: u32 },

    #[error("illegal mode transition from {state:?} on {event:?}")]
    IllegalTransition {
        state: crate::campaign::OperatingMode,
        event: crate::campaign::ModeEvent,
    },

    #[error("recovery triggered at t = {t} s")]
    RecoveryTriggered { t: f64 },

    #[error(transparent)]
    Frame(#[from] crate::telemetry::FrameError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by the inputs rather than by the computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Infeasible(_)
                | Error::DatasetOverlap(_)
                | Error::ModelVersion { .. }
                | Error::IllegalTransition { .. }
                | Error::Frame(_)
                | Error::Json(_)
        )
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
