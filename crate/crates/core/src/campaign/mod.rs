//! Experiment plan, operating-mode machine, and campaign execution.

mod modes;
mod plan;
mod recovery;
mod run;

pub use modes::{step_mode, ModeEvent, OperatingMode};
pub use plan::{
    build_plan, ExpectedCounts, Excitation, ExperimentManifest, ExperimentMode, PhaseSpec, PlanConfig,
    ProfileLevel, ProfileParams, TRIALS,
};
pub use recovery::{recovery_check, RecoveryLimits};
pub use run::{
    run_campaign, run_experiment, CampaignConfig, CampaignReport, ControllerSummary, ExperimentResult,
    ExperimentStatus, PhaseSummary, REPORT_VERSION,
};
