//! Pressure-frame wire format and mission data budgets.

mod budget;
mod frame;

pub use budget::{
    campaign_volume, experiment_volume, mss_rate, BudgetConfig, BudgetMode, BudgetReport,
    CampaignVolume, ExperimentVolume, MssRate,
};
pub use frame::{decode_frame, encode_frame, FrameError, PressureFrame, FRAME_TERMINATOR, SAMPLE_LIMIT};
