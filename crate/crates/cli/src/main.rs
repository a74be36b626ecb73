//! `sloshlab` command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid input, 3 runtime failure.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "sloshlab", version, about = "Propellant-slosh attitude simulation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Seed shared by every subcommand. Falls back to the config file, then to
/// `SLOSHLAB_SEED`, then to 0.
#[derive(Args, Clone, Copy)]
pub struct SeedArg {
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// One closed-loop maneuver; writes the series as CSV and metrics as JSON.
    Simulate(commands::SimulateArgs),
    /// Scale the slosh coupling so the calibration maneuver peaks inside the target band.
    Calibrate(commands::CalibrateArgs),
    /// Data-rate and downlink-volume report.
    Budget(commands::BudgetArgs),
    /// Pressure-frame wire format.
    Frames {
        #[command(subcommand)]
        action: commands::FramesAction,
    },
    /// Generate a training or test dataset of open-loop maneuvers.
    Dataset(commands::DatasetArgs),
    /// Train a NARX (or feedforward) slosh predictor.
    Train(commands::TrainArgs),
    /// NRMSE of predictors on a test set across input-noise levels.
    Evaluate(commands::EvaluateArgs),
    /// Paired settling-time table over a grid of maneuvers.
    Compare(commands::CompareArgs),
    /// Build the experiment plan.
    Plan(commands::PlanArgs),
    /// Run an experiment plan.
    Campaign(commands::CampaignArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PredictorChoice {
    Zero,
    Oracle,
    Narx,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<sloshlab::Error> for Failure {
    fn from(e: sloshlab::Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl Failure {
    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Failure::Runtime(format!("{}: {e}", path.display()))
    }

    pub fn parse(path: &std::path::Path, e: serde_json::Error) -> Self {
        Failure::Validation(format!("{}: {e}", path.display()))
    }
}

pub type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Budget(a) => commands::budget(a),
        Command::Frames { action } => commands::frames(action),
        Command::Dataset(a) => commands::dataset(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Compare(a) => commands::compare(a),
        Command::Plan(a) => commands::plan(a),
        Command::Campaign(a) => commands::campaign(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
