use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sloshlab::actuator::{Axis, CommandProfile};
use sloshlab::campaign::ProfileParams;
use sloshlab::control::{ClosedLoopConfig, ControllerKind, Maneuver};

use crate::Failure;

pub const SEED_ENV: &str = "SLOSHLAB_SEED";

/// `--seed`, else the config value, else `SLOSHLAB_SEED`, else 0.
pub fn resolve_seed(flag: Option<u64>, from_config: Option<u64>) -> Result<u64, Failure> {
    if let Some(s) = flag.or(from_config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Validation(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::parse(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Failure::io(path, e))
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v).map_err(|e| Failure::Runtime(e.to_string()))
}

/// Writes JSON to `path`, or to standard output without one.
pub fn emit_json<T: Serialize>(v: &T, path: Option<&Path>) -> Result<(), Failure> {
    let text = to_json(v)?;
    match path {
        Some(p) => write_text(p, &(text + "\n")),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManeuverSpec {
    BangStopBang(ProfileParams),
    Step { angle: f64, t_step: f64, t_end: f64 },
    Profile { profile: CommandProfile<f64> },
}

impl ManeuverSpec {
    pub fn maneuver(&self, axis: Axis) -> Result<Maneuver, Failure> {
        Ok(match self {
            ManeuverSpec::BangStopBang(p) => Maneuver::profile(p.profile(axis)?),
            ManeuverSpec::Step { angle, t_step, t_end } => {
                Maneuver::Step { angle: *angle, t_step: *t_step, t_end: *t_end }
            }
            ManeuverSpec::Profile { profile } => Maneuver::profile(profile.clone().with_axis(axis)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PredictorSpec {
    Zero,
    Oracle,
    Narx { model: PathBuf },
}

/// Everything one `simulate` run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Plant, tank, actuator, sensors, gains, constraints and settling criteria.
    pub closed_loop: ClosedLoopConfig,
    pub controller: ControllerKind,
    pub predictor: PredictorSpec,
    pub maneuver: ManeuverSpec,
    pub axis: Axis,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            closed_loop: ClosedLoopConfig::default(),
            controller: ControllerKind::Baseline,
            predictor: PredictorSpec::Zero,
            maneuver: ManeuverSpec::BangStopBang(ProfileParams {
                torque: 0.004,
                duration: 5.0,
                dwell: 25.0,
                t_start: 2.0,
                sign: 1.0,
            }),
            axis: Axis::X,
            seed: None,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        self.closed_loop.validate()?;
        self.controller.validate()?;
        self.maneuver.maneuver(self.axis)?;
        Ok(())
    }
}
