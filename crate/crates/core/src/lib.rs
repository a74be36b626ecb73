//! Propellant-slosh attitude dynamics laboratory.
//!
//! A single-axis rigid body carries a second-order slosh-torque oscillator and
//! is driven by a reaction wheel with second-order response. Around that plant
//! sit noise-modelled sensors, five controller variants (PID baseline,
//! time-delay disturbance estimation, a NARX slosh predictor, a reference
//! governor, and a combination), the pressure-frame codec and data budgets,
//! and the experiment-campaign planner and runner.
//!
//! The physics is generic over [`Real`]; the aliases below fix it to `f64`.

pub mod actuator;
pub mod campaign;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod ode;
pub mod predictor;
pub mod scalar;
pub mod seed;
pub mod sensors;
pub mod telemetry;

pub use error::{Error, Result};
pub use scalar::{Exact, Real};

pub type SatelliteState = dynamics::SatelliteState<f64>;
pub type EmmParams = dynamics::EmmParams<f64>;
pub type TankGeometry = dynamics::TankGeometry<f64>;
pub type Disturbances = dynamics::Disturbances<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
pub type CommandProfile = actuator::CommandProfile<f64>;
pub type RwFilterState = actuator::RwFilterState<f64>;
pub type BudgetConfig = telemetry::BudgetConfig<f64>;
/// Budget configuration in exact rational arithmetic.
pub type ExactBudgetConfig = telemetry::BudgetConfig<num_rational::Rational64>;
pub type GyroSpec = sensors::GyroSpec<f64>;
pub type PidGains = control::PidGains<f64>;
