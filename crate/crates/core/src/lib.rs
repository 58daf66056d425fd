//! Closed-loop evaluation of language-model driving agents on a two-lane
//! highway and a cone-field destination task.
//!
//! The crate is organised bottom-up:
//!
//! - [`world`]: lanes, vehicles, traffic rules, scenarios and kinematics
//! - [`policy`]: the rule-ladder oracle that defines ground truth
//! - [`generate`]: seeded rejection-sampled datasets and their JSONL format
//! - [`prompt`]: prompt rendering and tolerant JSON decision parsing
//! - [`driver`]: the driver abstraction with oracle, replay and scripted drivers
//! - [`sim`]: closed-loop rollouts and violation detection
//! - [`poc`]: the cone-field instruction-grounding task
//!
//! Kinematic types are generic over [`Scalar`]; the aliases below fix them to
//! `f64`, which is what everything above the world layer uses.

pub mod driver;
pub mod generate;
pub mod poc;
pub mod policy;
pub mod prompt;
pub mod scalar;
pub mod sim;
pub mod text;
pub mod world;

pub use scalar::Scalar;
pub use world::{Action, Decision, LanePosition, Scenario, TaskFamily, TrafficRuleSet};

pub type EgoState = world::EgoState<f64>;
pub type SurroundingVehicle = world::SurroundingVehicle<f64>;
