//! The two-lane highway world: lanes, ego and surrounding vehicles, traffic
//! rules, scenarios, and the kinematic rules that advance them.
//!
//! Coordinates are ego-centred: `x` is lateral (right-positive) and `y` is
//! longitudinal (forward-positive), both in meters. Speeds are km/h; m/s only
//! appears inside kinematic arithmetic.

mod action;
mod kinematics;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

pub use action::{Action, Decision, UnknownAction};
pub use kinematics::{
    gap_ahead, is_collision, lane_of, passed_through, step_kinematics, time_to_collision,
    vehicle_lane,
};

pub const LANE_WIDTH_M: f64 = 3.5;
/// Same-lane longitudinal separation below which two vehicles overlap.
pub const COLLISION_DISTANCE_M: f64 = 5.0;
pub const TICK_S: f64 = 1.0;
pub const V_MAX_KMH: f64 = 130.0;
pub const ACCEL_DELTA_KMH: f64 = 5.0;
pub const DECEL_DELTA_KMH: f64 = 10.0;
pub const SPEED_LIMIT_RANGE_KMH: (f64, f64) = (10.0, 200.0);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("lateral offset {rel_x} m is off the two-lane road")]
    OffRoad { rel_x: f64 },
    #[error("negative speed {0} km/h")]
    NegativeSpeed(f64),
    #[error("speed limit {0} km/h outside [10, 200]")]
    SpeedLimitOutOfRange(f64),
    #[error("vehicle {index} overlaps the ego vehicle")]
    InitialCollision { index: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// One of the two lanes. The right lane is for driving, the left for overtaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LanePosition {
    #[serde(rename = "right")]
    RightDriving,
    #[serde(rename = "left")]
    LeftOvertaking,
}

impl LanePosition {
    pub fn left_neighbor(self) -> Option<LanePosition> {
        match self {
            LanePosition::RightDriving => Some(LanePosition::LeftOvertaking),
            LanePosition::LeftOvertaking => None,
        }
    }

    pub fn right_neighbor(self) -> Option<LanePosition> {
        match self {
            LanePosition::RightDriving => None,
            LanePosition::LeftOvertaking => Some(LanePosition::RightDriving),
        }
    }

    /// Lane reached by a lane-change action, `None` when it would leave the road.
    pub fn after(self, action: Action) -> Option<LanePosition> {
        match action {
            Action::ChangeLaneLeft => self.left_neighbor(),
            Action::ChangeLaneRight => self.right_neighbor(),
            _ => Some(self),
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            LanePosition::RightDriving => "right lane (driving lane)",
            LanePosition::LeftOvertaking => "left lane (overtaking lane)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize + Zero",
    deserialize = "T: Deserialize<'de> + Zero"
))]
pub struct EgoState<T> {
    pub lane: LanePosition,
    pub speed_kmh: T,
    #[serde(default = "Zero::zero", skip_serializing_if = "Zero::is_zero")]
    pub odometer_m: T,
}

impl<T: Scalar> EgoState<T> {
    pub fn new(lane: LanePosition, speed_kmh: T) -> Self {
        EgoState {
            lane,
            speed_kmh,
            odometer_m: T::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurroundingVehicle<T> {
    pub category: String,
    #[serde(rename = "x_m")]
    pub rel_x: T,
    #[serde(rename = "y_m")]
    pub rel_y: T,
    pub speed_kmh: T,
}

impl<T: Scalar> SurroundingVehicle<T> {
    pub fn new(category: impl Into<String>, rel_x: T, rel_y: T, speed_kmh: T) -> Self {
        SurroundingVehicle {
            category: category.into(),
            rel_x,
            rel_y,
            speed_kmh,
        }
    }

    /// A vehicle centred in `lane`, seen from an ego driving in `ego_lane`.
    pub fn in_lane(
        category: impl Into<String>,
        ego_lane: LanePosition,
        lane: LanePosition,
        rel_y: T,
        speed_kmh: T,
    ) -> Self {
        let w = T::lit(LANE_WIDTH_M);
        let rel_x = match (ego_lane, lane) {
            (a, b) if a == b => T::zero(),
            (LanePosition::RightDriving, _) => -w,
            (LanePosition::LeftOvertaking, _) => w,
        };
        Self::new(category, rel_x, rel_y, speed_kmh)
    }
}

/// Structured traffic rules plus free-text extras.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficRuleSet {
    #[serde(rename = "speed_limit_kmh")]
    pub speed_limit: Option<f64>,
    pub keep_right: bool,
    pub overtaking_allowed: bool,
    #[serde(rename = "extra", default)]
    pub extra_rules: Vec<String>,
}

impl Default for TrafficRuleSet {
    /// Highway defaults: no posted limit, keep right, overtaking on the left.
    fn default() -> Self {
        TrafficRuleSet {
            speed_limit: None,
            keep_right: true,
            overtaking_allowed: true,
            extra_rules: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskFamily {
    Sadm,
    Ftr,
    Combined,
}

impl TaskFamily {
    pub const ALL: [TaskFamily; 3] = [TaskFamily::Sadm, TaskFamily::Ftr, TaskFamily::Combined];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskFamily::Sadm => "sadm",
            TaskFamily::Ftr => "ftr",
            TaskFamily::Combined => "combined",
        }
    }
}

impl std::str::FromStr for TaskFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sadm" => Ok(TaskFamily::Sadm),
            "ftr" => Ok(TaskFamily::Ftr),
            "combined" | "sadm&ftr" | "both" => Ok(TaskFamily::Combined),
            other => Err(format!("unknown task family {other:?}")),
        }
    }
}

/// A labeled highway decision problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub task_family: TaskFamily,
    pub ego: EgoState<f64>,
    pub vehicles: Vec<SurroundingVehicle<f64>>,
    pub rules: TrafficRuleSet,
    #[serde(default)]
    pub instruction: Option<String>,
    pub ground_truth: Action,
    pub seed: u64,
}

impl Scenario {
    /// A scenario with placeholder identity and label, for building and probing.
    pub fn unlabeled(
        ego: EgoState<f64>,
        vehicles: Vec<SurroundingVehicle<f64>>,
        rules: TrafficRuleSet,
    ) -> Scenario {
        Scenario {
            id: String::new(),
            task_family: TaskFamily::Sadm,
            ego,
            vehicles,
            rules,
            instruction: None,
            ground_truth: Action::Maintain,
            seed: 0,
        }
    }

    /// Checks the type invariants that serde alone cannot express.
    pub fn validate(&self) -> Result<(), WorldError> {
        let ego_speed = self.ego.speed_kmh;
        if !ego_speed.is_finite() {
            return Err(WorldError::NonFinite("ego speed"));
        }
        if ego_speed < 0.0 {
            return Err(WorldError::NegativeSpeed(ego_speed));
        }
        if let Some(limit) = self.rules.speed_limit {
            let (lo, hi) = SPEED_LIMIT_RANGE_KMH;
            if !(lo..=hi).contains(&limit) {
                return Err(WorldError::SpeedLimitOutOfRange(limit));
            }
        }
        for v in &self.vehicles {
            if !(v.rel_x.is_finite() && v.rel_y.is_finite() && v.speed_kmh.is_finite()) {
                return Err(WorldError::NonFinite("vehicle"));
            }
            if v.speed_kmh < 0.0 {
                return Err(WorldError::NegativeSpeed(v.speed_kmh));
            }
            lane_of(self.ego.lane, v.rel_x)?;
        }
        Ok(())
    }

    /// Instruction text, treating empty strings as absent.
    /// Rejects worlds where some vehicle already overlaps the ego.
    pub fn check_clear_start(&self) -> Result<(), WorldError> {
        match self
            .vehicles
            .iter()
            .position(|v| is_collision(&self.ego, v))
        {
            Some(index) => Err(WorldError::InitialCollision { index }),
            None => Ok(()),
        }
    }

    pub fn instruction_text(&self) -> Option<&str> {
        self.instruction.as_deref().filter(|s| !s.trim().is_empty())
    }
}
