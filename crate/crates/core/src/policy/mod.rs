//! Rule-ladder oracle policy.
//!
//! Ground truth for every highway scenario comes from [`decide`], a strictly
//! ordered ladder: speed limit, following gap, keep-right, user instruction,
//! speed recovery, maintain. Safety and traffic rules therefore always outrank
//! whatever the user asked for.

mod instruction;

use serde::{Deserialize, Serialize};

use crate::scalar::kmh_to_mps;
use crate::text::fmt_num;
use crate::world::{
    gap_ahead, is_collision, step_kinematics, time_to_collision, vehicle_lane, Action, Decision,
    EgoState, LanePosition, Scenario, SurroundingVehicle, ACCEL_DELTA_KMH, TICK_S,
};

pub(crate) use instruction::tokenize;
pub use instruction::{map_instruction, INSTRUCTION_PHRASES};

/// Longitudinal clearance a target lane must offer before a lane change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyEnvelope {
    /// Meters behind the ego that must be empty in the target lane.
    pub rear_clear: f64,
    /// Meters ahead of the ego that must be empty in the target lane.
    pub front_clear: f64,
    /// A target-lane vehicle within twice `rear_clear` behind may not be
    /// faster than the ego by more than this many km/h.
    pub rear_closing_margin: f64,
}

impl Default for SafetyEnvelope {
    fn default() -> Self {
        SafetyEnvelope {
            rear_clear: 10.0,
            front_clear: 15.0,
            rear_closing_margin: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    /// Following time gap in seconds.
    pub headway: f64,
    /// Floor on the following distance, meters.
    pub min_gap: f64,
    /// Dead band around the speed limit, km/h.
    pub limit_tolerance: f64,
    pub envelope: SafetyEnvelope,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            headway: 2.0,
            min_gap: 10.0,
            limit_tolerance: 2.0,
            envelope: SafetyEnvelope::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid policy config: {0}")]
pub struct PolicyConfigError(pub String);

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), PolicyConfigError> {
        let e = &self.envelope;
        let positive = [
            ("headway", self.headway),
            ("min_gap", self.min_gap),
            ("envelope.rear_clear", e.rear_clear),
            ("envelope.front_clear", e.front_clear),
            ("envelope.rear_closing_margin", e.rear_closing_margin),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PolicyConfigError(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.limit_tolerance >= 0.0 && self.limit_tolerance.is_finite()) {
            return Err(PolicyConfigError(format!(
                "limit_tolerance must be >= 0, got {}",
                self.limit_tolerance
            )));
        }
        Ok(())
    }

    /// Safe following distance at `speed_kmh`: the headway rule with a floor.
    pub fn follow_distance(&self, speed_kmh: f64) -> f64 {
        (self.headway * kmh_to_mps(speed_kmh)).max(self.min_gap)
    }
}

/// The ladder rung that produced a decision, numbered 1 through 6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderRule {
    SpeedLimit,
    FollowGap,
    KeepRight,
    Instruction,
    SpeedRecovery,
    Maintain,
}

impl LadderRule {
    pub const ALL: [LadderRule; 6] = [
        LadderRule::SpeedLimit,
        LadderRule::FollowGap,
        LadderRule::KeepRight,
        LadderRule::Instruction,
        LadderRule::SpeedRecovery,
        LadderRule::Maintain,
    ];

    pub fn index(self) -> usize {
        self as usize + 1
    }

    pub fn from_index(i: usize) -> Option<LadderRule> {
        LadderRule::ALL.get(i.checked_sub(1)?).copied()
    }
}

/// Lane-change clearance check against the target lane, `false` for off-road changes.
pub fn lane_change_clear(
    ego: &EgoState<f64>,
    vehicles: &[SurroundingVehicle<f64>],
    action: Action,
    envelope: &SafetyEnvelope,
) -> bool {
    let Some(target) = ego.lane.after(action) else {
        return false;
    };
    if target == ego.lane {
        return true;
    }
    vehicles
        .iter()
        .filter(|v| vehicle_lane(ego, v) == Some(target))
        .all(|v| {
            let occupied = v.rel_y >= -envelope.rear_clear && v.rel_y <= envelope.front_clear;
            let fast_from_behind = v.rel_y < -envelope.rear_clear
                && v.rel_y >= -2.0 * envelope.rear_clear
                && v.speed_kmh - ego.speed_kmh > envelope.rear_closing_margin;
            !(occupied || fast_from_behind)
        })
}

fn accelerate_safe(
    ego: &EgoState<f64>,
    vehicles: &[SurroundingVehicle<f64>],
    headway: f64,
) -> bool {
    let Some(lead_idx) = lead_index(ego, vehicles) else {
        return true;
    };
    let (next_ego, next) = step_kinematics(ego, vehicles, Action::Accelerate, TICK_S);
    let lead = &next[lead_idx];
    if lead.rel_y <= 0.0 || is_collision(&next_ego, lead) {
        return false;
    }
    time_to_collision(&next_ego, lead).is_none_or(|ttc| ttc >= headway)
}

fn lead_index(ego: &EgoState<f64>, vehicles: &[SurroundingVehicle<f64>]) -> Option<usize> {
    let (lead, _) = gap_ahead(ego, vehicles)?;
    vehicles.iter().position(|v| std::ptr::eq(v, lead))
}

/// Hard-constraint check on a raw world state.
pub fn action_safe_in(
    ego: &EgoState<f64>,
    vehicles: &[SurroundingVehicle<f64>],
    action: Action,
    config: &PolicyConfig,
) -> bool {
    match action {
        Action::ChangeLaneLeft | Action::ChangeLaneRight => {
            lane_change_clear(ego, vehicles, action, &config.envelope)
        }
        Action::Accelerate => accelerate_safe(ego, vehicles, config.headway),
        Action::Maintain | Action::Decelerate => true,
    }
}

/// `false` iff the action breaks a hard safety constraint in the scenario.
pub fn is_action_safe(scenario: &Scenario, action: Action, config: &PolicyConfig) -> bool {
    action_safe_in(&scenario.ego, &scenario.vehicles, action, config)
}

/// Whether taking `action` respects the scenario's traffic rules.
pub fn is_rule_compliant(scenario: &Scenario, action: Action, config: &PolicyConfig) -> bool {
    let rules = &scenario.rules;
    let speed = scenario.ego.speed_kmh;
    let ceiling = rules.speed_limit.map(|l| l + config.limit_tolerance);
    match action {
        Action::Accelerate => ceiling.is_none_or(|c| speed + ACCEL_DELTA_KMH <= c),
        Action::Maintain => ceiling.is_none_or(|c| speed <= c),
        Action::Decelerate | Action::ChangeLaneRight => true,
        Action::ChangeLaneLeft => {
            // the left lane is for overtaking only
            rules.overtaking_allowed
                && (!rules.keep_right || gap_ahead(&scenario.ego, &scenario.vehicles).is_some())
        }
    }
}

/// Runs the ladder and reports which rung fired.
pub fn decide_with_rule(scenario: &Scenario, config: &PolicyConfig) -> (LadderRule, Action) {
    let ego = &scenario.ego;
    let vehicles = &scenario.vehicles;
    let rules = &scenario.rules;
    let tol = config.limit_tolerance;
    let follow = config.follow_distance(ego.speed_kmh);
    let gap = gap_ahead(ego, vehicles).map(|(_, g)| g);

    if let Some(limit) = rules.speed_limit {
        if ego.speed_kmh > limit + tol {
            return (LadderRule::SpeedLimit, Action::Decelerate);
        }
    }

    if gap.is_some_and(|g| g < follow) {
        let overtake = rules.overtaking_allowed
            && action_safe_in(ego, vehicles, Action::ChangeLaneLeft, config);
        let action = if overtake {
            Action::ChangeLaneLeft
        } else {
            Action::Decelerate
        };
        return (LadderRule::FollowGap, action);
    }

    if rules.keep_right
        && ego.lane == LanePosition::LeftOvertaking
        && !slower_vehicle_ahead_in(ego, vehicles, LanePosition::RightDriving, follow)
        && action_safe_in(ego, vehicles, Action::ChangeLaneRight, config)
    {
        return (LadderRule::KeepRight, Action::ChangeLaneRight);
    }

    if let Some(requested) = scenario.instruction_text().and_then(map_instruction) {
        if is_action_safe(scenario, requested, config)
            && is_rule_compliant(scenario, requested, config)
        {
            return (LadderRule::Instruction, requested);
        }
    }

    if let Some(limit) = rules.speed_limit {
        let ample = gap.is_none_or(|g| g >= 2.0 * follow);
        if ego.speed_kmh < limit - tol
            && ample
            && action_safe_in(ego, vehicles, Action::Accelerate, config)
        {
            return (LadderRule::SpeedRecovery, Action::Accelerate);
        }
    }

    (LadderRule::Maintain, Action::Maintain)
}

fn slower_vehicle_ahead_in(
    ego: &EgoState<f64>,
    vehicles: &[SurroundingVehicle<f64>],
    lane: LanePosition,
    within: f64,
) -> bool {
    vehicles.iter().any(|v| {
        vehicle_lane(ego, v) == Some(lane)
            && v.rel_y > 0.0
            && v.rel_y <= within
            && v.speed_kmh < ego.speed_kmh
    })
}

/// Ground-truth decision with a templated reason.
pub fn decide(scenario: &Scenario, config: &PolicyConfig) -> Decision {
    let (rule, action) = decide_with_rule(scenario, config);
    Decision::with_reason(action, explain(rule, scenario, config))
}

/// Templated sentence naming the fired rung and its operative quantities.
pub fn explain(rule: LadderRule, scenario: &Scenario, config: &PolicyConfig) -> String {
    let ego = &scenario.ego;
    let speed = fmt_num(ego.speed_kmh);
    let limit = scenario.rules.speed_limit.map(fmt_num);
    let follow = config.follow_distance(ego.speed_kmh);
    match rule {
        LadderRule::SpeedLimit => format!(
            "The speed limit is {} km/h and I am driving at {speed} km/h, above the limit, \
             so I decelerate to comply with the traffic rule.",
            limit.unwrap_or_else(|| "unknown".into())
        ),
        LadderRule::FollowGap => {
            let gap = gap_ahead(ego, &scenario.vehicles)
                .map(|(_, g)| fmt_num(g))
                .unwrap_or_else(|| "unknown".into());
            let head = format!(
                "The vehicle ahead in my lane is {gap} m away, closer than the safe following \
                 distance of {} m",
                fmt_num(follow)
            );
            let overtake = scenario.rules.overtaking_allowed
                && is_action_safe(scenario, Action::ChangeLaneLeft, config);
            if overtake {
                format!("{head}, and the left lane is clear, so I change lane to the left to overtake.")
            } else {
                format!("{head}, and I cannot overtake safely or legally, so I decelerate to restore a safe gap.")
            }
        }
        LadderRule::KeepRight => "I am in the overtaking lane, there is no slower vehicle ahead in the \
             driving lane and the right lane is clear, so I keep right and change lane to the right."
            .to_string(),
        LadderRule::Instruction => {
            let text = scenario.instruction_text().unwrap_or("");
            let action = map_instruction(text).unwrap_or(Action::Maintain);
            format!(
                "The user asked \"{text}\", which is safe and complies with the traffic rules, \
                 so I {action}."
            )
        }
        LadderRule::SpeedRecovery => format!(
            "I am driving at {speed} km/h, below the speed limit of {} km/h, and the road ahead \
             is clear, so I accelerate.",
            limit.unwrap_or_else(|| "unknown".into())
        ),
        LadderRule::Maintain => "No safety constraint, traffic rule, or safe instruction calls for a \
             change, so I maintain my current speed and lane."
            .to_string(),
    }
}

#[cfg(test)]
mod tests;
