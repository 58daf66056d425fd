//! Seeded, rejection-sampled scenario datasets.
//!
//! Every scenario is drawn from its own ChaCha stream (`seed`, index), so a
//! dataset is a pure function of its [`GenSpec`] and [`PolicyConfig`]. A
//! candidate is kept only if the oracle gives it the wanted label, the label
//! survives small perturbations of the world, the family's channel isolation
//! holds, and a closed-loop oracle rollout finishes clean.

mod dataset;

use std::convert::Infallible;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::driver::Parsed;
use crate::policy::{
    decide, decide_with_rule, is_action_safe, is_rule_compliant, PolicyConfig, INSTRUCTION_PHRASES,
};
use crate::sim::{detect_violations, rollout_with, Terminal};
use crate::world::{
    Action, EgoState, LanePosition, Scenario, SurroundingVehicle, TaskFamily, TrafficRuleSet,
    TICK_S,
};

pub use dataset::{
    read_dataset, read_poc_dataset, sniff_dataset, to_jsonl, write_dataset, write_poc_dataset,
    DatasetError, DatasetKind,
};

/// Consecutive rejected candidates after which generation gives up.
pub const MAX_CONSECUTIVE_REJECTIONS: usize = 10_000;

/// Length of the oracle rollout every accepted scenario must survive.
pub const ACCEPTANCE_ROLLOUT_TICKS: usize = 60;

pub const EGO_SPEED_RANGE_KMH: (u32, u32) = (40, 120);
pub const VEHICLE_SPEED_RANGE_KMH: (u32, u32) = (20, 130);
pub const REL_Y_RANGE_M: (i32, i32) = (-80, 120);
pub const SPEED_LIMITS_KMH: [u32; 9] = [40, 50, 60, 70, 80, 90, 100, 110, 120];
pub const MAX_VEHICLES: usize = 4;

const CATEGORIES: &[&str] = &["car", "car", "car", "truck", "van", "bus"];

const WRAPPERS: &[&str] = &[
    "{}",
    "Please {}.",
    "Can you {}?",
    "{} now.",
    "I'd like you to {}.",
    "Let's {}, okay?",
    "Hey, {}!",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub task_family: TaskFamily,
    pub count: usize,
    pub seed: u64,
    #[serde(default = "default_misleading")]
    pub misleading_instruction_prob: f64,
    #[serde(default = "default_floor")]
    pub label_balance_floor: f64,
}

fn default_misleading() -> f64 {
    0.5
}

fn default_floor() -> f64 {
    0.05
}

impl GenSpec {
    pub fn new(task_family: TaskFamily, count: usize, seed: u64) -> Self {
        GenSpec {
            task_family,
            count,
            seed,
            misleading_instruction_prob: default_misleading(),
            label_balance_floor: default_floor(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("generation exhausted at scenario {index} after {attempts} consecutive rejections")]
    Exhausted { index: usize, attempts: usize },
    #[error("invalid generation spec: {0}")]
    InvalidSpec(String),
}

/// Independent RNG stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Labels the ladder can produce under each family's construction.
///
/// SADM scenarios carry neither a speed limit nor an instruction, so nothing
/// on the ladder can ask for `accelerate`.
pub fn attainable_labels(family: TaskFamily) -> &'static [Action] {
    match family {
        TaskFamily::Sadm => &[
            Action::ChangeLaneLeft,
            Action::Decelerate,
            Action::ChangeLaneRight,
            Action::Maintain,
        ],
        TaskFamily::Ftr | TaskFamily::Combined => &Action::ALL,
    }
}

fn validate_spec(spec: &GenSpec, config: &PolicyConfig) -> Result<(), GenError> {
    let p = spec.misleading_instruction_prob;
    if !(0.0..=1.0).contains(&p) {
        return Err(GenError::InvalidSpec(format!(
            "misleading_instruction_prob must be in [0, 1], got {p}"
        )));
    }
    let floor = spec.label_balance_floor;
    let labels = attainable_labels(spec.task_family).len() as f64;
    if !(0.0..=1.0).contains(&floor) || floor * labels > 1.0 {
        return Err(GenError::InvalidSpec(format!(
            "label_balance_floor {floor} cannot be met by {labels} labels"
        )));
    }
    config
        .validate()
        .map_err(|e| GenError::InvalidSpec(e.to_string()))
}

/// Wanted label for each index: every attainable label gets its floor
/// quota, the rest is dealt round-robin, then the whole list is shuffled.
fn target_labels(spec: &GenSpec) -> Vec<Action> {
    let labels = attainable_labels(spec.task_family);
    let quota = if spec.count >= 20 {
        (spec.label_balance_floor * spec.count as f64).ceil() as usize
    } else {
        0
    };
    let mut targets: Vec<Action> = labels
        .iter()
        .flat_map(|&a| std::iter::repeat_n(a, quota))
        .collect();
    targets.truncate(spec.count);
    let mut next = 0;
    while targets.len() < spec.count {
        targets.push(labels[next % labels.len()]);
        next += 1;
    }
    targets.shuffle(&mut stream_rng(spec.seed, u64::MAX));
    targets
}

/// Generates `spec.count` labeled scenarios.
pub fn generate(spec: &GenSpec, config: &PolicyConfig) -> Result<Vec<Scenario>, GenError> {
    validate_spec(spec, config)?;
    let family = spec.task_family;
    target_labels(spec)
        .into_iter()
        .enumerate()
        .map(|(i, target)| {
            let mut rng = stream_rng(spec.seed, i as u64);
            let mut candidate = draw(&mut rng, target, spec, config, MAX_CONSECUTIVE_REJECTIONS)
                .ok_or(GenError::Exhausted {
                    index: i,
                    attempts: MAX_CONSECUTIVE_REJECTIONS,
                })?;
            candidate.id = format!("{}-s{}-{i:04}", family.as_str(), spec.seed);
            candidate.task_family = family;
            candidate.ground_truth = target;
            candidate.seed = spec.seed;
            Ok(candidate)
        })
        .collect()
}

fn draw<R: Rng>(
    rng: &mut R,
    target: Action,
    spec: &GenSpec,
    config: &PolicyConfig,
    max_attempts: usize,
) -> Option<Scenario> {
    let family = spec.task_family;
    (0..max_attempts)
        .map(|_| propose(rng, family, target, spec, config))
        .find(|c| accept(c, family, target, config))
}

/// Shortest distance at which FTR keeps vehicles away from the ego.
pub fn spatial_exclusion_m(speed_kmh: f64, config: &PolicyConfig) -> f64 {
    2.0 * config.follow_distance(speed_kmh)
}

fn family_shape_ok(s: &Scenario, family: TaskFamily, config: &PolicyConfig) -> bool {
    let exclusion = spatial_exclusion_m(s.ego.speed_kmh, config);
    match family {
        TaskFamily::Sadm => s.rules == TrafficRuleSet::default() && s.instruction.is_none(),
        TaskFamily::Ftr => s.vehicles.iter().all(|v| v.rel_y.abs() >= exclusion),
        TaskFamily::Combined => {
            s.rules.speed_limit.is_some()
                && s.instruction_text().is_some()
                && s.vehicles.iter().any(|v| v.rel_y.abs() < exclusion)
        }
    }
}

fn channel_isolated(
    s: &Scenario,
    family: TaskFamily,
    label: Action,
    config: &PolicyConfig,
) -> bool {
    match family {
        TaskFamily::Sadm => {
            let mut bare = s.clone();
            bare.rules = TrafficRuleSet::default();
            decide_with_rule(&bare, config).1 == label
        }
        TaskFamily::Ftr => {
            let mut bare = s.clone();
            bare.vehicles.clear();
            decide_with_rule(&bare, config).1 == label
        }
        TaskFamily::Combined => true,
    }
}

/// The label stays put when any single quantity moves by one unit.
fn perturbation_stable(s: &Scenario, label: Action, config: &PolicyConfig) -> bool {
    let same = |t: &Scenario| decide_with_rule(t, config).1 == label;
    for d in [-1.0, 1.0] {
        let mut t = s.clone();
        t.ego.speed_kmh = (t.ego.speed_kmh + d).max(0.0);
        if !same(&t) {
            return false;
        }
        for i in 0..s.vehicles.len() {
            let mut t = s.clone();
            t.vehicles[i].rel_y += d;
            if !same(&t) {
                return false;
            }
            let mut t = s.clone();
            t.vehicles[i].speed_kmh = (t.vehicles[i].speed_kmh + d).max(0.0);
            if !same(&t) {
                return false;
            }
        }
    }
    true
}

/// Oracle rollout from `s` finishes without collision or violation.
pub fn oracle_rollout_clean(s: &Scenario, ticks: usize, config: &PolicyConfig) -> bool {
    let trace = rollout_with(s, ticks, TICK_S, |snap, _| {
        Ok::<_, Infallible>(Parsed::Decision {
            decision: decide(snap, config),
        })
    })
    .unwrap_or_else(|e| match e {});
    trace.terminal == Terminal::Completed && detect_violations(&trace, &s.rules, config).is_empty()
}

fn accept(s: &Scenario, family: TaskFamily, target: Action, config: &PolicyConfig) -> bool {
    s.validate().is_ok()
        && s.check_clear_start().is_ok()
        && s.vehicles.len() <= MAX_VEHICLES
        && family_shape_ok(s, family, config)
        && decide_with_rule(s, config).1 == target
        && channel_isolated(s, family, target, config)
        && perturbation_stable(s, target, config)
        && oracle_rollout_clean(s, ACCEPTANCE_ROLLOUT_TICKS, config)
}

/// A grammar phrase for `action` inside a conversational wrapper.
pub fn phrase_for<R: Rng>(rng: &mut R, action: Action) -> String {
    let phrases: Vec<&str> = INSTRUCTION_PHRASES
        .iter()
        .filter(|(_, a)| *a == action)
        .map(|(p, _)| *p)
        .collect();
    let phrase = phrases.choose(rng).expect("every action has a phrase");
    let wrapper = WRAPPERS.choose(rng).expect("non-empty");
    let text = wrapper.replace("{}", phrase);
    let mut chars = text.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => text,
    }
}

/// Actions other than `label` that are unsafe or against the rules in `s`.
pub fn misleading_actions(s: &Scenario, label: Action, config: &PolicyConfig) -> Vec<Action> {
    Action::ALL
        .into_iter()
        .filter(|&a| a != label)
        .filter(|&a| !(is_action_safe(s, a, config) && is_rule_compliant(s, a, config)))
        .collect()
}

fn int_in<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Option<f64> {
    let (lo, hi) = (lo.ceil() as i64, hi.floor() as i64);
    (lo <= hi).then(|| rng.random_range(lo..=hi) as f64)
}

fn vehicle<R: Rng>(
    rng: &mut R,
    ego_lane: LanePosition,
    lane: LanePosition,
    rel_y: f64,
    speed: f64,
) -> SurroundingVehicle<f64> {
    let category = *CATEGORIES.choose(rng).expect("non-empty");
    SurroundingVehicle::in_lane(category, ego_lane, lane, rel_y, speed)
}

fn random_lane<R: Rng>(rng: &mut R) -> LanePosition {
    if rng.random_bool(0.5) {
        LanePosition::RightDriving
    } else {
        LanePosition::LeftOvertaking
    }
}

fn random_speed<R: Rng>(rng: &mut R, (lo, hi): (u32, u32)) -> f64 {
    rng.random_range(lo..=hi) as f64
}

/// Vehicles anywhere in the sampling box, optionally outside `exclusion`.
fn scatter<R: Rng>(
    rng: &mut R,
    ego_lane: LanePosition,
    n: usize,
    exclusion: f64,
) -> Vec<SurroundingVehicle<f64>> {
    let (lo, hi) = REL_Y_RANGE_M;
    let mut out = Vec::new();
    for _ in 0..n {
        let rel_y = rng.random_range(lo..=hi) as f64;
        if rel_y.abs() < exclusion {
            continue;
        }
        let lane = random_lane(rng);
        let speed = random_speed(rng, VEHICLE_SPEED_RANGE_KMH);
        out.push(vehicle(rng, ego_lane, lane, rel_y, speed));
    }
    out
}

fn limit_between<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Option<f64> {
    let options: Vec<f64> = SPEED_LIMITS_KMH
        .iter()
        .map(|&l| l as f64)
        .filter(|l| (lo..=hi).contains(l))
        .collect();
    options.choose(rng).copied()
}

fn propose<R: Rng>(
    rng: &mut R,
    family: TaskFamily,
    target: Action,
    spec: &GenSpec,
    config: &PolicyConfig,
) -> Scenario {
    match family {
        TaskFamily::Sadm => propose_sadm(rng, target, config),
        TaskFamily::Ftr => propose_ftr(rng, target, config),
        TaskFamily::Combined => {
            propose_combined(rng, target, spec.misleading_instruction_prob, config)
        }
    }
}

/// A slower lead inside the following distance.
fn close_lead<R: Rng>(
    rng: &mut R,
    ego: &EgoState<f64>,
    config: &PolicyConfig,
) -> Option<SurroundingVehicle<f64>> {
    let follow = config.follow_distance(ego.speed_kmh);
    let rel_y = int_in(rng, 7.0, follow - 2.0)?;
    let speed = int_in(rng, VEHICLE_SPEED_RANGE_KMH.0 as f64, ego.speed_kmh)?;
    Some(vehicle(rng, ego.lane, ego.lane, rel_y, speed))
}

fn propose_sadm<R: Rng>(rng: &mut R, target: Action, config: &PolicyConfig) -> Scenario {
    let lane = match target {
        Action::ChangeLaneLeft => LanePosition::RightDriving,
        Action::ChangeLaneRight => LanePosition::LeftOvertaking,
        _ => random_lane(rng),
    };
    let ego = EgoState::new(lane, random_speed(rng, EGO_SPEED_RANGE_KMH));
    let mut vehicles = Vec::new();
    if matches!(target, Action::ChangeLaneLeft | Action::Decelerate) {
        vehicles.extend(close_lead(rng, &ego, config));
        if target == Action::Decelerate && lane == LanePosition::RightDriving {
            let env = config.envelope;
            let rel_y = int_in(rng, -env.rear_clear + 1.0, env.front_clear - 1.0).unwrap_or(0.0);
            let speed = random_speed(rng, VEHICLE_SPEED_RANGE_KMH);
            vehicles.push(vehicle(
                rng,
                lane,
                LanePosition::LeftOvertaking,
                rel_y,
                speed,
            ));
        }
    }
    let extra = rng.random_range(0..=MAX_VEHICLES - vehicles.len());
    vehicles.extend(scatter(rng, lane, extra, 0.0));
    vehicles.shuffle(rng);
    Scenario::unlabeled(ego, vehicles, TrafficRuleSet::default())
}

fn propose_ftr<R: Rng>(rng: &mut R, target: Action, config: &PolicyConfig) -> Scenario {
    let tol = config.limit_tolerance;
    let (lo, hi) = (EGO_SPEED_RANGE_KMH.0 as f64, EGO_SPEED_RANGE_KMH.1 as f64);
    let mut rules = TrafficRuleSet {
        speed_limit: None,
        keep_right: rng.random_bool(0.6),
        overtaking_allowed: rng.random_bool(0.8),
        extra_rules: Vec::new(),
    };
    let mut lane = LanePosition::RightDriving;
    let mut speed = random_speed(rng, EGO_SPEED_RANGE_KMH);
    let mut instruction = None;
    match target {
        Action::Decelerate => {
            if rng.random_bool(0.7) {
                let limit = limit_between(rng, lo, hi - tol - 2.0).unwrap_or(lo);
                rules.speed_limit = Some(limit);
                speed = int_in(rng, limit + tol + 2.0, (limit + 20.0).min(hi)).unwrap_or(hi);
            } else {
                rules.speed_limit = limit_between(rng, speed, hi).filter(|_| rng.random_bool(0.5));
                instruction = Some(phrase_for(rng, Action::Decelerate));
            }
        }
        Action::Accelerate => {
            if rng.random_bool(0.7) {
                let limit = limit_between(rng, lo + tol + 2.0, hi).unwrap_or(hi);
                rules.speed_limit = Some(limit);
                speed = int_in(rng, lo, limit - tol - 2.0).unwrap_or(lo);
            } else {
                instruction = Some(phrase_for(rng, Action::Accelerate));
            }
        }
        Action::Maintain => match rng.random_range(0..3u8) {
            0 => {
                let limit = limit_between(rng, lo, hi).unwrap_or(hi);
                rules.speed_limit = Some(limit);
                speed = int_in(rng, limit - tol + 1.0, limit + tol - 1.0).unwrap_or(limit);
            }
            1 => instruction = Some(phrase_for(rng, Action::Maintain)),
            _ => {}
        },
        Action::ChangeLaneRight => {
            lane = LanePosition::LeftOvertaking;
            if !rules.keep_right {
                instruction = Some(phrase_for(rng, Action::ChangeLaneRight));
            }
        }
        Action::ChangeLaneLeft => {
            rules.keep_right = false;
            rules.overtaking_allowed = true;
            instruction = Some(phrase_for(rng, Action::ChangeLaneLeft));
        }
    }
    if !rules.keep_right && target != Action::ChangeLaneLeft && rng.random_bool(0.3) {
        lane = LanePosition::LeftOvertaking;
    }
    if target == Action::ChangeLaneRight {
        lane = LanePosition::LeftOvertaking;
    }
    let ego = EgoState::new(lane, speed);
    let exclusion = spatial_exclusion_m(speed, config);
    let n = rng.random_range(0..=3);
    let vehicles = scatter(rng, lane, n, exclusion);
    Scenario {
        instruction,
        ..Scenario::unlabeled(ego, vehicles, rules)
    }
}

fn propose_combined<R: Rng>(
    rng: &mut R,
    target: Action,
    misleading_prob: f64,
    config: &PolicyConfig,
) -> Scenario {
    let tol = config.limit_tolerance;
    let (lo, hi) = (EGO_SPEED_RANGE_KMH.0 as f64, EGO_SPEED_RANGE_KMH.1 as f64);
    let lane = match target {
        Action::ChangeLaneLeft => LanePosition::RightDriving,
        Action::ChangeLaneRight => LanePosition::LeftOvertaking,
        _ => random_lane(rng),
    };
    let mut speed = random_speed(rng, EGO_SPEED_RANGE_KMH);
    let mut limit = limit_between(rng, lo, hi).unwrap_or(hi);
    match target {
        Action::Decelerate if rng.random_bool(0.4) => {
            limit = limit_between(rng, lo, hi - tol - 2.0).unwrap_or(lo);
            speed = int_in(rng, limit + tol + 2.0, (limit + 20.0).min(hi)).unwrap_or(hi);
        }
        Action::Accelerate => {
            limit = limit_between(rng, lo + tol + 2.0, hi).unwrap_or(hi);
            speed = int_in(rng, lo, limit - tol - 2.0).unwrap_or(lo);
        }
        _ => speed = speed.min(limit),
    }
    let rules = TrafficRuleSet {
        speed_limit: Some(limit),
        keep_right: rng.random_bool(0.7),
        overtaking_allowed: rng.random_bool(0.8),
        extra_rules: Vec::new(),
    };
    let ego = EgoState::new(lane, speed);
    let exclusion = spatial_exclusion_m(speed, config);
    let mut vehicles = Vec::new();
    if matches!(target, Action::ChangeLaneLeft | Action::Decelerate) && rng.random_bool(0.6) {
        vehicles.extend(close_lead(rng, &ego, config));
    }
    if vehicles.is_empty() {
        // one vehicle near enough to matter, in the other lane or behind
        let rel_y = int_in(rng, -exclusion + 1.0, exclusion - 1.0).unwrap_or(-20.0);
        let other = if rng.random_bool(0.5) {
            lane.left_neighbor()
                .or(lane.right_neighbor())
                .unwrap_or(lane)
        } else {
            lane
        };
        let v_speed = int_in(rng, VEHICLE_SPEED_RANGE_KMH.0 as f64, speed).unwrap_or(speed);
        vehicles.push(vehicle(rng, lane, other, rel_y, v_speed));
    }
    let extra = rng.random_range(0..=MAX_VEHICLES - vehicles.len()).min(2);
    vehicles.extend(scatter(rng, lane, extra, 0.0));
    vehicles.shuffle(rng);

    let mut scenario = Scenario::unlabeled(ego, vehicles, rules);
    let misleading = rng.random_bool(misleading_prob);
    let requested = if misleading {
        misleading_actions(&scenario, target, config)
            .choose(rng)
            .copied()
            .unwrap_or(target)
    } else {
        target
    };
    scenario.instruction = Some(phrase_for(rng, requested));
    scenario
}

/// An arbitrary world in the sampling box, not filtered for any label.
///
/// Vehicles never start overlapping the ego; everything else, including
/// rule-breaking speeds and instructions, is fair game.
pub fn sample_random_scenario<R: Rng>(rng: &mut R) -> Scenario {
    let lane = random_lane(rng);
    let ego = EgoState::new(lane, random_speed(rng, EGO_SPEED_RANGE_KMH));
    let n = rng.random_range(0..=MAX_VEHICLES);
    let mut vehicles = Vec::with_capacity(n);
    while vehicles.len() < n {
        let v = scatter(rng, lane, 1, 0.0).pop().expect("no exclusion");
        if !crate::world::is_collision(&ego, &v) {
            vehicles.push(v);
        }
    }
    let rules = TrafficRuleSet {
        speed_limit: rng
            .random_bool(0.7)
            .then(|| *SPEED_LIMITS_KMH.choose(rng).expect("non-empty") as f64),
        keep_right: rng.random_bool(0.6),
        overtaking_allowed: rng.random_bool(0.7),
        extra_rules: Vec::new(),
    };
    let instruction = rng.random_bool(0.6).then(|| {
        let action = *Action::ALL.choose(rng).expect("non-empty");
        phrase_for(rng, action)
    });
    Scenario {
        instruction,
        ..Scenario::unlabeled(ego, vehicles, rules)
    }
}
