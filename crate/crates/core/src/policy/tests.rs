use proptest::prelude::*;

use super::*;
use crate::world::{LanePosition::*, TrafficRuleSet, COLLISION_DISTANCE_M};

fn car_in(ego_lane: LanePosition, lane: LanePosition, y: f64, v: f64) -> SurroundingVehicle<f64> {
    SurroundingVehicle::in_lane("car", ego_lane, lane, y, v)
}

fn scenario(lane: LanePosition, speed: f64, vehicles: Vec<SurroundingVehicle<f64>>) -> Scenario {
    Scenario::unlabeled(
        EgoState::new(lane, speed),
        vehicles,
        TrafficRuleSet::default(),
    )
}

fn with_limit(mut s: Scenario, limit: f64) -> Scenario {
    s.rules.speed_limit = Some(limit);
    s
}

#[test]
fn empty_road_is_safe_except_off_road() {
    let cfg = PolicyConfig::default();
    for lane in [RightDriving, LeftOvertaking] {
        let s = scenario(lane, 90.0, vec![]);
        for a in Action::ALL {
            let off_road = lane.after(a).is_none();
            assert_eq!(is_action_safe(&s, a, &cfg), !off_road, "{lane:?} {a}");
        }
    }
    assert!(!is_action_safe(
        &scenario(RightDriving, 90.0, vec![]),
        Action::ChangeLaneRight,
        &cfg
    ));
}

#[test]
fn envelope_matches_brute_force_scan() {
    let cfg = PolicyConfig::default();
    for dv in [0.0, 5.0, 10.0, 10.5, 30.0] {
        for y in -20..=20 {
            let y = y as f64;
            let s = scenario(
                RightDriving,
                80.0,
                vec![car_in(RightDriving, LeftOvertaking, y, 80.0 + dv)],
            );
            // independent restatement of the clearance window
            let occupied = (-10.0..=15.0).contains(&y);
            let closing_from_behind = (-20.0..-10.0).contains(&y) && dv > 10.0;
            assert_eq!(
                is_action_safe(&s, Action::ChangeLaneLeft, &cfg),
                !(occupied || closing_from_behind),
                "y {y} dv {dv}"
            );
        }
    }
    let s = scenario(
        RightDriving,
        80.0,
        vec![car_in(RightDriving, LeftOvertaking, 5.0, 80.0)],
    );
    assert!(!is_action_safe(&s, Action::ChangeLaneLeft, &cfg));
}

#[test]
fn accelerate_blocked_by_short_time_to_collision() {
    let cfg = PolicyConfig::default();
    // after one tick at 105 km/h the 60 km/h lead is 25 - 12.5 = 12.5 m away,
    // closing at 12.5 m/s: ttc 1 s < 2 s
    let s = scenario(
        RightDriving,
        100.0,
        vec![car_in(RightDriving, RightDriving, 25.0, 60.0)],
    );
    assert!(!is_action_safe(&s, Action::Accelerate, &cfg));
    let s = scenario(
        RightDriving,
        100.0,
        vec![car_in(RightDriving, RightDriving, 200.0, 60.0)],
    );
    assert!(is_action_safe(&s, Action::Accelerate, &cfg));
}

#[test]
fn overspeed_ignores_misleading_instruction() {
    let mut s = with_limit(scenario(RightDriving, 80.0, vec![]), 70.0);
    s.instruction = Some("speed up and overtake".into());
    let d = decide(&s, &PolicyConfig::default());
    assert_eq!(d.action, Action::Decelerate);
    assert!(d.reason.unwrap().contains("70"));
}

#[test]
fn empty_road_at_limit_maintains() {
    let s = with_limit(scenario(RightDriving, 100.0, vec![]), 100.0);
    assert_eq!(
        decide_with_rule(&s, &PolicyConfig::default()),
        (LadderRule::Maintain, Action::Maintain)
    );
}

/// Holds one action for `ticks` ticks and reports whether the ego ever overlaps a vehicle.
fn collides_holding(s: &Scenario, action: Action, ticks: usize) -> bool {
    let mut ego = s.ego;
    let mut vs = s.vehicles.clone();
    for _ in 0..ticks {
        let (e, n) = step_kinematics(&ego, &vs, action, 1.0);
        ego = e;
        vs = n;
        let hit = vs.iter().any(|v| {
            vehicle_lane(&ego, v) == Some(ego.lane) && v.rel_y.abs() < COLLISION_DISTANCE_M
        });
        if hit {
            return true;
        }
    }
    false
}

#[test]
fn close_slow_lead_prefers_overtake() {
    let cfg = PolicyConfig::default();
    let s = with_limit(
        scenario(
            RightDriving,
            70.0,
            vec![car_in(RightDriving, RightDriving, 15.0, 50.0)],
        ),
        80.0,
    );
    // follow distance max(10, 2 * 70 / 3.6) = 38.9 m > 15 m
    assert!((cfg.follow_distance(70.0) - 2.0 * 70.0 * 1000.0 / 3600.0).abs() < 1e-9);
    let safe: Vec<Action> = Action::ALL
        .into_iter()
        .filter(|a| !collides_holding(&s, *a, 10))
        .collect();
    assert_eq!(safe, vec![Action::Decelerate, Action::ChangeLaneLeft]);
    assert_eq!(
        decide_with_rule(&s, &cfg),
        (LadderRule::FollowGap, Action::ChangeLaneLeft)
    );

    let mut blocked = s.clone();
    blocked.rules.overtaking_allowed = false;
    assert_eq!(decide(&blocked, &cfg).action, Action::Decelerate);
}

#[test]
fn keep_right_returns_to_driving_lane() {
    let cfg = PolicyConfig::default();
    let s = scenario(
        LeftOvertaking,
        100.0,
        vec![car_in(LeftOvertaking, RightDriving, -40.0, 90.0)],
    );
    assert_eq!(
        decide_with_rule(&s, &cfg),
        (LadderRule::KeepRight, Action::ChangeLaneRight)
    );
    // a slower car just ahead on the right keeps us in the overtaking lane
    let s = scenario(
        LeftOvertaking,
        100.0,
        vec![car_in(LeftOvertaking, RightDriving, 30.0, 80.0)],
    );
    assert_eq!(decide(&s, &cfg).action, Action::Maintain);
}

#[test]
fn instruction_followed_only_when_safe_and_legal() {
    let cfg = PolicyConfig::default();
    let mut s = with_limit(scenario(RightDriving, 80.0, vec![]), 100.0);
    s.instruction = Some("please slow down".into());
    assert_eq!(
        decide_with_rule(&s, &cfg),
        (LadderRule::Instruction, Action::Decelerate)
    );
    s.instruction = Some("change lane to the right".into());
    assert_eq!(
        decide_with_rule(&s, &cfg),
        (LadderRule::SpeedRecovery, Action::Accelerate)
    );
    s.instruction = Some("overtake".into());
    // keep-right with nobody to overtake: the left lane is not ours to use
    assert_eq!(decide(&s, &cfg).action, Action::Accelerate);
    s.rules.keep_right = false;
    assert_eq!(decide(&s, &cfg).action, Action::ChangeLaneLeft);
}

#[test]
fn explanations() {
    let cfg = PolicyConfig::default();
    let s = with_limit(scenario(RightDriving, 80.0, vec![]), 70.0);
    let text = explain(LadderRule::SpeedLimit, &s, &cfg);
    assert!(text.contains("70") && text.contains("80") && text.contains("decelerate"));
    let text = explain(LadderRule::Maintain, &s, &cfg);
    assert!(text.contains("maintain") && text.contains("No safety constraint"));
    let text = explain(LadderRule::KeepRight, &s, &cfg);
    assert!(text.contains("keep right"));
    let s = scenario(
        RightDriving,
        70.0,
        vec![car_in(RightDriving, RightDriving, 15.0, 50.0)],
    );
    assert!(explain(LadderRule::FollowGap, &s, &cfg).contains("15 m"));
}

#[test]
fn ladder_indices() {
    for (i, r) in LadderRule::ALL.iter().enumerate() {
        assert_eq!(r.index(), i + 1);
        assert_eq!(LadderRule::from_index(i + 1), Some(*r));
    }
    assert_eq!(LadderRule::from_index(0), None);
    assert_eq!(LadderRule::from_index(7), None);
}

#[test]
fn config_validation() {
    assert!(PolicyConfig::default().validate().is_ok());
    let c = PolicyConfig {
        headway: 0.0,
        ..PolicyConfig::default()
    };
    assert!(c.validate().is_err());
    let c = PolicyConfig {
        limit_tolerance: -1.0,
        ..PolicyConfig::default()
    };
    assert!(c.validate().is_err());
}

fn lane() -> impl Strategy<Value = LanePosition> {
    prop_oneof![Just(RightDriving), Just(LeftOvertaking)]
}

prop_compose! {
    fn arb_scenario()(
        ego_lane in lane(),
        speed in 40u32..=120,
        limit in proptest::option::of((4u32..=12).prop_map(|l| l as f64 * 10.0)),
        keep_right in any::<bool>(),
        overtaking in any::<bool>(),
        cars in proptest::collection::vec((lane(), -80i32..=120, 20u32..=130), 0..=4),
        instr in proptest::option::of(proptest::sample::select(INSTRUCTION_PHRASES.to_vec())),
    ) -> Scenario {
        let vehicles = cars.into_iter()
            .map(|(l, y, v)| car_in(ego_lane, l, y as f64, v as f64))
            .collect();
        let mut s = scenario(ego_lane, speed as f64, vehicles);
        s.rules.speed_limit = limit;
        s.rules.keep_right = keep_right;
        s.rules.overtaking_allowed = overtaking;
        s.instruction = instr.map(|(p, _)| p.to_string());
        s
    }
}

proptest! {
    #[test]
    fn never_accelerates_above_ceiling(s in arb_scenario()) {
        let cfg = PolicyConfig::default();
        if let Some(limit) = s.rules.speed_limit {
            if s.ego.speed_kmh >= limit + cfg.limit_tolerance {
                prop_assert_ne!(decide(&s, &cfg).action, Action::Accelerate);
            }
        }
    }

    #[test]
    fn lane_changes_are_always_safe(s in arb_scenario()) {
        let cfg = PolicyConfig::default();
        let a = decide(&s, &cfg).action;
        if a.is_lane_change() {
            prop_assert!(is_action_safe(&s, a, &cfg));
        }
    }

    #[test]
    fn invariant_under_vehicle_permutation(s in arb_scenario()) {
        let cfg = PolicyConfig::default();
        let mut r = s.clone();
        r.vehicles.reverse();
        prop_assert_eq!(decide(&s, &cfg), decide(&r, &cfg));
        let n = r.vehicles.len().min(1);
        r.vehicles.rotate_left(n);
        prop_assert_eq!(decide(&s, &cfg), decide(&r, &cfg));
    }

    #[test]
    fn misleading_instructions_are_ignored(s in arb_scenario()) {
        let cfg = PolicyConfig::default();
        if let Some(requested) = s.instruction_text().and_then(map_instruction) {
            if !is_action_safe(&s, requested, &cfg) || !is_rule_compliant(&s, requested, &cfg) {
                let mut plain = s.clone();
                plain.instruction = None;
                prop_assert_eq!(decide(&s, &cfg), decide(&plain, &cfg));
            }
        }
    }

    #[test]
    fn deterministic(s in arb_scenario()) {
        let cfg = PolicyConfig::default();
        let a = serde_json::to_string(&decide(&s, &cfg)).unwrap();
        let b = serde_json::to_string(&decide(&s.clone(), &cfg)).unwrap();
        prop_assert_eq!(a, b);
    }
}
