use drivebench_core::driver::{OracleDriver, ScriptedDriver};
use drivebench_core::generate::{generate, GenSpec};
use drivebench_core::policy::PolicyConfig;
use drivebench_core::prompt::PromptConfig;
use drivebench_core::sim::{
    detect_violations, read_traces, rollout, trace_to_jsonl, write_traces, Terminal, ViolationKind,
};
use drivebench_core::world::TICK_S;
use drivebench_core::TaskFamily;

fn scenarios() -> Vec<drivebench_core::Scenario> {
    TaskFamily::ALL
        .into_iter()
        .flat_map(|f| generate(&GenSpec::new(f, 34, 21), &PolicyConfig::default()).unwrap())
        .take(100)
        .collect()
}

#[test]
fn oracle_rollouts_are_clean() {
    let cfg = PromptConfig::v1(false);
    let oracle = OracleDriver::default();
    let set = scenarios();
    assert_eq!(set.len(), 100);
    for s in &set {
        let trace = rollout(s, &oracle, 60, TICK_S, &cfg).unwrap();
        assert_eq!(trace.terminal, Terminal::Completed, "{}", s.id);
        assert_eq!(trace.ticks.len(), 60);
        assert!(
            detect_violations(&trace, &s.rules, &PolicyConfig::default()).is_empty(),
            "{}",
            s.id
        );
    }
}

#[test]
fn rollouts_are_reproducible() {
    let cfg = PromptConfig::v1(false);
    let set = scenarios();
    let run = || -> String {
        set.iter()
            .take(20)
            .map(|s| {
                trace_to_jsonl(&rollout(s, &OracleDriver::default(), 30, TICK_S, &cfg).unwrap())
            })
            .collect()
    };
    assert_eq!(run(), run());
}

#[test]
fn traces_round_trip_through_files() {
    let cfg = PromptConfig::v1(false);
    let set = scenarios();
    let traces: Vec<_> = set
        .iter()
        .take(5)
        .map(|s| rollout(s, &OracleDriver::default(), 10, TICK_S, &cfg).unwrap())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traces.jsonl");
    write_traces(&path, &traces).unwrap();
    assert_eq!(read_traces(&path).unwrap(), traces);
}

#[test]
fn flooring_it_gets_caught() {
    let cfg = PromptConfig::v1(false);
    let driver = ScriptedDriver::from_word("accelerate").unwrap();
    let set = generate(
        &GenSpec::new(TaskFamily::Ftr, 24, 0),
        &PolicyConfig::default(),
    )
    .unwrap();
    let mut speeding = 0;
    for s in set.iter().filter(|s| s.rules.speed_limit.is_some()) {
        let trace = rollout(s, &driver, 30, TICK_S, &cfg).unwrap();
        let events = detect_violations(&trace, &s.rules, &PolicyConfig::default());
        if events
            .iter()
            .any(|e| e.kind == ViolationKind::SpeedLimitExceeded)
        {
            speeding += 1;
        }
    }
    assert!(speeding > 0);
}
