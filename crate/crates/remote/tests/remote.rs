use std::time::{Duration, Instant};

use drivebench_core::driver::{run_driver, DriverError, DriverFailure, DriverRequest};
use drivebench_core::prompt::PromptConfig;
use drivebench_core::world::{EgoState, SurroundingVehicle};
use drivebench_core::{Action, Decision, LanePosition, Scenario, TrafficRuleSet};
use drivebench_remote::stub::{Reply, StubServer};
use drivebench_remote::{RemoteConfig, RemoteDriver};

fn request() -> DriverRequest {
    let ego = EgoState::new(LanePosition::RightDriving, 80.0);
    let lead = SurroundingVehicle::in_lane("car", ego.lane, ego.lane, 40.0, 80.0);
    let mut s = Scenario::unlabeled(ego, vec![lead], TrafficRuleSet::default());
    s.id = "remote-test".into();
    DriverRequest::highway(s, PromptConfig::v1(false), "t")
}

fn config(stub: &StubServer) -> RemoteConfig {
    RemoteConfig {
        base_url: stub.base_url(),
        model: "stub-model".into(),
        timeout_s: 2.0,
        backoff_base_s: 0.2,
        ..RemoteConfig::default()
    }
}

fn close_to(actual: Duration, expected: f64) -> bool {
    let a = actual.as_secs_f64();
    (a - expected).abs() <= 0.2 * expected
}

#[test]
fn single_success() {
    let stub = StubServer::start(vec![Reply::completion(r#"{"action": "maintain"}"#)]).unwrap();
    let driver = RemoteDriver::with_api_key(config(&stub), "sk-test").unwrap();
    let t = run_driver(&driver, request()).unwrap();
    assert_eq!(t.attempts, 1);
    assert_eq!(t.parsed.decision(), Some(&Decision::new(Action::Maintain)));
    assert_eq!(t.model_name.as_deref(), Some("stub-model"));
    assert!(t.failure.is_none());

    let reqs = stub.requests();
    assert_eq!(reqs.len(), 1);
    assert_eq!(reqs[0].path, "/v1/chat/completions");
    assert_eq!(reqs[0].authorization.as_deref(), Some("Bearer sk-test"));
    let body: serde_json::Value = serde_json::from_str(&reqs[0].body).unwrap();
    assert_eq!(body["model"], "stub-model");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["seed"], 0);
    let messages = body["messages"].as_array().unwrap();
    assert_eq!(messages.len(), 1);
    assert_eq!(messages[0]["role"], "user");
    assert_eq!(messages[0]["content"], request().prompt);
}

#[test]
fn rate_limit_then_success_backs_off() {
    let stub = StubServer::start(vec![
        Reply::rate_limited(),
        Reply::rate_limited(),
        Reply::completion(r#"{"action": "decelerate"}"#),
    ])
    .unwrap();
    let driver = RemoteDriver::with_api_key(config(&stub), "k").unwrap();
    let t = run_driver(&driver, request()).unwrap();
    assert_eq!(t.attempts, 3);
    assert_eq!(t.parsed.decision().unwrap().action, Action::Decelerate);
    let gaps = stub.arrival_gaps();
    assert_eq!(gaps.len(), 2);
    assert!(close_to(gaps[0], 0.2), "{gaps:?}");
    assert!(close_to(gaps[1], 0.4), "{gaps:?}");
}

#[test]
fn persistent_rate_limit_gives_up() {
    let stub = StubServer::start(vec![Reply::rate_limited()]).unwrap();
    let driver = RemoteDriver::with_api_key(config(&stub), "k").unwrap();
    let t = run_driver(&driver, request()).unwrap();
    assert_eq!(t.attempts, 4);
    assert_eq!(t.failure, Some(DriverFailure::RateLimited { attempts: 4 }));
    assert!(t.parsed.error().is_some());
}

#[test]
fn server_errors_are_retried() {
    let stub = StubServer::start(vec![
        Reply::Status(503, "{}".into()),
        Reply::completion(r#"{"action": "accelerate"}"#),
    ])
    .unwrap();
    let driver = RemoteDriver::with_api_key(config(&stub), "k").unwrap();
    let t = run_driver(&driver, request()).unwrap();
    assert_eq!(t.attempts, 2);
    assert_eq!(t.parsed.decision().unwrap().action, Action::Accelerate);
}

#[test]
fn auth_failure_is_not_retried() {
    let stub =
        StubServer::start(vec![Reply::Status(401, r#"{"error":"bad key"}"#.into())]).unwrap();
    let driver = RemoteDriver::with_api_key(config(&stub), "wrong").unwrap();
    let t = run_driver(&driver, request()).unwrap();
    assert_eq!(t.attempts, 1);
    assert!(matches!(t.failure, Some(DriverFailure::Auth { .. })));
    assert_eq!(stub.requests().len(), 1);
}

#[test]
fn hanging_server_times_out() {
    let stub = StubServer::start(vec![Reply::Hang]).unwrap();
    let cfg = RemoteConfig {
        timeout_s: 0.5,
        ..config(&stub)
    };
    let driver = RemoteDriver::with_api_key(cfg, "k").unwrap();
    let started = Instant::now();
    let t = run_driver(&driver, request()).unwrap();
    let took = started.elapsed().as_secs_f64();
    assert_eq!(t.attempts, 1);
    assert_eq!(t.failure, Some(DriverFailure::Timeout { timeout_s: 0.5 }));
    assert!((0.4..1.5).contains(&took), "{took}");
}

#[test]
fn unreachable_server_is_a_transport_failure() {
    let cfg = RemoteConfig {
        base_url: "http://127.0.0.1:9/v1".into(),
        backoff_base_s: 0.01,
        max_retries: 1,
        ..RemoteConfig::default()
    };
    let driver = RemoteDriver::with_api_key(cfg, "k").unwrap();
    let t = run_driver(&driver, request()).unwrap();
    assert_eq!(t.attempts, 2);
    assert!(matches!(t.failure, Some(DriverFailure::Transport { .. })));
}

#[test]
fn garbage_answer_is_a_recorded_parse_error() {
    let stub = StubServer::start(vec![Reply::completion("I would slow down a bit.")]).unwrap();
    let driver = RemoteDriver::with_api_key(config(&stub), "k").unwrap();
    let t = run_driver(&driver, request()).unwrap();
    assert_eq!(t.raw_response, "I would slow down a bit.");
    assert!(t.parsed.error().is_some());
    assert!(t.failure.is_none());
}

#[test]
fn missing_key_fails_fast() {
    let cfg = RemoteConfig {
        api_key_env: "DRIVEBENCH_SURELY_UNSET_KEY".into(),
        ..RemoteConfig::default()
    };
    assert_eq!(
        RemoteDriver::from_env(cfg).err(),
        Some(DriverError::MissingApiKey(
            "DRIVEBENCH_SURELY_UNSET_KEY".into()
        ))
    );
}

#[test]
fn invalid_config_rejected() {
    let cfg = RemoteConfig {
        concurrency: 0,
        ..RemoteConfig::default()
    };
    assert!(matches!(
        RemoteDriver::with_api_key(cfg, "k"),
        Err(DriverError::Config(_))
    ));
}

#[test]
fn concurrency_is_bounded() {
    let stub = StubServer::start(vec![Reply::Hang]).unwrap();
    let cfg = RemoteConfig {
        timeout_s: 0.3,
        concurrency: 2,
        ..config(&stub)
    };
    let driver = std::sync::Arc::new(RemoteDriver::with_api_key(cfg, "k").unwrap());
    let started = Instant::now();
    let handles: Vec<_> = (0..4)
        .map(|_| {
            let d = driver.clone();
            std::thread::spawn(move || run_driver(&*d, request()).unwrap())
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    // four timeouts through two slots take two rounds
    assert!(started.elapsed() >= Duration::from_millis(550));
}
