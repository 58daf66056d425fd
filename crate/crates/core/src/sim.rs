//! Closed-loop rollouts: render, drive, parse, step, repeat.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::driver::{run_driver, Driver, DriverError, DriverRequest, DriverTranscript, Parsed};
use crate::policy::{lane_change_clear, PolicyConfig};
use crate::prompt::PromptConfig;
use crate::text::fmt_num;
use crate::world::{
    is_collision, passed_through, step_kinematics, vehicle_lane, Action, EgoState, Scenario,
    SurroundingVehicle, TrafficRuleSet,
};

/// Consecutive over-limit ticks tolerated before a speeding violation.
pub const OVERSPEED_GRACE_TICKS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    SpeedLimitExceeded,
    UnsafeLaneChange,
    OffRoadLaneChange,
    Collision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationEvent {
    pub kind: ViolationKind,
    pub tick: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick_index: usize,
    /// World state the decision was made in.
    pub ego: EgoState<f64>,
    pub vehicles: Vec<SurroundingVehicle<f64>>,
    pub decision: Parsed,
    /// Action actually applied; `maintain` when the response did not parse.
    pub applied: Action,
    pub events: Vec<ViolationEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    /// Ran every tick without collision and every response parsed.
    Completed,
    Collision,
    /// Ran without collision, but at least one response failed to parse.
    ParseFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutTrace {
    pub scenario_id: String,
    pub ticks: Vec<TickRecord>,
    pub terminal: Terminal,
    /// State after the last applied action.
    pub final_ego: EgoState<f64>,
    pub final_vehicles: Vec<SurroundingVehicle<f64>>,
}

impl RolloutTrace {
    /// Ego state before each tick followed by the final state.
    pub fn ego_states(&self) -> impl Iterator<Item = &EgoState<f64>> {
        self.ticks
            .iter()
            .map(|t| &t.ego)
            .chain(std::iter::once(&self.final_ego))
    }
}

/// The world at some tick, re-expressed as a scenario for the driver.
pub fn snapshot(
    base: &Scenario,
    ego: &EgoState<f64>,
    vehicles: &[SurroundingVehicle<f64>],
) -> Scenario {
    Scenario {
        ego: *ego,
        vehicles: vehicles.to_vec(),
        ..base.clone()
    }
}

/// Collision events for the tick that moved `before` to (`ego`, `vehicles`).
///
/// `before` holds the same vehicles in the same order, one tick earlier.
pub fn collision_events(
    before: &[SurroundingVehicle<f64>],
    ego: &EgoState<f64>,
    vehicles: &[SurroundingVehicle<f64>],
    tick: usize,
) -> Vec<ViolationEvent> {
    before
        .iter()
        .zip(vehicles)
        .filter_map(|(b, v)| {
            let detail = if is_collision(ego, v) {
                format!(
                    "ego overlaps {} at x={} m, y={} m",
                    v.category,
                    fmt_num(v.rel_x),
                    fmt_num(v.rel_y)
                )
            } else if passed_through(ego, b, v) {
                format!(
                    "ego passed through {} between y={} m and y={} m",
                    v.category,
                    fmt_num(b.rel_y),
                    fmt_num(v.rel_y)
                )
            } else {
                return None;
            };
            Some(ViolationEvent {
                kind: ViolationKind::Collision,
                tick,
                detail,
            })
        })
        .collect()
}

/// Rollout core with a caller-supplied decision source.
pub fn rollout_with<E, F>(
    scenario: &Scenario,
    steps: usize,
    dt: f64,
    mut decide: F,
) -> Result<RolloutTrace, E>
where
    F: FnMut(&Scenario, usize) -> Result<Parsed, E>,
{
    assert!(steps >= 1, "a rollout needs at least one tick");
    let mut ego = scenario.ego;
    let mut vehicles = scenario.vehicles.clone();
    let mut ticks = Vec::with_capacity(steps);
    let mut parse_failed = false;
    let mut collided = false;

    for tick in 0..steps {
        let snap = snapshot(scenario, &ego, &vehicles);
        let decision = decide(&snap, tick)?;
        let applied = match &decision {
            Parsed::Decision { decision } => decision.action,
            _ => {
                parse_failed = true;
                Action::Maintain
            }
        };
        let (next_ego, next_vehicles) = step_kinematics(&ego, &vehicles, applied, dt);
        let events = collision_events(&vehicles, &next_ego, &next_vehicles, tick);
        collided = !events.is_empty();
        ticks.push(TickRecord {
            tick_index: tick,
            ego,
            vehicles,
            decision,
            applied,
            events,
        });
        ego = next_ego;
        vehicles = next_vehicles;
        if collided {
            break;
        }
    }

    let terminal = if collided {
        Terminal::Collision
    } else if parse_failed {
        Terminal::ParseFailure
    } else {
        Terminal::Completed
    };
    Ok(RolloutTrace {
        scenario_id: scenario.id.clone(),
        ticks,
        terminal,
        final_ego: ego,
        final_vehicles: vehicles,
    })
}

/// Closed-loop rollout against a driver, keeping every transcript.
pub fn rollout_with_transcripts<D: Driver + ?Sized>(
    scenario: &Scenario,
    driver: &D,
    steps: usize,
    dt: f64,
    cfg: &PromptConfig,
) -> Result<(RolloutTrace, Vec<DriverTranscript>), DriverError> {
    let mut transcripts = Vec::with_capacity(steps);
    let trace = rollout_with(scenario, steps, dt, |snap, tick| {
        let request = DriverRequest::highway(
            snap.clone(),
            cfg.clone(),
            format!("rollout-{}-t{tick}", scenario.id),
        );
        let t = run_driver(driver, request)?;
        let parsed = t.parsed.clone();
        transcripts.push(t);
        Ok(parsed)
    })?;
    Ok((trace, transcripts))
}

pub fn rollout<D: Driver + ?Sized>(
    scenario: &Scenario,
    driver: &D,
    steps: usize,
    dt: f64,
    cfg: &PromptConfig,
) -> Result<RolloutTrace, DriverError> {
    rollout_with_transcripts(scenario, driver, steps, dt, cfg).map(|(trace, _)| trace)
}

/// Scans a trace for rule and safety violations.
///
/// Speeding is counted only from the first state a decision influenced, and
/// only once the ego has been over `limit + tolerance` for
/// [`OVERSPEED_GRACE_TICKS`] consecutive states.
pub fn detect_violations(
    trace: &RolloutTrace,
    rules: &TrafficRuleSet,
    config: &PolicyConfig,
) -> Vec<ViolationEvent> {
    let mut events = Vec::new();

    for t in &trace.ticks {
        if !t.applied.is_lane_change() {
            continue;
        }
        if t.ego.lane.after(t.applied).is_none() {
            events.push(ViolationEvent {
                kind: ViolationKind::OffRoadLaneChange,
                tick: t.tick_index,
                detail: format!("{} from the {}", t.applied, t.ego.lane.describe()),
            });
        } else if !lane_change_clear(&t.ego, &t.vehicles, t.applied, &config.envelope) {
            let target = t.ego.lane.after(t.applied);
            let blockers: Vec<String> = t
                .vehicles
                .iter()
                .filter(|v| vehicle_lane(&t.ego, v) == target)
                .map(|v| format!("{} at y={} m", v.category, fmt_num(v.rel_y)))
                .collect();
            events.push(ViolationEvent {
                kind: ViolationKind::UnsafeLaneChange,
                tick: t.tick_index,
                detail: format!(
                    "{} into occupied envelope ({})",
                    t.applied,
                    blockers.join(", ")
                ),
            });
        }
    }

    if let Some(limit) = rules.speed_limit {
        let ceiling = limit + config.limit_tolerance;
        let mut run = 0;
        for (i, ego) in trace.ego_states().enumerate().skip(1) {
            if ego.speed_kmh > ceiling {
                run += 1;
                if run == OVERSPEED_GRACE_TICKS {
                    events.push(ViolationEvent {
                        kind: ViolationKind::SpeedLimitExceeded,
                        tick: i,
                        detail: format!(
                            "at {} km/h, over the {} km/h limit for {OVERSPEED_GRACE_TICKS} ticks",
                            fmt_num(ego.speed_kmh),
                            fmt_num(limit)
                        ),
                    });
                }
            } else {
                run = 0;
            }
        }
    }

    for t in &trace.ticks {
        events.extend(
            t.events
                .iter()
                .filter(|e| e.kind == ViolationKind::Collision)
                .cloned(),
        );
    }
    events.sort_by_key(|e| e.tick);
    events
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum TraceLine {
    Start {
        scenario_id: String,
    },
    Tick(TickRecord),
    End {
        terminal: Terminal,
        final_ego: EgoState<f64>,
        final_vehicles: Vec<SurroundingVehicle<f64>>,
    },
}

/// Serializes a trace as JSONL: a start line, one line per tick, an end line.
pub fn trace_to_jsonl(trace: &RolloutTrace) -> String {
    let mut lines = vec![TraceLine::Start {
        scenario_id: trace.scenario_id.clone(),
    }];
    lines.extend(trace.ticks.iter().cloned().map(TraceLine::Tick));
    lines.push(TraceLine::End {
        terminal: trace.terminal,
        final_ego: trace.final_ego,
        final_vehicles: trace.final_vehicles.clone(),
    });
    let mut out = String::new();
    for l in lines {
        out.push_str(&serde_json::to_string(&l).expect("trace serializes"));
        out.push('\n');
    }
    out
}

pub fn write_traces(path: &Path, traces: &[RolloutTrace]) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for t in traces {
        out.write_all(trace_to_jsonl(t).as_bytes())?;
    }
    out.flush()
}

/// Reads every trace in a JSONL file written by [`write_traces`].
pub fn read_traces(path: &Path) -> io::Result<Vec<RolloutTrace>> {
    let reader = BufReader::new(File::open(path)?);
    let bad = |n: usize, msg: String| {
        io::Error::new(io::ErrorKind::InvalidData, format!("line {n}: {msg}"))
    };
    let mut traces = Vec::new();
    let mut current: Option<(String, Vec<TickRecord>)> = None;
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TraceLine =
            serde_json::from_str(&line).map_err(|e| bad(n + 1, e.to_string()))?;
        match parsed {
            TraceLine::Start { scenario_id } => {
                if current.is_some() {
                    return Err(bad(
                        n + 1,
                        "trace started before the previous one ended".into(),
                    ));
                }
                current = Some((scenario_id, Vec::new()));
            }
            TraceLine::Tick(t) => match current.as_mut() {
                Some((_, ticks)) => ticks.push(t),
                None => return Err(bad(n + 1, "tick outside a trace".into())),
            },
            TraceLine::End {
                terminal,
                final_ego,
                final_vehicles,
            } => {
                let (scenario_id, ticks) = current
                    .take()
                    .ok_or_else(|| bad(n + 1, "end without start".into()))?;
                traces.push(RolloutTrace {
                    scenario_id,
                    ticks,
                    terminal,
                    final_ego,
                    final_vehicles,
                });
            }
        }
    }
    if current.is_some() {
        return Err(bad(0, "unterminated trace".into()));
    }
    Ok(traces)
}
