//! One console session: a world, a driver, and the history of what the
//! driver was asked and answered.
//!
//! Deciding is split in two so the (blocking) driver call can run outside
//! the session's lock-holding task: [`Session::next_request`] builds the
//! request, [`Session::apply`] folds the transcript back in.

use std::sync::Arc;

use drivebench_core::driver::{Driver, DriverRequest, DriverTranscript, Parsed};
use drivebench_core::generate::{generate, GenSpec};
use drivebench_core::poc::{
    render_poc_prompt, resolve_instruction, three_cone_scene, DetectedObject, OfficerSignal,
    PocCommand, PocScene,
};
use drivebench_core::policy::PolicyConfig;
use drivebench_core::prompt::{render_prompt, PromptConfig};
use drivebench_core::sim::{
    collision_events, detect_violations, RolloutTrace, Terminal, TickRecord, ViolationEvent,
};
use drivebench_core::world::{step_kinematics, Action, TICK_S};
use drivebench_core::{Scenario, TaskFamily};
use serde::{Deserialize, Serialize};

use crate::drivers::DriverSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Highway,
    Poc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum World {
    Highway { scenario: Scenario },
    Poc { scene: PocScene },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionView {
    pub tick: usize,
    pub raw: String,
    pub parsed: Parsed,
    /// Highway: the action the world actually applied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub applied: Option<Action>,
    /// Poc: the object a go command heads for.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub destination: Option<DetectedObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionView {
    pub session_id: String,
    pub mode: Mode,
    pub seed: u64,
    pub driver: String,
    pub tick: usize,
    pub terminal: Option<Terminal>,
    pub world: World,
    pub prompt: String,
    pub last_decision: Option<DecisionView>,
    pub violations: Vec<ViolationEvent>,
    pub history_len: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("officer signal only exists in poc sessions")]
    ModeMismatch,
    #[error("session ended with a collision; reset it to continue")]
    Ended,
    #[error("instruction text is empty")]
    EmptyInstruction,
    #[error("{0}")]
    BadWorld(String),
}

pub struct Session {
    pub id: String,
    pub mode: Mode,
    pub seed: u64,
    pub driver_spec: DriverSpec,
    pub driver: Arc<dyn Driver>,
    prompt_cfg: PromptConfig,
    policy: PolicyConfig,
    world: World,
    initial: World,
    ticks: Vec<TickRecord>,
    terminal: Option<Terminal>,
    violations: Vec<ViolationEvent>,
    last_decision: Option<DecisionView>,
    history: Vec<DriverTranscript>,
}

/// What one decision produced, for the event stream.
#[derive(Debug, Clone)]
pub struct Applied {
    pub decision: DecisionView,
    pub new_violations: Vec<ViolationEvent>,
}

/// Starting highway world for a seed: a spatial scenario with its
/// instruction left to the operator.
pub fn highway_world(seed: u64, policy: &PolicyConfig) -> Result<Scenario, SessionError> {
    let mut s = generate(&GenSpec::new(TaskFamily::Sadm, 1, seed), policy)
        .map_err(|e| SessionError::BadWorld(e.to_string()))?
        .remove(0);
    s.id = format!("session-s{seed}");
    s.instruction = None;
    Ok(s)
}

impl Session {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: String,
        mode: Mode,
        seed: u64,
        driver_spec: DriverSpec,
        driver: Arc<dyn Driver>,
        prompt_cfg: PromptConfig,
        policy: PolicyConfig,
        world: Option<World>,
    ) -> Result<Session, SessionError> {
        let world = match world {
            Some(w) => {
                check_world(&w, mode)?;
                w
            }
            None => fresh_world(mode, seed, &policy)?,
        };
        Ok(Session {
            id,
            mode,
            seed,
            driver_spec,
            driver,
            prompt_cfg,
            policy,
            initial: world.clone(),
            world,
            ticks: Vec::new(),
            terminal: None,
            violations: Vec::new(),
            last_decision: None,
            history: Vec::new(),
        })
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            session_id: self.id.clone(),
            mode: self.mode,
            seed: self.seed,
            driver: self.driver_spec.to_string(),
            tick: self.ticks.len(),
            terminal: self.terminal,
            world: self.world.clone(),
            prompt: self.prompt(),
            last_decision: self.last_decision.clone(),
            violations: self.violations.clone(),
            history_len: self.history.len(),
        }
    }

    pub fn prompt(&self) -> String {
        match &self.world {
            World::Highway { scenario } => render_prompt(scenario, &self.prompt_cfg),
            World::Poc { scene } => render_poc_prompt(scene, &self.prompt_cfg),
        }
    }

    pub fn history(&self) -> &[DriverTranscript] {
        &self.history
    }

    pub fn set_instruction(&mut self, text: &str) -> Result<(), SessionError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(SessionError::EmptyInstruction);
        }
        match &mut self.world {
            World::Highway { scenario } => scenario.instruction = Some(text.to_string()),
            World::Poc { scene } => scene.instruction = Some(text.to_string()),
        }
        Ok(())
    }

    pub fn set_officer(&mut self, signal: OfficerSignal) -> Result<(), SessionError> {
        match &mut self.world {
            World::Poc { scene } => {
                scene.officer = signal;
                Ok(())
            }
            World::Highway { .. } => Err(SessionError::ModeMismatch),
        }
    }

    /// Back to the seed's starting world with an empty history.
    pub fn reset(&mut self, seed: Option<u64>) -> Result<(), SessionError> {
        let world = match seed {
            Some(s) if s != self.seed => fresh_world(self.mode, s, &self.policy)?,
            _ => self.initial.clone(),
        };
        self.seed = seed.unwrap_or(self.seed);
        self.initial = world.clone();
        self.world = world;
        self.ticks.clear();
        self.terminal = None;
        self.violations.clear();
        self.last_decision = None;
        self.history.clear();
        Ok(())
    }

    pub fn next_request(&self) -> Result<DriverRequest, SessionError> {
        if self.terminal == Some(Terminal::Collision) {
            return Err(SessionError::Ended);
        }
        let tick = self.ticks.len();
        let session = format!("{}-t{tick}", self.id);
        Ok(match &self.world {
            World::Highway { scenario } => {
                DriverRequest::highway(scenario.clone(), self.prompt_cfg.clone(), session)
            }
            World::Poc { scene } => {
                let mut scene = scene.clone();
                scene.ground_truth = resolve_instruction(&scene);
                DriverRequest::poc(scene, self.prompt_cfg.clone(), session)
            }
        })
    }

    /// Folds a driver answer into the world.
    pub fn apply(&mut self, transcript: DriverTranscript) -> Applied {
        let tick = self.ticks.len();
        let parsed = transcript.parsed.clone();
        let raw = transcript.raw_response.clone();
        self.history.push(transcript);
        let (decision, new_violations) = match &mut self.world {
            World::Poc { scene } => {
                let destination = match parsed.command() {
                    Some(PocCommand::GoTo(id)) => scene.object(id).cloned(),
                    _ => None,
                };
                let view = DecisionView {
                    tick,
                    raw,
                    parsed,
                    applied: None,
                    destination,
                };
                (view, Vec::new())
            }
            World::Highway { scenario } => {
                let applied = parsed.decision().map_or(Action::Maintain, |d| d.action);
                let (ego, vehicles) =
                    step_kinematics(&scenario.ego, &scenario.vehicles, applied, TICK_S);
                let events = collision_events(&scenario.vehicles, &ego, &vehicles, tick);
                let collided = !events.is_empty();
                self.ticks.push(TickRecord {
                    tick_index: tick,
                    ego: scenario.ego,
                    vehicles: scenario.vehicles.clone(),
                    decision: parsed.clone(),
                    applied,
                    events,
                });
                scenario.ego = ego;
                scenario.vehicles = vehicles;
                let failed_parse = self.ticks.iter().any(|t| t.decision.error().is_some());
                let terminal = if collided {
                    Terminal::Collision
                } else if failed_parse {
                    Terminal::ParseFailure
                } else {
                    Terminal::Completed
                };
                self.terminal = Some(terminal);
                let trace = RolloutTrace {
                    scenario_id: scenario.id.clone(),
                    ticks: self.ticks.clone(),
                    terminal,
                    final_ego: scenario.ego,
                    final_vehicles: scenario.vehicles.clone(),
                };
                let all = detect_violations(&trace, &scenario.rules, &self.policy);
                let fresh: Vec<ViolationEvent> = all
                    .into_iter()
                    .filter(|e| !self.violations.contains(e))
                    .collect();
                self.violations.extend(fresh.iter().cloned());
                let view = DecisionView {
                    tick,
                    raw,
                    parsed,
                    applied: Some(applied),
                    destination: None,
                };
                (view, fresh)
            }
        };
        self.last_decision = Some(decision.clone());
        Applied {
            decision,
            new_violations,
        }
    }
}

fn fresh_world(mode: Mode, seed: u64, policy: &PolicyConfig) -> Result<World, SessionError> {
    Ok(match mode {
        Mode::Highway => World::Highway {
            scenario: highway_world(seed, policy)?,
        },
        Mode::Poc => World::Poc {
            scene: three_cone_scene(seed),
        },
    })
}

fn check_world(world: &World, mode: Mode) -> Result<(), SessionError> {
    match (world, mode) {
        (World::Highway { scenario }, Mode::Highway) => scenario
            .validate()
            .and_then(|_| scenario.check_clear_start())
            .map_err(|e| SessionError::BadWorld(e.to_string())),
        (World::Poc { scene }, Mode::Poc) => {
            let mut s = scene.clone();
            s.ground_truth = PocCommand::Stop;
            s.validate()
                .map_err(|e| SessionError::BadWorld(e.to_string()))
        }
        _ => Err(SessionError::BadWorld(
            "world does not match the session mode".into(),
        )),
    }
}
