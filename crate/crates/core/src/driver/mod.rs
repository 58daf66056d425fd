//! The driver abstraction: anything that answers a rendered scenario.
//!
//! A [`Driver`] only produces raw response text. [`run_driver`] wraps it with
//! timing and parsing so every implementation yields the same
//! [`DriverTranscript`] shape, and parse or transport failures land in the
//! transcript instead of aborting a run. Configuration problems (a fixture
//! without the requested id, a missing API key) are the only hard errors.

mod builtin;
mod transcript;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::poc::{parse_poc_response, render_poc_prompt, PocScene};
use crate::prompt::{parse_decision, render_prompt, PromptConfig};
use crate::world::Scenario;

pub use builtin::{load_fixture, OracleDriver, ReplayDriver, ScriptedDriver};
pub use transcript::{read_transcripts, write_transcripts, Parsed, Prediction, TranscriptWriter};

/// What a driver is asked about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Subject {
    Highway { scenario: Scenario },
    Poc { scene: PocScene },
}

impl Subject {
    pub fn id(&self) -> &str {
        match self {
            Subject::Highway { scenario } => &scenario.id,
            Subject::Poc { scene } => &scene.id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverRequest {
    pub subject: Subject,
    pub prompt: String,
    pub cfg: PromptConfig,
    pub session_id: String,
}

impl DriverRequest {
    pub fn highway(scenario: Scenario, cfg: PromptConfig, session_id: impl Into<String>) -> Self {
        DriverRequest {
            prompt: render_prompt(&scenario, &cfg),
            subject: Subject::Highway { scenario },
            cfg,
            session_id: session_id.into(),
        }
    }

    pub fn poc(scene: PocScene, cfg: PromptConfig, session_id: impl Into<String>) -> Self {
        DriverRequest {
            prompt: render_poc_prompt(&scene, &cfg),
            subject: Subject::Poc { scene },
            cfg,
            session_id: session_id.into(),
        }
    }

    pub fn subject_id(&self) -> &str {
        self.subject.id()
    }
}

/// A per-request failure that is recorded, not raised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriverFailure {
    #[error("authentication rejected: {message}")]
    Auth { message: String },
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("no response within {timeout_s} s")]
    Timeout { timeout_s: f64 },
    #[error("transport error: {message}")]
    Transport { message: String },
}

/// Raw output of one driver call.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub raw: String,
    pub attempts: u32,
    pub failure: Option<DriverFailure>,
}

impl Completion {
    pub fn text(raw: impl Into<String>) -> Self {
        Completion {
            raw: raw.into(),
            attempts: 1,
            failure: None,
        }
    }

    pub fn failed(failure: DriverFailure, attempts: u32) -> Self {
        Completion {
            raw: String::new(),
            attempts,
            failure: Some(failure),
        }
    }
}

/// Errors that stop a run: the driver is misconfigured for this input.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DriverError {
    #[error("replay fixture has no entry for {0:?}")]
    MissingFixtureEntry(String),
    #[error("environment variable {0} with the API key is not set")]
    MissingApiKey(String),
    #[error("driver configuration: {0}")]
    Config(String),
}

pub trait Driver: Send + Sync {
    fn name(&self) -> &str;

    fn model_name(&self) -> Option<&str> {
        None
    }

    fn complete(&self, request: &DriverRequest) -> Result<Completion, DriverError>;
}

impl<D: Driver + ?Sized> Driver for Box<D> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn model_name(&self) -> Option<&str> {
        (**self).model_name()
    }

    fn complete(&self, request: &DriverRequest) -> Result<Completion, DriverError> {
        (**self).complete(request)
    }
}

impl<D: Driver + ?Sized> Driver for std::sync::Arc<D> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn model_name(&self) -> Option<&str> {
        (**self).model_name()
    }

    fn complete(&self, request: &DriverRequest) -> Result<Completion, DriverError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverTranscript {
    pub request: DriverRequest,
    pub raw_response: String,
    pub parsed: Parsed,
    pub latency_ms: f64,
    pub attempts: u32,
    pub driver_name: String,
    pub model_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<DriverFailure>,
}

/// Parses a raw response against the request's task.
pub fn parse_for(request: &DriverRequest, raw: &str) -> Parsed {
    match &request.subject {
        Subject::Highway { .. } => parse_decision(raw, &request.cfg).into(),
        Subject::Poc { .. } => parse_poc_response(raw).into(),
    }
}

/// Calls the driver once and records everything about the exchange.
pub fn run_driver<D: Driver + ?Sized>(
    driver: &D,
    request: DriverRequest,
) -> Result<DriverTranscript, DriverError> {
    let started = Instant::now();
    let completion = driver.complete(&request)?;
    let latency_ms = started.elapsed().as_secs_f64() * 1000.0;
    let parsed = parse_for(&request, &completion.raw);
    Ok(DriverTranscript {
        raw_response: completion.raw,
        parsed,
        latency_ms,
        attempts: completion.attempts.max(1),
        driver_name: driver.name().to_string(),
        model_name: driver.model_name().map(str::to_string),
        failure: completion.failure,
        request,
    })
}
