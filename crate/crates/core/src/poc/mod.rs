//! Cone-field destination task: ground a spoken instruction to one detected
//! object, or stop. An officer's stop signal overrides any instruction.

mod codec;
mod generate;
mod resolve;

use std::collections::HashSet;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::driver::{run_driver, Driver, DriverError, DriverRequest, DriverTranscript};
use crate::prompt::PromptConfig;

pub use codec::{canonical_poc_response, parse_poc_response, render_poc_prompt};
pub use generate::{generate_poc_dataset, three_cone_scene, DEFAULT_POC_COUNT, POC_COLORS};
pub use resolve::resolve_instruction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedObject {
    pub id: u32,
    pub category: String,
    pub color: String,
    /// Lateral offset, meters, right-positive.
    #[serde(rename = "x_m")]
    pub x: f64,
    /// Forward distance, meters.
    #[serde(rename = "y_m")]
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OfficerSignal {
    #[default]
    Absent,
    Go,
    Stop,
}

impl std::str::FromStr for OfficerSignal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "absent" | "none" => Ok(OfficerSignal::Absent),
            "go" => Ok(OfficerSignal::Go),
            "stop" => Ok(OfficerSignal::Stop),
            other => Err(format!("unknown officer signal {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PocCommand {
    Stop,
    GoTo(u32),
}

#[derive(Serialize, Deserialize)]
struct RawCommand {
    action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    destination_id: Option<u32>,
}

impl Serialize for PocCommand {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let raw = match *self {
            PocCommand::Stop => RawCommand {
                action: "stop".into(),
                destination_id: None,
            },
            PocCommand::GoTo(id) => RawCommand {
                action: "go".into(),
                destination_id: Some(id),
            },
        };
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PocCommand {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawCommand::deserialize(deserializer)?;
        match (raw.action.as_str(), raw.destination_id) {
            ("stop", None) => Ok(PocCommand::Stop),
            ("go", Some(id)) => Ok(PocCommand::GoTo(id)),
            ("go", None) => Err(serde::de::Error::custom("\"go\" needs a destination_id")),
            ("stop", Some(_)) => Err(serde::de::Error::custom("\"stop\" takes no destination_id")),
            (other, _) => Err(serde::de::Error::custom(format!(
                "unknown action {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PocScene {
    pub id: String,
    pub objects: Vec<DetectedObject>,
    pub officer: OfficerSignal,
    #[serde(default)]
    pub instruction: Option<String>,
    pub ground_truth: PocCommand,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PocSceneError {
    #[error("duplicate object id {0}")]
    DuplicateId(u32),
    #[error("object {id} is not in front of the vehicle (y = {y})")]
    BehindVehicle { id: u32, y: f64 },
    #[error("ground truth names unknown object {0}")]
    UnknownDestination(u32),
}

impl PocScene {
    pub fn validate(&self) -> Result<(), PocSceneError> {
        let mut seen = HashSet::new();
        for o in &self.objects {
            if !seen.insert(o.id) {
                return Err(PocSceneError::DuplicateId(o.id));
            }
            if o.y.is_nan() || o.y <= 0.0 {
                return Err(PocSceneError::BehindVehicle { id: o.id, y: o.y });
            }
        }
        match self.ground_truth {
            PocCommand::GoTo(id) if !seen.contains(&id) => {
                Err(PocSceneError::UnknownDestination(id))
            }
            _ => Ok(()),
        }
    }

    pub fn object(&self, id: u32) -> Option<&DetectedObject> {
        self.objects.iter().find(|o| o.id == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PocEvaluation {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    pub transcripts: Vec<DriverTranscript>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PocEvalError {
    #[error("cannot score an empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Driver(#[from] DriverError),
}

/// Exact-match accuracy of a driver over scenes: the command variant and, for
/// go, the destination id must both agree with ground truth.
pub fn evaluate_poc<D: Driver + ?Sized>(
    scenes: &[PocScene],
    driver: &D,
    cfg: &PromptConfig,
) -> Result<PocEvaluation, PocEvalError> {
    if scenes.is_empty() {
        return Err(PocEvalError::EmptyDataset);
    }
    let mut transcripts = Vec::with_capacity(scenes.len());
    let mut correct = 0;
    for scene in scenes {
        let t = run_driver(
            driver,
            DriverRequest::poc(scene.clone(), cfg.clone(), "eval"),
        )?;
        if t.parsed.command() == Some(scene.ground_truth) {
            correct += 1;
        }
        transcripts.push(t);
    }
    Ok(PocEvaluation {
        correct,
        total: scenes.len(),
        accuracy: correct as f64 / scenes.len() as f64,
        transcripts,
    })
}
