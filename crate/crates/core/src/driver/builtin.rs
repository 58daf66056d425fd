use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use super::{Completion, Driver, DriverError, DriverRequest, Subject};
use crate::poc::{canonical_poc_response, resolve_instruction, PocCommand};
use crate::policy::{decide, PolicyConfig};
use crate::prompt::{canonical_response, normalize_action};
use crate::world::Decision;

/// Ground-truth driver: answers from the structured subject, never the prompt.
#[derive(Debug, Clone, Default)]
pub struct OracleDriver {
    pub config: PolicyConfig,
}

impl OracleDriver {
    pub fn new(config: PolicyConfig) -> Self {
        OracleDriver { config }
    }
}

impl Driver for OracleDriver {
    fn name(&self) -> &str {
        "oracle"
    }

    fn complete(&self, request: &DriverRequest) -> Result<Completion, DriverError> {
        let raw = match &request.subject {
            Subject::Highway { scenario } => {
                canonical_response(&decide(scenario, &self.config), &request.cfg)
            }
            Subject::Poc { scene } => canonical_poc_response(resolve_instruction(scene)),
        };
        Ok(Completion::text(raw))
    }
}

/// Re-scores recorded responses keyed by scenario id.
#[derive(Debug, Clone)]
pub struct ReplayDriver {
    name: String,
    fixture: BTreeMap<String, String>,
}

impl ReplayDriver {
    pub fn new(name: impl Into<String>, fixture: BTreeMap<String, String>) -> Self {
        ReplayDriver {
            name: name.into(),
            fixture,
        }
    }

    pub fn from_path(path: &Path) -> io::Result<Self> {
        let name = path
            .file_stem()
            .map(|s| format!("replay:{}", s.to_string_lossy()))
            .unwrap_or_else(|| "replay".into());
        Ok(ReplayDriver::new(name, load_fixture(path)?))
    }

    pub fn len(&self) -> usize {
        self.fixture.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixture.is_empty()
    }
}

impl Driver for ReplayDriver {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, request: &DriverRequest) -> Result<Completion, DriverError> {
        let id = request.subject_id();
        self.fixture
            .get(id)
            .map(Completion::text)
            .ok_or_else(|| DriverError::MissingFixtureEntry(id.to_string()))
    }
}

#[derive(Deserialize)]
struct FixtureLine {
    id: String,
    response: String,
}

/// Loads `{"id", "response"}` lines or transcript lines into an id → raw map.
///
/// Transcript files therefore double as fixtures. The first entry for an id wins.
pub fn load_fixture(path: &Path) -> io::Result<BTreeMap<String, String>> {
    let reader = BufReader::new(File::open(path)?);
    let mut map = BTreeMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{}:{}: {msg}", path.display(), n + 1),
            )
        };
        let value: Value = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let (id, raw) = if value.get("request").is_some() {
            let t: super::DriverTranscript =
                serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
            (t.request.subject_id().to_string(), t.raw_response)
        } else {
            let f: FixtureLine = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
            (f.id, f.response)
        };
        map.entry(id).or_insert(raw);
    }
    Ok(map)
}

/// Returns the same raw response to every request.
#[derive(Debug, Clone)]
pub struct ScriptedDriver {
    name: String,
    raw: String,
}

impl ScriptedDriver {
    pub fn new(name: impl Into<String>, raw: impl Into<String>) -> Self {
        ScriptedDriver {
            name: name.into(),
            raw: raw.into(),
        }
    }

    /// `accelerate`, `change lane left`, `stop`, `go:2`, ... as a fixed answer.
    pub fn from_word(word: &str) -> Result<Self, DriverError> {
        let raw = if let Some(action) = normalize_action(word) {
            canonical_response(
                &Decision::new(action),
                &crate::prompt::PromptConfig::v1(false),
            )
        } else if word.trim().eq_ignore_ascii_case("stop") {
            canonical_poc_response(PocCommand::Stop)
        } else if let Some(id) = word.trim().strip_prefix("go:").and_then(|s| s.parse().ok()) {
            canonical_poc_response(PocCommand::GoTo(id))
        } else {
            return Err(DriverError::Config(format!(
                "scripted driver cannot answer {word:?}"
            )));
        };
        Ok(ScriptedDriver::new(
            format!("scripted:{}", word.trim()),
            raw,
        ))
    }
}

impl Driver for ScriptedDriver {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, _request: &DriverRequest) -> Result<Completion, DriverError> {
        Ok(Completion::text(self.raw.clone()))
    }
}
