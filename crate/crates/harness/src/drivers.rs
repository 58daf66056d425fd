//! Driver selection from command-line style specs.

use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use drivebench_core::driver::{Driver, DriverError, OracleDriver, ReplayDriver, ScriptedDriver};
use drivebench_remote::RemoteDriver;
use serde::{Deserialize, Serialize};

use crate::config::HarnessConfig;

/// `oracle`, `replay:PATH`, `remote`, or `scripted:ANSWER`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DriverSpec {
    Oracle,
    Replay(PathBuf),
    Remote,
    Scripted(String),
}

impl FromStr for DriverSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.split_once(':') {
            _ if s == "oracle" => Ok(DriverSpec::Oracle),
            _ if s == "remote" => Ok(DriverSpec::Remote),
            Some(("replay", path)) if !path.is_empty() => Ok(DriverSpec::Replay(path.into())),
            Some(("scripted", answer)) if !answer.is_empty() => {
                Ok(DriverSpec::Scripted(answer.into()))
            }
            _ => Err(format!(
                "unknown driver {s:?}; expected oracle, remote, replay:PATH or scripted:ANSWER"
            )),
        }
    }
}

impl TryFrom<String> for DriverSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<DriverSpec> for String {
    fn from(d: DriverSpec) -> String {
        d.to_string()
    }
}

impl std::fmt::Display for DriverSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DriverSpec::Oracle => write!(f, "oracle"),
            DriverSpec::Remote => write!(f, "remote"),
            DriverSpec::Replay(p) => write!(f, "replay:{}", p.display()),
            DriverSpec::Scripted(a) => write!(f, "scripted:{a}"),
        }
    }
}

impl DriverSpec {
    pub fn build(&self, config: &HarnessConfig) -> Result<Arc<dyn Driver>, DriverError> {
        Ok(match self {
            DriverSpec::Oracle => Arc::new(OracleDriver::new(config.policy)),
            DriverSpec::Replay(path) => Arc::new(ReplayDriver::from_path(path).map_err(|e| {
                DriverError::Config(format!("replay fixture {}: {e}", path.display()))
            })?),
            DriverSpec::Remote => Arc::new(RemoteDriver::from_env(config.remote.clone())?),
            DriverSpec::Scripted(answer) => Arc::new(ScriptedDriver::from_word(answer)?),
        })
    }
}
