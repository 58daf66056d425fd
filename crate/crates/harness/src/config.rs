//! TOML configuration shared by every subcommand.
//!
//! ```toml
//! template_version = "v1"
//!
//! [policy]
//! headway = 2.0
//! min_gap = 10.0
//! limit_tolerance = 2.0
//!
//! [policy.envelope]
//! rear_clear = 10.0
//! front_clear = 15.0
//! rear_closing_margin = 10.0
//!
//! [remote]
//! base_url = "https://api.openai.com/v1"
//! model = "gpt-4"
//! api_key_env = "LLM_API_KEY"
//! temperature = 0.0
//! sampling_seed = 0
//! timeout_s = 30.0
//! max_retries = 3
//! backoff_base_s = 1.0
//! concurrency = 4
//!
//! [eval]
//! concurrency = 4
//! ```
//!
//! Every key is optional; missing ones take the defaults shown.

use std::path::Path;

use drivebench_core::policy::PolicyConfig;
use drivebench_core::prompt::{PromptConfig, DEFAULT_TEMPLATE_VERSION};
use drivebench_remote::RemoteConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    /// Scenarios evaluated at once.
    pub concurrency: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings { concurrency: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub template_version: String,
    pub policy: PolicyConfig,
    pub remote: RemoteConfig,
    pub eval: EvalSettings,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            template_version: DEFAULT_TEMPLATE_VERSION.to_string(),
            policy: PolicyConfig::default(),
            remote: RemoteConfig::default(),
            eval: EvalSettings::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl HarnessConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: shown.clone(),
            source,
        })?;
        Self::parse(&text).map_err(|message| ConfigError::Invalid {
            path: shown,
            message,
        })
    }

    /// Defaults when `path` is absent.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, ConfigError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: HarnessConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.policy.validate().map_err(|e| e.to_string())?;
        PromptConfig::new(false, &self.template_version).map_err(|e| e.to_string())?;
        if self.eval.concurrency == 0 {
            return Err("eval.concurrency must be at least 1".into());
        }
        Ok(())
    }

    pub fn prompt(&self, reasoning_requested: bool) -> PromptConfig {
        PromptConfig::new(reasoning_requested, &self.template_version)
            .expect("validated template version")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(HarnessConfig::parse("").unwrap(), HarnessConfig::default());
    }

    #[test]
    fn partial_sections_merge_with_defaults() {
        let cfg = HarnessConfig::parse(
            "[policy]\nheadway = 3.0\n[policy.envelope]\nfront_clear = 20.0\n[remote]\nmodel = \"m\"\n",
        )
        .unwrap();
        assert_eq!(cfg.policy.headway, 3.0);
        assert_eq!(cfg.policy.min_gap, 10.0);
        assert_eq!(cfg.policy.envelope.front_clear, 20.0);
        assert_eq!(cfg.policy.envelope.rear_clear, 10.0);
        assert_eq!(cfg.remote.model, "m");
        assert_eq!(cfg.remote.temperature, 0.0);
    }

    #[test]
    fn module_doc_example_is_the_defaults() {
        let doc = include_str!("config.rs")
            .lines()
            .take_while(|l| l.starts_with("//!"))
            .map(|l| l.trim_start_matches("//!").trim_start())
            .collect::<Vec<_>>()
            .join("\n");
        let start = doc.find("```toml").unwrap() + "```toml".len();
        let end = start + doc[start..].find("```").unwrap();
        assert_eq!(HarnessConfig::parse(&doc[start..end]).unwrap(), HarnessConfig::default());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(HarnessConfig::parse("template_version = \"v9\"").is_err());
        assert!(HarnessConfig::parse("[policy]\nheadway = -1.0").is_err());
        assert!(HarnessConfig::parse("[eval]\nconcurrency = 0").is_err());
        assert!(HarnessConfig::parse("colour = 3").is_err());
    }
}
