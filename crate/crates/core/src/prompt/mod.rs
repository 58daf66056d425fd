//! Prompt rendering and response parsing.
//!
//! Templates are bundled and addressed by version string so that accuracy
//! numbers stay comparable across runs; `v1` is the only version so far.

mod json;
mod parse;

use serde::{Deserialize, Serialize};

use crate::text::fmt_num;
use crate::world::{Scenario, TrafficRuleSet};

pub use json::{first_json_object, ExtractError};
pub(crate) use parse::value_text;
pub use parse::{canonical_response, normalize_action, parse_decision, ParseError};

pub const DEFAULT_TEMPLATE_VERSION: &str = "v1";

const HIGHWAY_TEMPLATES: &[(&str, &str)] =
    &[("v1", include_str!("../../templates/highway_v1.txt"))];
const POC_TEMPLATES: &[(&str, &str)] = &[("v1", include_str!("../../templates/poc_v1.txt"))];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown template version {0:?}")]
pub struct UnknownTemplate(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPromptConfig")]
pub struct PromptConfig {
    pub reasoning_requested: bool,
    pub template_version: String,
}

#[derive(Deserialize)]
struct RawPromptConfig {
    #[serde(default)]
    reasoning_requested: bool,
    #[serde(default = "default_version")]
    template_version: String,
}

fn default_version() -> String {
    DEFAULT_TEMPLATE_VERSION.to_string()
}

impl TryFrom<RawPromptConfig> for PromptConfig {
    type Error = UnknownTemplate;

    fn try_from(raw: RawPromptConfig) -> Result<Self, Self::Error> {
        PromptConfig::new(raw.reasoning_requested, &raw.template_version)
    }
}

impl PromptConfig {
    pub fn new(reasoning_requested: bool, template_version: &str) -> Result<Self, UnknownTemplate> {
        lookup(HIGHWAY_TEMPLATES, template_version)?;
        Ok(PromptConfig {
            reasoning_requested,
            template_version: template_version.to_string(),
        })
    }

    pub fn v1(reasoning_requested: bool) -> Self {
        PromptConfig {
            reasoning_requested,
            template_version: DEFAULT_TEMPLATE_VERSION.to_string(),
        }
    }
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig::v1(false)
    }
}

fn lookup(table: &[(&str, &'static str)], version: &str) -> Result<&'static str, UnknownTemplate> {
    table
        .iter()
        .find(|(v, _)| *v == version)
        .map(|(_, t)| *t)
        .ok_or_else(|| UnknownTemplate(version.to_string()))
}

pub(crate) fn highway_template(version: &str) -> Result<&'static str, UnknownTemplate> {
    lookup(HIGHWAY_TEMPLATES, version)
}

pub(crate) fn poc_template(version: &str) -> Result<&'static str, UnknownTemplate> {
    lookup(POC_TEMPLATES, version)
}

pub(crate) fn fill(template: &str, slots: &[(&str, String)]) -> String {
    let mut out = template.to_string();
    for (name, value) in slots {
        out = out.replace(&format!("{{{{{name}}}}}"), value);
    }
    out
}

/// Natural-language lines for a rule set, one rule per entry.
pub fn render_rules(rules: &TrafficRuleSet) -> Vec<String> {
    let mut lines = Vec::new();
    lines.push(match rules.speed_limit {
        Some(limit) => format!("The speed limit is {} km/h.", fmt_num(limit)),
        None => "There is no posted speed limit.".to_string(),
    });
    lines.push(if rules.keep_right {
        "Keep to the right lane; use the left lane only for overtaking and return to the right lane afterwards."
            .to_string()
    } else {
        "You may stay in the left lane.".to_string()
    });
    lines.push(if rules.overtaking_allowed {
        "Overtaking is allowed, using the left lane.".to_string()
    } else {
        "Overtaking is prohibited.".to_string()
    });
    lines.extend(rules.extra_rules.iter().cloned());
    lines
}

fn bullet_list(lines: impl IntoIterator<Item = String>) -> String {
    let items: Vec<String> = lines.into_iter().map(|l| format!("- {l}")).collect();
    if items.is_empty() {
        "none".to_string()
    } else {
        items.join("\n")
    }
}

/// Renders a scenario into the text a language model is asked to answer.
pub fn render_prompt(scenario: &Scenario, cfg: &PromptConfig) -> String {
    let template = highway_template(&cfg.template_version)
        .expect("PromptConfig only holds known template versions");
    let objects = bullet_list(scenario.vehicles.iter().map(|v| {
        format!(
            "({}, x={} m, y={} m, speed={} km/h)",
            v.category,
            fmt_num(v.rel_x),
            fmt_num(v.rel_y),
            fmt_num(v.speed_kmh)
        )
    }));
    let output = if cfg.reasoning_requested {
        r#"Explain your choice. Respond with a single JSON object of the form {"action": "<one of the options>", "reason": "<why you chose it>"}, and nothing else."#
    } else {
        r#"Respond with a single JSON object of the form {"action": "<one of the options>"}, and nothing else."#
    };
    fill(
        template,
        &[
            ("lane", scenario.ego.lane.describe().to_string()),
            ("speed", fmt_num(scenario.ego.speed_kmh)),
            ("objects", objects),
            ("rules", bullet_list(render_rules(&scenario.rules))),
            (
                "instruction",
                scenario.instruction_text().unwrap_or("none").to_string(),
            ),
            ("output", output.to_string()),
        ],
    )
}
