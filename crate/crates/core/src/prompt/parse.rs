use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::json::{first_json_object, ExtractError};
use super::PromptConfig;
use crate::world::{Action, Decision};

/// Why a model response could not be turned into a decision.
///
/// Shared by the highway and cone-field parsers. Every variant is scored as an
/// incorrect answer by the harness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParseError {
    #[error("no JSON object found in response")]
    NoJsonFound,
    #[error("malformed JSON starting at byte {position}")]
    MalformedJson { position: usize },
    #[error("response JSON has no \"action\" key")]
    MissingAction,
    #[error("not one of the five options: {value:?}")]
    InvalidAction { value: String },
    #[error("not \"go\" or \"stop\": {value:?}")]
    InvalidPocAction { value: String },
    #[error("action \"go\" without a destination_id")]
    MissingDestination,
    #[error("destination_id is not a non-negative integer: {value}")]
    InvalidDestination { value: String },
}

impl From<ExtractError> for ParseError {
    fn from(e: ExtractError) -> Self {
        match e {
            ExtractError::NoJsonFound => ParseError::NoJsonFound,
            ExtractError::Malformed { position } => ParseError::MalformedJson { position },
        }
    }
}

/// Lenient action matching: trim, case-fold, collapse whitespace, then exact
/// match against the canonical strings or the two short lane-change forms.
pub fn normalize_action(s: &str) -> Option<Action> {
    let folded = s
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    match folded.as_str() {
        "change lane right" => Some(Action::ChangeLaneRight),
        "change lane left" => Some(Action::ChangeLaneLeft),
        other => Action::from_canonical(other),
    }
}

pub(crate) fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Parses a highway response. The reason is kept only when it was requested.
pub fn parse_decision(raw: &str, cfg: &PromptConfig) -> Result<Decision, ParseError> {
    let obj = first_json_object(raw)?;
    let value = obj.get("action").ok_or(ParseError::MissingAction)?;
    let action =
        value
            .as_str()
            .and_then(normalize_action)
            .ok_or_else(|| ParseError::InvalidAction {
                value: value_text(value),
            })?;
    let reason = if cfg.reasoning_requested {
        obj.get("reason").filter(|v| !v.is_null()).map(value_text)
    } else {
        None
    };
    Ok(Decision { action, reason })
}

/// The canonical JSON response for a decision, as the oracle driver emits it.
pub fn canonical_response(decision: &Decision, cfg: &PromptConfig) -> String {
    let mut obj = serde_json::Map::new();
    obj.insert(
        "action".into(),
        Value::String(decision.action.as_str().into()),
    );
    if cfg.reasoning_requested {
        if let Some(reason) = &decision.reason {
            obj.insert("reason".into(), Value::String(reason.clone()));
        }
    }
    Value::Object(obj).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(reasoning: bool) -> PromptConfig {
        PromptConfig::new(reasoning, "v1").unwrap()
    }

    #[test]
    fn parses_reasoned_answer() {
        let d = parse_decision(
            r#"{"action": "decelerate", "reason": "ego exceeds the 70 km/h limit"}"#,
            &cfg(true),
        )
        .unwrap();
        assert_eq!(d.action, Action::Decelerate);
        assert_eq!(d.reason.as_deref(), Some("ego exceeds the 70 km/h limit"));
    }

    #[test]
    fn parses_wrapped_and_case_folded() {
        let d = parse_decision(
            r#"Sure! Here is my answer: {"action":"MAINTAIN"} hope this helps"#,
            &cfg(false),
        )
        .unwrap();
        assert_eq!(d, Decision::new(Action::Maintain));
    }

    #[test]
    fn rejects_unknown_action() {
        assert_eq!(
            parse_decision(r#"{"action": "turn around"}"#, &cfg(false)),
            Err(ParseError::InvalidAction {
                value: "turn around".into()
            })
        );
        assert_eq!(
            parse_decision(r#"{"action": 3}"#, &cfg(false)),
            Err(ParseError::InvalidAction { value: "3".into() })
        );
        assert_eq!(
            parse_decision(r#"{"reason": "x"}"#, &cfg(true)),
            Err(ParseError::MissingAction)
        );
        assert_eq!(
            parse_decision("I would brake.", &cfg(true)),
            Err(ParseError::NoJsonFound)
        );
        assert!(matches!(
            parse_decision(r#"{"action": "maintain""#, &cfg(true)),
            Err(ParseError::MalformedJson { position: 0 })
        ));
    }

    #[test]
    fn reason_dropped_when_not_requested() {
        let raw = r#"{"action": "maintain", "reason": "clear road", "confidence": 0.9}"#;
        assert_eq!(parse_decision(raw, &cfg(false)).unwrap().reason, None);
        assert_eq!(
            parse_decision(raw, &cfg(true)).unwrap().reason.as_deref(),
            Some("clear road")
        );
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_action("  Accelerate "), Some(Action::Accelerate));
        assert_eq!(
            normalize_action("change lane to the left"),
            Some(Action::ChangeLaneLeft)
        );
        assert_eq!(
            normalize_action("Change   Lane\tRight"),
            Some(Action::ChangeLaneRight)
        );
        assert_eq!(normalize_action("stop"), None);
        assert_eq!(normalize_action("left"), None);
    }

    #[test]
    fn canonical_round_trip_over_all_actions() {
        for reasoning in [false, true] {
            for a in Action::ALL {
                let d = Decision::with_reason(a, "because");
                let raw = canonical_response(&d, &cfg(reasoning));
                let parsed = parse_decision(&raw, &cfg(reasoning)).unwrap();
                assert_eq!(parsed.action, a);
                assert_eq!(parsed.reason.is_some(), reasoning);
            }
        }
    }
}
