use serde_json::Value;

use super::{OfficerSignal, PocCommand, PocScene};
use crate::prompt::{fill, first_json_object, poc_template, value_text, ParseError, PromptConfig};
use crate::text::fmt_num;

pub fn render_poc_prompt(scene: &PocScene, cfg: &PromptConfig) -> String {
    let template = poc_template(&cfg.template_version)
        .expect("PromptConfig only holds known template versions");
    let objects = if scene.objects.is_empty() {
        "none".to_string()
    } else {
        scene
            .objects
            .iter()
            .map(|o| {
                format!(
                    "- ({}, {}, {}, x={} m, y={} m)",
                    o.id,
                    o.category,
                    o.color,
                    fmt_num(o.x),
                    fmt_num(o.y)
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let rules = match scene.officer {
        OfficerSignal::Stop => {
            "- A traffic officer in front of the vehicle signals STOP. The vehicle must stop."
        }
        OfficerSignal::Go => {
            "- A traffic officer in front of the vehicle signals GO. The vehicle may proceed."
        }
        OfficerSignal::Absent => "none",
    };
    let instruction = scene
        .instruction
        .as_deref()
        .filter(|t| !t.trim().is_empty())
        .unwrap_or("none");
    fill(
        template,
        &[
            ("objects", objects),
            ("rules", rules.to_string()),
            ("instruction", instruction.to_string()),
        ],
    )
}

fn destination(v: &Value) -> Result<u32, ParseError> {
    let invalid = || ParseError::InvalidDestination {
        value: value_text(v),
    };
    match v {
        Value::Number(n) => n
            .as_u64()
            .and_then(|n| u32::try_from(n).ok())
            .ok_or_else(invalid),
        Value::String(s) => s.trim().parse().map_err(|_| invalid()),
        _ => Err(invalid()),
    }
}

/// Parses `{"action": "go"|"stop", "destination_id": n}` out of a response.
///
/// Whether the id exists in the scene is for the caller to judge.
pub fn parse_poc_response(raw: &str) -> Result<PocCommand, ParseError> {
    let obj = first_json_object(raw)?;
    let action = obj.get("action").ok_or(ParseError::MissingAction)?;
    let word = action.as_str().map(|s| s.trim().to_lowercase());
    match word.as_deref() {
        Some("stop") => Ok(PocCommand::Stop),
        Some("go") => match obj.get("destination_id") {
            None | Some(Value::Null) => Err(ParseError::MissingDestination),
            Some(v) => destination(v).map(PocCommand::GoTo),
        },
        _ => Err(ParseError::InvalidPocAction {
            value: value_text(action),
        }),
    }
}

pub fn canonical_poc_response(command: PocCommand) -> String {
    serde_json::to_string(&command).expect("command serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poc::DetectedObject;

    #[test]
    fn parse_cases() {
        assert_eq!(
            parse_poc_response(r#"{"action":"stop"}"#),
            Ok(PocCommand::Stop)
        );
        assert_eq!(
            parse_poc_response(r#"{"action":"go","destination_id":2}"#),
            Ok(PocCommand::GoTo(2))
        );
        assert_eq!(
            parse_poc_response(r#"{"action":"go"}"#),
            Err(ParseError::MissingDestination)
        );
        assert_eq!(
            parse_poc_response(r#"I'd say {"action": " GO ", "destination_id": "3"} ok"#),
            Ok(PocCommand::GoTo(3))
        );
        assert_eq!(
            parse_poc_response(r#"{"action":"turn"}"#),
            Err(ParseError::InvalidPocAction {
                value: "turn".into()
            })
        );
        assert_eq!(
            parse_poc_response(r#"{"action":"go","destination_id":-1}"#),
            Err(ParseError::InvalidDestination { value: "-1".into() })
        );
        assert_eq!(parse_poc_response("go to 2"), Err(ParseError::NoJsonFound));
        assert!(matches!(
            parse_poc_response("{\"action\":"),
            Err(ParseError::MalformedJson { .. })
        ));
    }

    #[test]
    fn canonical_round_trip() {
        for c in [PocCommand::Stop, PocCommand::GoTo(0), PocCommand::GoTo(7)] {
            assert_eq!(parse_poc_response(&canonical_poc_response(c)), Ok(c));
        }
        assert_eq!(
            canonical_poc_response(PocCommand::GoTo(2)),
            r#"{"action":"go","destination_id":2}"#
        );
    }

    #[test]
    fn prompt_contents() {
        let scene = PocScene {
            id: "p".into(),
            objects: vec![DetectedObject {
                id: 1,
                category: "color cone".into(),
                color: "red".into(),
                x: -2.0,
                y: 8.5,
            }],
            officer: OfficerSignal::Stop,
            instruction: Some("Please go to the red color cone".into()),
            ground_truth: PocCommand::Stop,
            seed: 0,
        };
        let p = render_poc_prompt(&scene, &PromptConfig::default());
        assert!(p.contains("- (1, color cone, red, x=-2 m, y=8.5 m)"));
        assert!(p.contains("signals STOP"));
        assert!(p.contains("INSTRUCTION\nPlease go to the red color cone\n"));
        assert!(p.contains(r#""destination_id""#));
    }
}
