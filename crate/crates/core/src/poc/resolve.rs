//! Referring-expression resolution over detected objects.
//!
//! Grammar: colour words and category nouns filter the object set; spatial
//! superlatives then narrow it, left to right as they appear. `left`/`right`
//! are read as `leftmost`/`rightmost` unless some object has that colour.
//! Anything that does not end at exactly one object resolves to stop.

use super::{DetectedObject, OfficerSignal, PocCommand, PocScene};
use crate::policy::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Superlative {
    MinX,
    MaxX,
    Middle,
    MinY,
    MaxY,
}

const STOP_WORDS: &[&str] = &["stop", "halt", "wait"];

fn superlative(token: &str) -> Option<Superlative> {
    Some(match token {
        "leftmost" | "left" => Superlative::MinX,
        "rightmost" | "right" => Superlative::MaxX,
        "middle" | "center" | "centre" | "central" => Superlative::Middle,
        "nearest" | "closest" | "near" | "close" => Superlative::MinY,
        "farthest" | "furthest" | "far" => Superlative::MaxY,
        _ => return None,
    })
}

fn category_noun(category: &str) -> &str {
    category.rsplit(' ').next().unwrap_or(category)
}

fn singular(token: &str) -> &str {
    token
        .strip_suffix("es")
        .filter(|s| s.ends_with('x'))
        .or_else(|| token.strip_suffix('s'))
        .unwrap_or(token)
}

fn extreme(
    objects: Vec<&DetectedObject>,
    key: impl Fn(&DetectedObject) -> f64,
    max: bool,
) -> Vec<&DetectedObject> {
    let best = objects
        .iter()
        .map(|o| key(o))
        .fold(None, |acc: Option<f64>, v| match acc {
            None => Some(v),
            Some(a) if (max && v > a) || (!max && v < a) => Some(v),
            keep => keep,
        });
    match best {
        None => objects,
        Some(b) => objects.into_iter().filter(|o| key(o) == b).collect(),
    }
}

fn middle(objects: Vec<&DetectedObject>) -> Vec<&DetectedObject> {
    if objects.len().is_multiple_of(2) {
        return Vec::new();
    }
    let mut xs: Vec<f64> = objects.iter().map(|o| o.x).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    let median = xs[xs.len() / 2];
    objects.into_iter().filter(|o| o.x == median).collect()
}

/// The command a correct driver should issue for the scene.
pub fn resolve_instruction(scene: &PocScene) -> PocCommand {
    if scene.officer == OfficerSignal::Stop {
        return PocCommand::Stop;
    }
    let Some(text) = scene
        .instruction
        .as_deref()
        .filter(|t| !t.trim().is_empty())
    else {
        return PocCommand::Stop;
    };
    let tokens = tokenize(text);
    if tokens.iter().any(|t| STOP_WORDS.contains(&t.as_str())) {
        return PocCommand::Stop;
    }

    let is_color = |t: &str| {
        super::POC_COLORS.contains(&t)
            || scene
                .objects
                .iter()
                .any(|o| o.color.eq_ignore_ascii_case(t))
    };
    let nouns: Vec<String> = scene
        .objects
        .iter()
        .map(|o| category_noun(&o.category).to_lowercase())
        .collect();

    let mut colors = Vec::new();
    let mut categories = Vec::new();
    let mut superlatives = Vec::new();
    for t in &tokens {
        if is_color(t) {
            colors.push(t.as_str());
        } else if let Some(s) = superlative(t) {
            superlatives.push(s);
        } else if nouns.iter().any(|n| n == singular(t)) {
            categories.push(singular(t));
        }
    }

    let mut set: Vec<&DetectedObject> = scene
        .objects
        .iter()
        .filter(|o| colors.iter().all(|c| o.color.eq_ignore_ascii_case(c)))
        .filter(|o| {
            categories
                .iter()
                .all(|c| category_noun(&o.category).eq_ignore_ascii_case(c))
        })
        .collect();
    for s in superlatives {
        set = match s {
            Superlative::MinX => extreme(set, |o| o.x, false),
            Superlative::MaxX => extreme(set, |o| o.x, true),
            Superlative::MinY => extreme(set, |o| o.y, false),
            Superlative::MaxY => extreme(set, |o| o.y, true),
            Superlative::Middle => middle(set),
        };
    }
    match set.as_slice() {
        [only] => PocCommand::GoTo(only.id),
        _ => PocCommand::Stop,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cone(id: u32, color: &str, x: f64, y: f64) -> DetectedObject {
        DetectedObject {
            id,
            category: "color cone".into(),
            color: color.into(),
            x,
            y,
        }
    }

    fn scene(objects: Vec<DetectedObject>, officer: OfficerSignal, instruction: &str) -> PocScene {
        PocScene {
            id: "t".into(),
            objects,
            officer,
            instruction: Some(instruction.into()),
            ground_truth: PocCommand::Stop,
            seed: 0,
        }
    }

    fn three() -> Vec<DetectedObject> {
        vec![
            cone(1, "red", -2.0, 8.0),
            cone(2, "blue", 0.0, 10.0),
            cone(3, "yellow", 2.0, 6.0),
        ]
    }

    #[test]
    fn officer_stop_dominates() {
        let s = scene(three(), OfficerSignal::Stop, "go to the red cone");
        assert_eq!(resolve_instruction(&s), PocCommand::Stop);
    }

    #[test]
    fn spatial_and_color_terms() {
        let cases = [
            ("Head towards the rightmost color cone", PocCommand::GoTo(3)),
            ("Please go to the right color cone", PocCommand::GoTo(3)),
            ("Please go to the red color cone", PocCommand::GoTo(1)),
            ("go to the leftmost cone", PocCommand::GoTo(1)),
            ("drive to the middle cone", PocCommand::GoTo(2)),
            ("the nearest one", PocCommand::GoTo(3)),
            ("the farthest cone please", PocCommand::GoTo(2)),
            ("go to the green cone", PocCommand::Stop),
            ("go to the cone", PocCommand::Stop),
            ("stop here", PocCommand::Stop),
            ("", PocCommand::Stop),
        ];
        for (text, expected) in cases {
            let s = scene(three(), OfficerSignal::Go, text);
            assert_eq!(resolve_instruction(&s), expected, "{text}");
        }
    }

    #[test]
    fn filters_apply_before_superlatives() {
        let mut objects = three();
        objects.push(DetectedObject {
            id: 4,
            category: "box".into(),
            color: "green".into(),
            x: 3.0,
            y: 4.0,
        });
        let s = scene(
            objects.clone(),
            OfficerSignal::Absent,
            "go to the rightmost cone",
        );
        assert_eq!(resolve_instruction(&s), PocCommand::GoTo(3));
        let s = scene(
            objects.clone(),
            OfficerSignal::Absent,
            "go to the rightmost object",
        );
        assert_eq!(resolve_instruction(&s), PocCommand::GoTo(4));
        let s = scene(objects, OfficerSignal::Absent, "the box");
        assert_eq!(resolve_instruction(&s), PocCommand::GoTo(4));
    }

    #[test]
    fn ambiguity_stops() {
        let objects = vec![cone(1, "red", -2.0, 8.0), cone(2, "blue", 2.0, 9.0)];
        let s = scene(objects, OfficerSignal::Absent, "the middle cone");
        assert_eq!(resolve_instruction(&s), PocCommand::Stop);
        let tied = vec![
            cone(1, "red", 2.0, 8.0),
            cone(2, "blue", 2.0, 9.0),
            cone(3, "pink", -1.0, 5.0),
        ];
        let s = scene(tied.clone(), OfficerSignal::Absent, "the rightmost cone");
        assert_eq!(resolve_instruction(&s), PocCommand::Stop);
        let s = scene(tied, OfficerSignal::Absent, "the rightmost nearest cone");
        assert_eq!(resolve_instruction(&s), PocCommand::GoTo(1));
    }

    #[test]
    fn no_instruction_stops() {
        let mut s = scene(three(), OfficerSignal::Go, "");
        s.instruction = None;
        assert_eq!(resolve_instruction(&s), PocCommand::Stop);
    }
}
