//! Closed grammar for user instructions on the highway task.

use crate::world::Action;

/// Every phrase the matcher understands, with the action it requests.
pub const INSTRUCTION_PHRASES: &[(&str, Action)] = &[
    ("speed up", Action::Accelerate),
    ("accelerate", Action::Accelerate),
    ("go faster", Action::Accelerate),
    ("drive faster", Action::Accelerate),
    ("slow down", Action::Decelerate),
    ("decelerate", Action::Decelerate),
    ("brake", Action::Decelerate),
    ("drive slower", Action::Decelerate),
    ("overtake", Action::ChangeLaneLeft),
    ("pass", Action::ChangeLaneLeft),
    ("change lane to the left", Action::ChangeLaneLeft),
    ("change lane left", Action::ChangeLaneLeft),
    ("change to the left lane", Action::ChangeLaneLeft),
    ("move to the left lane", Action::ChangeLaneLeft),
    ("change lane to the right", Action::ChangeLaneRight),
    ("change lane right", Action::ChangeLaneRight),
    ("change to the right lane", Action::ChangeLaneRight),
    ("move to the right lane", Action::ChangeLaneRight),
    ("keep going", Action::Maintain),
    ("maintain", Action::Maintain),
    ("keep your speed", Action::Maintain),
    ("stay in your lane", Action::Maintain),
];

pub(crate) fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Maps free text to the action it requests, if it uses the grammar.
///
/// Phrases match on whole words. When several phrases occur, the one that
/// starts earliest wins, and among those the longest.
pub fn map_instruction(instruction: &str) -> Option<Action> {
    let tokens = tokenize(instruction);
    let mut best: Option<(usize, usize, Action)> = None;
    for &(phrase, action) in INSTRUCTION_PHRASES {
        let words: Vec<&str> = phrase.split(' ').collect();
        let Some(start) = tokens
            .windows(words.len())
            .position(|w| w.iter().zip(&words).all(|(t, p)| t == p))
        else {
            continue;
        };
        let better = match best {
            None => true,
            Some((s, len, _)) => start < s || (start == s && words.len() > len),
        };
        if better {
            best = Some((start, words.len(), action));
        }
    }
    best.map(|(_, _, a)| a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_phrase_maps_in_context() {
        for &(phrase, action) in INSTRUCTION_PHRASES {
            assert_eq!(map_instruction(phrase), Some(action), "{phrase}");
            let wrapped = format!("Please {phrase}, thanks!");
            assert_eq!(map_instruction(&wrapped), Some(action), "{wrapped}");
            let upper = phrase.to_uppercase();
            assert_eq!(map_instruction(&upper), Some(action), "{upper}");
        }
    }

    #[test]
    fn common_phrasings() {
        assert_eq!(
            map_instruction("please overtake the car ahead"),
            Some(Action::ChangeLaneLeft)
        );
        assert_eq!(map_instruction(""), None);
        assert_eq!(map_instruction("slow down"), Some(Action::Decelerate));
    }

    #[test]
    fn earliest_phrase_wins() {
        assert_eq!(
            map_instruction("speed up and overtake"),
            Some(Action::Accelerate)
        );
        assert_eq!(
            map_instruction("overtake, then speed up"),
            Some(Action::ChangeLaneLeft)
        );
    }

    #[test]
    fn whole_words_only() {
        assert_eq!(map_instruction("the passenger is asleep"), None);
        assert_eq!(map_instruction("what a nice view"), None);
        assert_eq!(map_instruction("brakes feel soft"), None);
    }
}
