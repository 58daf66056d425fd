//! Extraction of the first JSON object embedded in free text.

use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtractError {
    /// No `{` anywhere in the text.
    NoJsonFound,
    /// Braces were present but no balanced span parsed as an object; the
    /// position is the byte offset of the first candidate's opening brace.
    Malformed { position: usize },
}

/// Returns the first balanced `{...}` span that parses as a JSON object.
///
/// Brace matching skips over string literals (with escapes), so braces inside
/// quoted text do not confuse the scan.
pub fn first_json_object(raw: &str) -> Result<Map<String, Value>, ExtractError> {
    let bytes = raw.as_bytes();
    let mut first_candidate = None;
    for (start, _) in raw.match_indices('{') {
        first_candidate.get_or_insert(start);
        let Some(end) = balanced_end(bytes, start) else {
            continue;
        };
        if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(&raw[start..=end]) {
            return Ok(map);
        }
    }
    match first_candidate {
        None => Err(ExtractError::NoJsonFound),
        Some(position) => Err(ExtractError::Malformed { position }),
    }
}

fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_object_in_prose() {
        let m = first_json_object(r#"Sure: {"a": {"b": "}"}} trailing {"c": 1}"#).unwrap();
        assert_eq!(m["a"]["b"], "}");
    }

    #[test]
    fn skips_unparseable_spans() {
        let m = first_json_object(r#"{not json} then {"ok": true}"#).unwrap();
        assert_eq!(m["ok"], true);
    }

    #[test]
    fn errors() {
        assert_eq!(
            first_json_object("no braces here"),
            Err(ExtractError::NoJsonFound)
        );
        assert_eq!(
            first_json_object("abc {\"x\": "),
            Err(ExtractError::Malformed { position: 4 })
        );
        assert_eq!(
            first_json_object("[1, 2] {1: 2}"),
            Err(ExtractError::Malformed { position: 7 })
        );
        assert_eq!(
            first_json_object(r#"{"s": "unterminated}"#),
            Err(ExtractError::Malformed { position: 0 })
        );
    }
}
