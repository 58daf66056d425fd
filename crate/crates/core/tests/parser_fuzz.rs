use drivebench_core::poc::parse_poc_response;
use drivebench_core::prompt::{canonical_response, parse_decision, ParseError, PromptConfig};
use drivebench_core::{Action, Decision};
use proptest::prelude::*;

fn action() -> impl Strategy<Value = Action> {
    proptest::sample::select(Action::ALL.to_vec())
}

/// Prose that never contains a brace.
fn prose() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 .,:;!?'\\n\\t-]{0,80}"
}

fn case_permuted(s: &str, mask: u64) -> String {
    s.chars()
        .enumerate()
        .map(|(i, c)| {
            if mask >> (i % 64) & 1 == 1 {
                c.to_ascii_uppercase()
            } else {
                c
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn prose_wrapped_answers_parse(
        a in action(),
        prefix in prose(),
        suffix in prose(),
        mask in any::<u64>(),
        pad in "[ \\t\\n]{0,4}",
        inner in " {0,3}",
    ) {
        // raw control characters are not allowed inside JSON strings
        let body = format!(
            "{{{pad}\"action\"{pad}:{pad}\"{inner}{}{inner}\"{pad}}}",
            case_permuted(a.as_str(), mask)
        );
        let raw = format!("{prefix}{body}{suffix}");
        let got = parse_decision(&raw, &PromptConfig::v1(false)).unwrap();
        prop_assert_eq!(got, Decision::new(a));
    }

    #[test]
    fn reasoned_answers_keep_their_reason(a in action(), reason in "[a-zA-Z ,.]{1,60}") {
        let cfg = PromptConfig::v1(true);
        let d = Decision::with_reason(a, reason);
        let raw = canonical_response(&d, &cfg);
        prop_assert_eq!(parse_decision(&raw, &cfg).unwrap(), d);
    }

    #[test]
    fn arbitrary_text_never_panics(raw in "\\PC{0,200}") {
        let _ = parse_decision(&raw, &PromptConfig::v1(true));
        let _ = parse_poc_response(&raw);
    }

    #[test]
    fn malformed_inputs_give_typed_errors(
        prefix in prose(),
        junk in "[a-z0-9 :,\"]{0,30}",
        cut in 0usize..3,
    ) {
        let raw = match cut {
            0 => prefix.clone(),
            1 => format!("{prefix}{{{junk}"),
            _ => format!("{prefix}{{\"verdict\": \"{junk}\"}}"),
        };
        let err = parse_decision(&raw, &PromptConfig::v1(false)).unwrap_err();
        let typed = matches!(
            err,
            ParseError::NoJsonFound
                | ParseError::MalformedJson { .. }
                | ParseError::MissingAction
                | ParseError::InvalidAction { .. }
        );
        prop_assert!(typed, "unexpected error {:?}", err);
    }
}

#[test]
fn all_actions_round_trip() {
    for reasoning in [false, true] {
        let cfg = PromptConfig::v1(reasoning);
        for a in Action::ALL {
            let d = if reasoning {
                Decision::with_reason(a, "because")
            } else {
                Decision::new(a)
            };
            assert_eq!(
                parse_decision(&canonical_response(&d, &cfg), &cfg).unwrap(),
                d
            );
        }
    }
}
