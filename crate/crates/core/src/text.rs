/// Formats a quantity for prompts and explanations: rounded to two decimals,
/// trailing zeros dropped, no negative zero.
pub fn fmt_num(v: f64) -> String {
    let rounded = (v * 100.0).round() / 100.0;
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    let s = format!("{rounded:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

#[cfg(test)]
mod tests {
    use super::fmt_num;

    #[test]
    fn formatting() {
        assert_eq!(fmt_num(70.0), "70");
        assert_eq!(fmt_num(-3.5), "-3.5");
        assert_eq!(fmt_num(38.888_888), "38.89");
        assert_eq!(fmt_num(-0.001), "0");
        assert_eq!(fmt_num(0.1 + 0.2), "0.3");
        assert_eq!(fmt_num(100.0), "100");
    }
}
