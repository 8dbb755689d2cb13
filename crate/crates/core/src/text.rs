//! Small text helpers shared by several modules.

/// Whitespace as understood by Python's `str.isspace`, which the reference
/// MT scorers rely on. This is Unicode `White_Space` plus the ASCII
/// information separators U+001C..U+001F.
pub(crate) fn is_py_space(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

/// Equivalent of Python's `str.split()` without arguments.
pub(crate) fn py_split(s: &str) -> impl Iterator<Item = &str> {
    s.split(is_py_space).filter(|t| !t.is_empty())
}

/// Equivalent of Python's `str.rstrip()` without arguments.
pub(crate) fn py_rstrip(s: &str) -> &str {
    s.trim_end_matches(is_py_space)
}

/// Backslash escaping for single-line, tab-separated fields.
pub(crate) fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            _ => out.push(c),
        }
    }
    out
}

/// Inverse of [`escape_field`]. Returns `None` on a dangling or unknown escape.
pub(crate) fn unescape_field(s: &str) -> Option<String> {
    if !s.contains('\\') {
        return Some(s.to_owned());
    }
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            '\\' => out.push('\\'),
            't' => out.push('\t'),
            'n' => out.push('\n'),
            'r' => out.push('\r'),
            _ => return None,
        }
    }
    Some(out)
}

/// Exact round-half-up rendering of `100 * num / den` with `decimals`
/// fractional digits, computed in integer arithmetic.
pub(crate) fn percent_half_up(num: u64, den: u64, decimals: u32) -> String {
    if den == 0 {
        return format!("{:.*}", decimals as usize, 0.0);
    }
    let scale = 10u128.pow(decimals);
    let scaled = (2 * 100 * num as u128 * scale + den as u128) / (2 * den as u128);
    let int = scaled / scale;
    if decimals == 0 {
        return int.to_string();
    }
    let frac = scaled % scale;
    format!("{int}.{frac:0width$}", width = decimals as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn python_whitespace_includes_separators() {
        assert!(is_py_space('\u{1f}'));
        assert!(is_py_space('\u{a0}'));
        assert!(!is_py_space('\u{200b}'));
        assert_eq!(
            py_split(" a\u{1c}b  c ").collect::<Vec<_>>(),
            ["a", "b", "c"]
        );
        assert_eq!(py_rstrip("ab \t\u{3000}"), "ab");
    }

    #[test]
    fn escaping_round_trips() {
        for s in ["plain", "tab\there", "back\\slash\\t", "nl\nr\r", ""] {
            assert_eq!(unescape_field(&escape_field(s)).as_deref(), Some(s));
        }
        assert_eq!(unescape_field("bad\\q"), None);
        assert_eq!(unescape_field("dangling\\"), None);
    }

    #[test]
    fn half_up_percentages() {
        assert_eq!(percent_half_up(3886, 58918, 1), "6.6");
        assert_eq!(percent_half_up(2515, 60577, 1), "4.2");
        assert_eq!(percent_half_up(2, 62802, 3), "0.003");
        // 1/8 = 12.5% exactly: rounds up
        assert_eq!(percent_half_up(1, 8, 0), "13");
        assert_eq!(percent_half_up(2072, 2515, 0), "82");
        assert_eq!(percent_half_up(2072, 3886, 0), "53");
        assert_eq!(percent_half_up(1, 1, 1), "100.0");
    }
}
