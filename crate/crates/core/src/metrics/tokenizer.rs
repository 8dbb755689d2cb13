//! The "13a" pre-tokenization used by mteval-v13a and sacreBLEU.

use std::sync::LazyLock;

use regex::Regex;

use crate::text::py_split;

static RULES: LazyLock<[(Regex, &'static str); 4]> = LazyLock::new(|| {
    let re = |p: &str| Regex::new(p).expect("static pattern");
    [
        // ASCII symbols and punctuation outside of '.' ',' and '-'
        (re(r"([{-~\[-` -&(-+:-@/])"), " ${1} "),
        (re(r"([^0-9])([.,])"), "${1} ${2} "),
        (re(r"([.,])([^0-9])"), " ${1} ${2}"),
        (re(r"([0-9])(-)"), "${1} ${2} "),
    ]
});

/// Tokenizes a line the way the 13a scheme does.
pub fn tokenize_13a(line: &str) -> String {
    let mut line = line
        .replace("<skipped>", "")
        .replace("-\n", "")
        .replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let mut line = format!(" {line} ");
    for (re, rep) in RULES.iter() {
        line = re.replace_all(&line, *rep).into_owned();
    }
    py_split(&line).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_punctuation_but_not_numbers() {
        assert_eq!(tokenize_13a("Hello, world!"), "Hello , world !");
        assert_eq!(
            tokenize_13a("It costs 3,50 (approx.)."),
            "It costs 3,50 ( approx . ) ."
        );
        assert_eq!(tokenize_13a("2-3 years"), "2 - 3 years");
        assert_eq!(tokenize_13a("a &amp; b"), "a & b");
        assert_eq!(tokenize_13a("-Be careful, Eve."), "-Be careful , Eve .");
        assert_eq!(tokenize_13a("don't"), "don't");
        assert_eq!(tokenize_13a(""), "");
    }
}
