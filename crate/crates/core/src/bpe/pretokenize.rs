//! Splits a line into the units BPE operates on.

use std::borrow::Cow;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use super::{Normalization, MAX_WORD_CHARS, WHITESPACE_MARKER};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Segment {
    /// A run of mergeable characters, possibly starting with the marker.
    Word(Vec<char>),
    /// A character that is never part of a piece: whitespace other than the
    /// plain space, or a literal `▁` in the input. Always byte-encoded.
    Raw(char),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Letter,
    Digit,
    Other,
}

fn class_of(c: char) -> Option<CharClass> {
    if is_combining_mark(c) {
        None
    } else if c.is_alphabetic() {
        Some(CharClass::Letter)
    } else if c.is_numeric() {
        Some(CharClass::Digit)
    } else {
        Some(CharClass::Other)
    }
}

pub(crate) fn normalize(line: &str, normalization: Normalization) -> Cow<'_, str> {
    match normalization {
        Normalization::None => Cow::Borrowed(line),
        Normalization::Nfkc => Cow::Owned(line.nfkc().collect()),
    }
}

/// Segments a (normalized) line. An empty line yields no segments.
pub(crate) fn segments(line: &str) -> Vec<Segment> {
    let mut out = Vec::new();
    if line.is_empty() {
        return out;
    }
    let mut cur: Vec<char> = vec![WHITESPACE_MARKER];
    let mut cur_class: Option<CharClass> = None;

    fn flush(out: &mut Vec<Segment>, cur: &mut Vec<char>, cur_class: &mut Option<CharClass>) {
        if !cur.is_empty() {
            out.push(Segment::Word(std::mem::take(cur)));
        }
        *cur_class = None;
    }

    for c in line.chars() {
        if c == ' ' {
            flush(&mut out, &mut cur, &mut cur_class);
            cur.push(WHITESPACE_MARKER);
        } else if c.is_whitespace() || c == WHITESPACE_MARKER {
            flush(&mut out, &mut cur, &mut cur_class);
            out.push(Segment::Raw(c));
        } else {
            if let Some(k) = class_of(c) {
                if cur_class.is_some_and(|prev| prev != k) {
                    flush(&mut out, &mut cur, &mut cur_class);
                }
                cur_class = Some(k);
            }
            if cur.len() >= MAX_WORD_CHARS {
                let keep = cur_class;
                flush(&mut out, &mut cur, &mut cur_class);
                cur_class = keep;
            }
            cur.push(c);
        }
    }
    flush(&mut out, &mut cur, &mut cur_class);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(line: &str) -> Vec<String> {
        segments(line)
            .into_iter()
            .map(|s| match s {
                Segment::Word(w) => w.into_iter().collect(),
                Segment::Raw(c) => format!("[{}]", c.escape_unicode()),
            })
            .collect()
    }

    #[test]
    fn spaces_become_markers() {
        assert_eq!(words("low low"), ["▁low", "▁low"]);
        assert_eq!(words(" a"), ["▁", "▁a"]);
        assert_eq!(words("a  b"), ["▁a", "▁", "▁b"]);
        assert_eq!(words("a "), ["▁a", "▁"]);
        assert!(words("").is_empty());
    }

    #[test]
    fn punctuation_and_digits_split_from_letters() {
        assert_eq!(
            words("Så där ja, in här."),
            ["▁Så", "▁där", "▁ja", ",", "▁in", "▁här", "."]
        );
        assert_eq!(words("abc123def"), ["▁abc", "123", "def"]);
        assert_eq!(words("--!"), ["▁--!"]);
    }

    #[test]
    fn combining_marks_stay_attached() {
        assert_eq!(words("e\u{301}t\u{301}"), ["▁e\u{301}t\u{301}"]);
        assert_eq!(words("1\u{301}"), ["▁1\u{301}"]);
    }

    #[test]
    fn other_whitespace_and_literal_marker_are_raw() {
        assert_eq!(words("a\tb"), ["▁a", "[\\u{9}]", "b"]);
        assert_eq!(words("a▁b"), ["▁a", "[\\u{2581}]", "b"]);
    }

    #[test]
    fn long_words_are_chunked() {
        let long = "x".repeat(MAX_WORD_CHARS * 2);
        let segs = segments(&long);
        assert_eq!(segs.len(), 3);
        for s in &segs {
            match s {
                Segment::Word(w) => assert!(w.len() <= MAX_WORD_CHARS),
                Segment::Raw(_) => panic!("unexpected raw"),
            }
        }
    }

    #[test]
    fn nfkc_is_optional() {
        assert_eq!(normalize("ﬁ", Normalization::None), "ﬁ");
        assert_eq!(normalize("ﬁ", Normalization::Nfkc), "fi");
    }
}
