//! Vocabulary extraction from tokenized corpora.
//!
//! A vocabulary only lists tokens that actually occur in the data it was
//! extracted from, which is why it ends up smaller than the nominal size of
//! the tokenizer that produced the data. Ids 0 and 1 are reserved for `</s>`
//! and `<unk>`; all other tokens follow by descending count, ties broken by
//! first occurrence.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{split_lines, TokenizedCorpus};
use crate::text::{escape_field, unescape_field};

pub const EOS_TOKEN: &str = "</s>";
pub const UNK_TOKEN: &str = "<unk>";
/// Extraction-time special tokens, in id order.
pub const VOCAB_SPECIALS: [&str; 2] = [EOS_TOKEN, UNK_TOKEN];

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("no tokens in any input corpus")]
    EmptyInput,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: duplicate token {token:?}")]
    DuplicateToken { line: usize, token: String },
    #[error("line {line}: expected id {expected}, found {found}")]
    IdGap {
        line: usize,
        expected: u64,
        found: u64,
    },
    #[error("invalid vocabulary: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub token: String,
    pub id: u32,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VocabFormat {
    /// `token<TAB>id<TAB>count`
    #[default]
    Canonical,
    /// `"token": id`, the marian-vocab YAML shape.
    Compat,
}

#[derive(Debug, Clone)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
    index: HashMap<String, u32>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Eq for Vocabulary {}

impl Vocabulary {
    /// Builds a vocabulary from `(token, count)` pairs listed in id order,
    /// checking every invariant.
    pub fn from_counts<I, S>(items: I) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let entries = items
            .into_iter()
            .enumerate()
            .map(|(i, (token, count))| VocabEntry {
                token: token.into(),
                id: i as u32,
                count,
            })
            .collect();
        Self::from_entries(entries)
    }

    fn from_entries(entries: Vec<VocabEntry>) -> Result<Self, VocabError> {
        let invalid = |m: String| Err(VocabError::Invalid(m));
        for (i, s) in VOCAB_SPECIALS.iter().enumerate() {
            if entries.get(i).map(|e| e.token.as_str()) != Some(*s) {
                return invalid(format!("{s} must have id {i}"));
            }
        }
        let mut index = HashMap::with_capacity(entries.len());
        let mut prev_count = u64::MAX;
        for (i, e) in entries.iter().enumerate() {
            if e.id as usize != i {
                return Err(VocabError::IdGap {
                    line: i + 1,
                    expected: i as u64,
                    found: e.id as u64,
                });
            }
            if e.token.is_empty() {
                return invalid(format!("empty token at id {i}"));
            }
            if index.insert(e.token.clone(), e.id).is_some() {
                return Err(VocabError::DuplicateToken {
                    line: i + 1,
                    token: e.token.clone(),
                });
            }
            if i >= VOCAB_SPECIALS.len() {
                if e.count == 0 {
                    return invalid(format!("token {:?} has count 0", e.token));
                }
                if e.count > prev_count {
                    return invalid(format!("token {:?} breaks descending count order", e.token));
                }
                prev_count = e.count;
            }
        }
        Ok(Self { entries, index })
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.token.as_str())
    }

    pub fn is_special(token: &str) -> bool {
        VOCAB_SPECIALS.contains(&token)
    }

    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{}\t{}\t{}", escape_field(&e.token), e.id, e.count);
        }
        out
    }

    pub fn to_compat(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{}: {}", yaml_quote(&e.token), e.id);
        }
        out
    }

    pub fn render(&self, format: VocabFormat) -> String {
        match format {
            VocabFormat::Canonical => self.to_canonical(),
            VocabFormat::Compat => self.to_compat(),
        }
    }

    pub fn from_canonical(text: &str) -> Result<Self, VocabError> {
        let mut entries = Vec::new();
        for (i, line) in split_lines(text).enumerate() {
            let n = i + 1;
            let parse_err = |msg: String| VocabError::Parse { line: n, msg };
            let fields: Vec<&str> = line.split('\t').collect();
            let [token, id, count] = fields.as_slice() else {
                return Err(parse_err("expected `token<TAB>id<TAB>count`".into()));
            };
            let token = unescape_field(token)
                .ok_or_else(|| parse_err(format!("bad escape in {token:?}")))?;
            let id: u64 = id
                .parse()
                .map_err(|_| parse_err(format!("bad id {id:?}")))?;
            let count: u64 = count
                .parse()
                .map_err(|_| parse_err(format!("bad count {count:?}")))?;
            if id != i as u64 {
                return Err(VocabError::IdGap {
                    line: n,
                    expected: i as u64,
                    found: id,
                });
            }
            entries.push(VocabEntry {
                token,
                id: id as u32,
                count,
            });
        }
        Self::from_entries(entries)
    }

    pub fn write(&self, path: &Path, format: VocabFormat) -> Result<(), VocabError> {
        fs::write(path, self.render(format))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, VocabError> {
        Self::from_canonical(&fs::read_to_string(path)?)
    }
}

/// Extracts a vocabulary from one or more corpora. Passing several corpora
/// is equivalent to extracting from their concatenation, which is how joint
/// vocabularies are built.
pub fn extract_vocab(corpora: &[&TokenizedCorpus]) -> Result<Vocabulary, VocabError> {
    // token -> (count, first occurrence as (corpus, line, position))
    type Stats<'a> = HashMap<&'a str, (u64, (usize, usize, usize))>;
    fn merge<'a>(mut a: Stats<'a>, b: Stats<'a>) -> Stats<'a> {
        let (mut a, b) = if a.len() >= b.len() {
            (a, b)
        } else {
            (b, std::mem::take(&mut a))
        };
        for (tok, (n, pos)) in b {
            let e = a.entry(tok).or_insert((0, pos));
            e.0 += n;
            e.1 = e.1.min(pos);
        }
        a
    }

    let stats: Stats = corpora
        .par_iter()
        .enumerate()
        .flat_map(|(ci, c)| {
            c.lines
                .par_iter()
                .enumerate()
                .map(move |(li, l)| (ci, li, l))
        })
        .fold(Stats::new, |mut acc, (ci, li, line)| {
            for (ti, tok) in line.iter().enumerate() {
                let e = acc.entry(tok.as_str()).or_insert((0, (ci, li, ti)));
                e.0 += 1;
                e.1 = e.1.min((ci, li, ti));
            }
            acc
        })
        .reduce(Stats::new, merge);

    if stats.is_empty() {
        return Err(VocabError::EmptyInput);
    }

    let mut items: Vec<(&str, u64, (usize, usize, usize))> = stats
        .iter()
        .filter(|(t, _)| !Vocabulary::is_special(t))
        .map(|(t, &(n, pos))| (*t, n, pos))
        .collect();
    items.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));

    let special_counts = VOCAB_SPECIALS
        .iter()
        .map(|s| (*s, stats.get(s).map_or(0, |v| v.0)));
    Vocabulary::from_counts(special_counts.chain(items.into_iter().map(|(t, n, _)| (t, n))))
}

/// Double-quoted YAML scalar.
fn yaml_quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\u{2028}' | '\u{2029}' | '\u{feff}' => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c if c.is_control() => {
                if (c as u32) <= 0xff {
                    let _ = write!(out, "\\x{:02X}", c as u32);
                } else {
                    let _ = write!(out, "\\u{:04X}", c as u32);
                }
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn yaml_unquote(s: &str) -> Option<(String, &str)> {
    let mut chars = s.strip_prefix('"')?.char_indices();
    let mut out = String::new();
    let body = &s[1..];
    while let Some((i, c)) = chars.next() {
        match c {
            '"' => return Some((out, &body[i + 1..])),
            '\\' => {
                let (_, e) = chars.next()?;
                let hex = |n: usize, chars: &mut std::str::CharIndices| -> Option<char> {
                    let digits: String = (0..n).filter_map(|_| chars.next().map(|x| x.1)).collect();
                    if digits.len() != n {
                        return None;
                    }
                    char::from_u32(u32::from_str_radix(&digits, 16).ok()?)
                };
                out.push(match e {
                    '"' => '"',
                    '\\' => '\\',
                    '/' => '/',
                    't' => '\t',
                    'n' => '\n',
                    'r' => '\r',
                    '0' => '\0',
                    'x' => hex(2, &mut chars)?,
                    'u' => hex(4, &mut chars)?,
                    'U' => hex(8, &mut chars)?,
                    _ => return None,
                });
            }
            c => out.push(c),
        }
    }
    None
}

/// Parses the compat (`"token": id`) format into `(token, id)` pairs.
/// Unquoted plain keys are accepted as well.
pub fn parse_compat(text: &str) -> Result<Vec<(String, u32)>, VocabError> {
    let mut out = Vec::new();
    for (i, line) in split_lines(text).enumerate() {
        let n = i + 1;
        let parse_err = |msg: &str| VocabError::Parse {
            line: n,
            msg: msg.to_owned(),
        };
        let (token, rest) = if line.starts_with('"') {
            yaml_unquote(line).ok_or_else(|| parse_err("unterminated or invalid quoted key"))?
        } else {
            let pos = line.rfind(": ").ok_or_else(|| parse_err("missing `: `"))?;
            (line[..pos].to_owned(), &line[pos..])
        };
        let id = rest
            .strip_prefix(": ")
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| parse_err("expected `: <id>` after the key"))?;
        if id as usize != i {
            return Err(VocabError::IdGap {
                line: n,
                expected: i as u64,
                found: id as u64,
            });
        }
        out.push((token, id));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(lines: &[&[&str]]) -> TokenizedCorpus {
        TokenizedCorpus::new(
            "x",
            lines
                .iter()
                .map(|l| l.iter().map(|t| t.to_string()).collect())
                .collect(),
        )
    }

    #[test]
    fn toy_extraction() {
        let v = extract_vocab(&[&corpus(&[&["a", "b", "a"]])]).unwrap();
        let got: Vec<(&str, u32, u64)> = v
            .entries()
            .iter()
            .map(|e| (e.token.as_str(), e.id, e.count))
            .collect();
        assert_eq!(
            got,
            [("</s>", 0, 0), ("<unk>", 1, 0), ("a", 2, 2), ("b", 3, 1)]
        );
    }

    #[test]
    fn ties_follow_first_occurrence() {
        let v = extract_vocab(&[&corpus(&[&["z", "y"], &["x", "y", "z", "x"]])]).unwrap();
        let toks: Vec<&str> = v.tokens().collect();
        assert_eq!(toks, ["</s>", "<unk>", "z", "y", "x"]);
    }

    #[test]
    fn observed_specials_are_counted() {
        let v = extract_vocab(&[&corpus(&[&["<unk>", "a", "<unk>"]])]).unwrap();
        assert_eq!(v.entries()[1].count, 2);
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(extract_vocab(&[]), Err(VocabError::EmptyInput)));
        let c = corpus(&[&[], &[]]);
        assert!(matches!(extract_vocab(&[&c]), Err(VocabError::EmptyInput)));
    }

    #[test]
    fn compat_rendering() {
        let v = extract_vocab(&[&corpus(&[&["a", "b", "a"]])]).unwrap();
        let text = v.to_compat();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "\"</s>\": 0");
        assert_eq!(lines[3], "\"b\": 3");
    }

    #[test]
    fn quoting_handles_quotes_and_colons() {
        let v =
            extract_vocab(&[&corpus(&[&["\"", "a:b", ": ", "\\\"", "\t", "▁\"x\":"]])]).unwrap();
        let parsed = parse_compat(&v.to_compat()).unwrap();
        let toks: Vec<&str> = parsed.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(toks, v.tokens().collect::<Vec<_>>());
    }

    #[test]
    fn unquoted_compat_keys() {
        let parsed = parse_compat("</s>: 0\n<unk>: 1\n▁a: 2\n").unwrap();
        assert_eq!(parsed[2], ("▁a".to_owned(), 2));
    }

    #[test]
    fn read_errors() {
        let ok = "</s>\t0\t0\n<unk>\t1\t0\na\t2\t5\nb\t3\t1\n";
        assert!(Vocabulary::from_canonical(ok).is_ok());
        let dup = "</s>\t0\t0\n<unk>\t1\t0\na\t2\t5\na\t3\t1\n";
        assert!(matches!(
            Vocabulary::from_canonical(dup),
            Err(VocabError::DuplicateToken { line: 4, .. })
        ));
        let gap = "</s>\t0\t0\n<unk>\t1\t0\na\t3\t5\n";
        assert!(matches!(
            Vocabulary::from_canonical(gap),
            Err(VocabError::IdGap {
                line: 3,
                expected: 2,
                found: 3
            })
        ));
        let malformed = "</s>\t0\t0\n<unk>\t1\n";
        assert!(matches!(
            Vocabulary::from_canonical(malformed),
            Err(VocabError::Parse { line: 2, .. })
        ));
        let unsorted = "</s>\t0\t0\n<unk>\t1\t0\na\t2\t1\nb\t3\t4\n";
        assert!(matches!(
            Vocabulary::from_canonical(unsorted),
            Err(VocabError::Invalid(_))
        ));
        let no_specials = "a\t0\t1\n";
        assert!(matches!(
            Vocabulary::from_canonical(no_specials),
            Err(VocabError::Invalid(_))
        ));
    }

    fn token() -> impl Strategy<Value = String> {
        prop_oneof![
            "[a-zäöü▁]{1,5}",
            "[\"\\\\:\t ,.'<>]{1,4}",
            any::<String>()
                .prop_filter("non-empty, no space", |s| !s.is_empty() && !s.contains(' ')),
        ]
    }

    fn random_vocab() -> impl Strategy<Value = Vocabulary> {
        prop::collection::vec((token(), 1u64..50), 0..40).prop_map(|items| {
            let mut seen = std::collections::HashSet::new();
            let mut items: Vec<(String, u64)> = items
                .into_iter()
                .filter(|(t, _)| !Vocabulary::is_special(t) && seen.insert(t.clone()))
                .collect();
            items.sort_by_key(|x| std::cmp::Reverse(x.1));
            let all = [(EOS_TOKEN.to_owned(), 0), (UNK_TOKEN.to_owned(), 3)]
                .into_iter()
                .chain(items);
            Vocabulary::from_counts(all).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn canonical_round_trip(v in random_vocab()) {
            let back = Vocabulary::from_canonical(&v.to_canonical()).unwrap();
            prop_assert_eq!(back, v);
        }

        #[test]
        fn compat_round_trip_tokens(v in random_vocab()) {
            let parsed = parse_compat(&v.to_compat()).unwrap();
            let expect: Vec<(String, u32)> = v.entries().iter().map(|e| (e.token.clone(), e.id)).collect();
            prop_assert_eq!(parsed, expect);
        }

        #[test]
        fn sharded_extraction_matches_single_pass(
            lines in prop::collection::vec(prop::collection::vec("[a-e]{1,2}", 0..6), 1..30),
            cut in 0usize..30,
        ) {
            let cut = cut.min(lines.len());
            let whole = TokenizedCorpus::new("x", lines.clone());
            let a = TokenizedCorpus::new("x", lines[..cut].to_vec());
            let b = TokenizedCorpus::new("x", lines[cut..].to_vec());
            let single = extract_vocab(&[&whole]);
            let sharded = extract_vocab(&[&a, &b]);
            match (single, sharded) {
                (Ok(s), Ok(p)) => prop_assert_eq!(s, p),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "mismatched results"),
            }
        }
    }
}
