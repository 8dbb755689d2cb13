//! Greedy BPE training.
//!
//! Pair counts are maintained incrementally: applying a merge only touches
//! the words that contain the merged pair, and the priority queue is
//! corrected lazily when a stale entry reaches the top.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};

use rayon::prelude::*;

use super::model::{BpeModel, Merge, Piece, PieceKind};
use super::pretokenize::{normalize, segments, Segment};
use super::{byte_piece, BpeError, Normalization, Result, SPECIAL_PIECES};

/// Symbol id for a training character that did not fit in the inventory.
const NO_SYMBOL: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpeTrainer {
    pub vocab_size: usize,
    pub byte_fallback: bool,
    pub normalization: Normalization,
}

impl BpeTrainer {
    pub fn new(vocab_size: usize, byte_fallback: bool) -> Self {
        Self {
            vocab_size,
            byte_fallback,
            normalization: Normalization::None,
        }
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn train<S: AsRef<str> + Sync>(&self, corpus: &[S]) -> Result<BpeModel> {
        self.train_traced(corpus).map(|(model, _)| model)
    }

    /// Trains and also returns the pair frequency observed when each merge
    /// was selected.
    pub fn train_traced<S: AsRef<str> + Sync>(&self, corpus: &[S]) -> Result<(BpeModel, Vec<u64>)> {
        let word_counts = count_words(corpus, self.normalization);
        if word_counts.is_empty() {
            return Err(BpeError::EmptyCorpus);
        }

        let mut char_counts: HashMap<char, u64> = HashMap::new();
        for (w, n) in &word_counts {
            for &c in w {
                *char_counts.entry(c).or_default() += n;
            }
        }
        let mut chars: Vec<(char, u64)> = char_counts.into_iter().collect();
        chars.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

        let mut pieces: Vec<Piece> = SPECIAL_PIECES
            .iter()
            .map(|s| Piece {
                text: (*s).to_owned(),
                kind: PieceKind::Special,
            })
            .collect();
        if self.byte_fallback {
            pieces.extend((0..=255u8).map(|b| Piece {
                text: byte_piece(b),
                kind: PieceKind::Byte,
            }));
        }
        // with byte fallback, characters beyond the budget are byte-encoded
        let required = pieces.len() + if self.byte_fallback { 1 } else { chars.len() };
        if self.vocab_size < required {
            return Err(BpeError::VocabTooSmall {
                target: self.vocab_size,
                required,
            });
        }
        let forbidden: HashSet<String> = pieces.iter().map(|p| p.text.clone()).collect();

        let room = self.vocab_size - pieces.len();
        let mut symbols: Vec<String> = Vec::new();
        let mut symbol_ids: HashMap<String, u32> = HashMap::new();
        for &(c, _) in chars.iter().take(room) {
            let s = c.to_string();
            symbol_ids.insert(s.clone(), symbols.len() as u32);
            symbols.push(s.clone());
            pieces.push(Piece {
                text: s,
                kind: PieceKind::Char,
            });
        }

        let mut words: Vec<Word> = word_counts
            .into_iter()
            .map(|(w, count)| Word {
                syms: w
                    .iter()
                    .map(|c| symbol_ids.get(&c.to_string()).copied().unwrap_or(NO_SYMBOL))
                    .collect(),
                count,
            })
            .collect();
        // word_counts is sorted, so word indices are deterministic
        drop(chars);

        let mut pair_counts: HashMap<(u32, u32), u64> = HashMap::new();
        let mut pair_words: HashMap<(u32, u32), HashSet<u32>> = HashMap::new();
        for (wi, w) in words.iter().enumerate() {
            for p in w.pairs() {
                *pair_counts.entry(p).or_default() += w.count;
                pair_words.entry(p).or_default().insert(wi as u32);
            }
        }
        let mut heap: BinaryHeap<Candidate> = pair_counts
            .iter()
            .map(|(&p, &n)| Candidate::new(p, n, &symbols))
            .collect();

        let mut merges: Vec<Merge> = Vec::new();
        let mut frequencies: Vec<u64> = Vec::new();
        let mut banned: HashSet<(u32, u32)> = HashSet::new();

        while pieces.len() < self.vocab_size {
            let Some(top) = heap.pop() else { break };
            let pair = (top.left, top.right);
            let current = pair_counts.get(&pair).copied().unwrap_or(0);
            if current != top.count {
                if current > 0 {
                    heap.push(Candidate::new(pair, current, &symbols));
                }
                continue;
            }
            if banned.contains(&pair) {
                continue;
            }
            if forbidden.contains(&top.concat) {
                banned.insert(pair);
                continue;
            }
            if current < 2 {
                break;
            }

            let merged = match symbol_ids.get(&top.concat) {
                Some(&id) => id,
                None => {
                    let id = symbols.len() as u32;
                    symbols.push(top.concat.clone());
                    symbol_ids.insert(top.concat.clone(), id);
                    pieces.push(Piece {
                        text: top.concat.clone(),
                        kind: PieceKind::Merged,
                    });
                    id
                }
            };
            merges.push(Merge {
                left: symbols[pair.0 as usize].clone(),
                right: symbols[pair.1 as usize].clone(),
            });
            frequencies.push(current);
            banned.insert(pair);

            let mut affected: Vec<u32> = pair_words
                .remove(&pair)
                .map(|s| s.into_iter().collect())
                .unwrap_or_default();
            affected.sort_unstable();
            let mut touched: HashSet<(u32, u32)> = HashSet::new();
            for wi in affected {
                let word = &mut words[wi as usize];
                let before = word.pairs();
                if !word.merge(pair, merged) {
                    continue;
                }
                for p in before {
                    let e = pair_counts.get_mut(&p).expect("counted pair");
                    *e -= word.count;
                }
                for p in word.pairs() {
                    *pair_counts.entry(p).or_default() += word.count;
                    pair_words.entry(p).or_default().insert(wi);
                    touched.insert(p);
                }
            }
            let mut touched: Vec<(u32, u32)> = touched.into_iter().collect();
            touched.sort_unstable();
            for p in touched {
                let n = pair_counts[&p];
                if n > 0 {
                    heap.push(Candidate::new(p, n, &symbols));
                }
            }
        }

        let model = BpeModel::from_parts(
            pieces,
            merges,
            self.vocab_size,
            self.byte_fallback,
            self.normalization,
        )?;
        Ok((model, frequencies))
    }
}

/// Trains a model with default settings (no normalization).
pub fn train_bpe<S: AsRef<str> + Sync>(
    corpus: &[S],
    target_vocab_size: usize,
    byte_fallback: bool,
) -> Result<BpeModel> {
    BpeTrainer::new(target_vocab_size, byte_fallback).train(corpus)
}

/// Counts pre-tokenized words. The result is sorted by word so that
/// downstream iteration order never depends on hashing or sharding.
fn count_words<S: AsRef<str> + Sync>(
    corpus: &[S],
    normalization: Normalization,
) -> Vec<(Vec<char>, u64)> {
    let counts = corpus
        .par_iter()
        .fold(HashMap::<Vec<char>, u64>::new, |mut acc, line| {
            let line = normalize(line.as_ref(), normalization);
            for seg in segments(&line) {
                if let Segment::Word(w) = seg {
                    *acc.entry(w).or_default() += 1;
                }
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            if a.len() < b.len() {
                return merge_counts(b, a);
            }
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });
    let mut out: Vec<(Vec<char>, u64)> = counts.into_iter().collect();
    out.sort_unstable();
    out
}

fn merge_counts(
    mut a: HashMap<Vec<char>, u64>,
    b: HashMap<Vec<char>, u64>,
) -> HashMap<Vec<char>, u64> {
    for (k, v) in b {
        *a.entry(k).or_default() += v;
    }
    a
}

struct Word {
    syms: Vec<u32>,
    count: u64,
}

impl Word {
    fn pairs(&self) -> Vec<(u32, u32)> {
        self.syms
            .windows(2)
            .filter(|w| w[0] != NO_SYMBOL && w[1] != NO_SYMBOL)
            .map(|w| (w[0], w[1]))
            .collect()
    }

    /// Replaces non-overlapping occurrences of `pair`, scanning left to right.
    fn merge(&mut self, pair: (u32, u32), merged: u32) -> bool {
        let mut out = Vec::with_capacity(self.syms.len());
        let mut changed = false;
        let mut i = 0;
        while i < self.syms.len() {
            if i + 1 < self.syms.len() && self.syms[i] == pair.0 && self.syms[i + 1] == pair.1 {
                out.push(merged);
                i += 2;
                changed = true;
            } else {
                out.push(self.syms[i]);
                i += 1;
            }
        }
        self.syms = out;
        changed
    }
}

/// Heap entry. The greatest candidate has the highest count, then the
/// lexicographically smallest concatenation, then the shortest left side.
#[derive(Debug, PartialEq, Eq)]
struct Candidate {
    count: u64,
    concat: String,
    left_len: usize,
    left: u32,
    right: u32,
}

impl Candidate {
    fn new(pair: (u32, u32), count: u64, symbols: &[String]) -> Self {
        let l = &symbols[pair.0 as usize];
        let r = &symbols[pair.1 as usize];
        let mut concat = String::with_capacity(l.len() + r.len());
        concat.push_str(l);
        concat.push_str(r);
        Self {
            count,
            concat,
            left_len: l.len(),
            left: pair.0,
            right: pair.1,
        }
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| other.concat.cmp(&self.concat))
            .then_with(|| other.left_len.cmp(&self.left_len))
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.right.cmp(&self.right))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn merge_list(m: &BpeModel) -> Vec<(String, String)> {
        m.merges()
            .iter()
            .map(|m| (m.left.clone(), m.right.clone()))
            .collect()
    }

    #[test]
    fn low_lower_matches_hand_simulation() {
        // pairs after preprocessing: (▁,l)=4 (l,o)=4 (o,w)=4 (w,e)=1 (e,r)=1;
        // "lo" < "ow" < "▁l", then "low" < "▁lo", then (▁,low); then max count 1.
        let (m, freqs) = BpeTrainer::new(30, false)
            .train_traced(&["low low low", "lower"])
            .unwrap();
        let expected = [("l", "o"), ("lo", "w"), ("▁", "low")];
        let expected: Vec<(String, String)> = expected
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(merge_list(&m), expected);
        assert_eq!(freqs, [4, 4, 4]);
        assert_eq!(m.len(), 3 + 6 + 3);
    }

    #[test]
    fn single_char_corpus_truncates_to_target() {
        let target = SPECIAL_PIECES.len() + 256 + 1;
        let m = train_bpe(&["a"], target, true).unwrap();
        assert_eq!(m.len(), target);
        assert!(m.merges().is_empty());
        // 'a' sorts before '▁' on ties
        assert!(m.contains("a"));
        assert!(!m.contains("▁"));
        assert_eq!(m.decode(&m.encode("a")).unwrap(), "a");
        assert_eq!(m.decode(&m.encode("a a")).unwrap(), "a a");

        let m = train_bpe(&["a"], target + 1, true).unwrap();
        assert!(m.contains("a") && m.contains("▁"));
        assert!(m.merges().is_empty());
    }

    #[test]
    fn size_errors() {
        assert!(matches!(
            train_bpe::<&str>(&[], 100, false),
            Err(BpeError::EmptyCorpus)
        ));
        assert!(matches!(
            train_bpe(&["", ""], 100, false),
            Err(BpeError::EmptyCorpus)
        ));
        assert!(matches!(
            train_bpe(&["abc"], 6, false),
            Err(BpeError::VocabTooSmall { required: 7, .. })
        ));
        assert!(train_bpe(&["abc"], 7, false).is_ok());
        assert!(matches!(
            train_bpe(&["abc"], 259, true),
            Err(BpeError::VocabTooSmall { required: 260, .. })
        ));
    }

    #[test]
    fn merges_never_produce_reserved_strings() {
        let corpus = vec!["<unk> <unk> <unk> <0x41> <0x41> </s>"; 20];
        let m = train_bpe(&corpus, 400, true).unwrap();
        for merge in m.merges() {
            let joined = format!("{}{}", merge.left, merge.right);
            assert!(!SPECIAL_PIECES.contains(&joined.as_str()));
            assert!(super::super::parse_byte_piece(&joined).is_none());
        }
        let line = "<unk> <0x41>";
        assert_eq!(m.decode(&m.encode(line)).unwrap(), line);
    }

    #[test]
    fn piece_count_respects_target() {
        let corpus = ["aaaa bbbb aaaa bbbb abab", "abba baba"];
        for target in 8..20 {
            let m = train_bpe(&corpus, target, false).unwrap();
            assert!(m.len() <= target);
        }
    }
}
