//! Vocabulary overlap, overlap of overlaps, and complementary sizing.
//!
//! For two vocabularies extracted from corpora A and B, and a joint
//! vocabulary extracted from their concatenation,
//! `|joint| = |A| + |B| - |A ∩ B|`. Percentages are taken over the joint
//! size.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{escape_field, percent_half_up};
use crate::vocab::Vocabulary;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OverlapError {
    #[error(
        "inconsistent vocabulary sizes: |A|={size_a} + |B|={size_b} - |O|={overlap} != |joint|={size_joint}"
    )]
    Consistency {
        size_a: usize,
        size_b: usize,
        size_joint: usize,
        overlap: usize,
    },
    #[error("joint size {joint} must be larger than base size {base}")]
    Configuration { joint: usize, base: usize },
}

/// Size-level overlap figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapCounts {
    pub size_a: usize,
    pub size_b: usize,
    pub size_joint: usize,
    pub overlap_count: usize,
    pub overlap_pct: f64,
    /// `overlap_pct` rounded half-up for tables.
    pub overlap_pct_display: String,
}

impl OverlapCounts {
    fn new(size_a: usize, size_b: usize, size_joint: usize, overlap_count: usize) -> Self {
        let overlap_pct = if size_joint == 0 {
            0.0
        } else {
            100.0 * overlap_count as f64 / size_joint as f64
        };
        Self {
            size_a,
            size_b,
            size_joint,
            overlap_count,
            overlap_pct,
            overlap_pct_display: display_pct(overlap_count as u64, size_joint as u64),
        }
    }
}

/// One decimal, or three when one decimal would hide a non-zero overlap
/// (`2 / 62802` renders as `0.003`).
pub fn display_pct(num: u64, den: u64) -> String {
    if num > 0 && (2000 * num as u128) < den as u128 {
        percent_half_up(num, den, 3)
    } else {
        percent_half_up(num, den, 1)
    }
}

/// Derives the overlap from the three vocabulary sizes alone.
pub fn overlap_from_sizes(
    size_a: usize,
    size_b: usize,
    size_joint: usize,
) -> Result<OverlapCounts, OverlapError> {
    let err = || OverlapError::Consistency {
        size_a,
        size_b,
        size_joint,
        overlap: (size_a + size_b).saturating_sub(size_joint),
    };
    if size_joint < size_a.max(size_b) || size_joint > size_a + size_b {
        return Err(err());
    }
    Ok(OverlapCounts::new(
        size_a,
        size_b,
        size_joint,
        size_a + size_b - size_joint,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    #[serde(flatten)]
    pub counts: OverlapCounts,
    /// Sorted.
    pub overlap_tokens: Vec<String>,
    /// Token length in characters -> number of overlapping tokens.
    pub token_length_histogram: BTreeMap<usize, usize>,
    /// Whether `size_joint` came from a supplied joint vocabulary rather
    /// than the union of `a` and `b`.
    pub joint_supplied: bool,
}

impl OverlapReport {
    pub fn summary(&self) -> String {
        let c = &self.counts;
        format!(
            "|A| {}  |B| {}  |joint| {}  overlap {} ({}%)",
            c.size_a, c.size_b, c.size_joint, c.overlap_count, c.overlap_pct_display
        )
    }

    /// `token<TAB>length` per overlapping token.
    pub fn tokens_tsv(&self) -> String {
        tokens_tsv(&self.overlap_tokens)
    }
}

fn tokens_tsv(tokens: &[String]) -> String {
    tokens
        .iter()
        .map(|t| format!("{}\t{}\n", escape_field(t), t.chars().count()))
        .collect()
}

fn length_histogram<'a>(tokens: impl IntoIterator<Item = &'a String>) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for t in tokens {
        *h.entry(t.chars().count()).or_insert(0) += 1;
    }
    h
}

fn intersection<'a>(a: &'a Vocabulary, b: &Vocabulary) -> BTreeSet<&'a str> {
    a.tokens().filter(|t| b.contains(t)).collect()
}

/// Pairwise overlap. When `joint` is supplied it must have been extracted
/// from the concatenation of the corpora behind `a` and `b`; any violation
/// of inclusion-exclusion is reported as an error.
pub fn compute_overlap(
    a: &Vocabulary,
    b: &Vocabulary,
    joint: Option<&Vocabulary>,
) -> Result<OverlapReport, OverlapError> {
    let common = intersection(a, b);
    let union = a.len() + b.len() - common.len();
    let size_joint = match joint {
        Some(j) if j.len() != union => {
            return Err(OverlapError::Consistency {
                size_a: a.len(),
                size_b: b.len(),
                size_joint: j.len(),
                overlap: common.len(),
            })
        }
        Some(j) => j.len(),
        None => union,
    };
    let overlap_tokens: Vec<String> = common.into_iter().map(str::to_owned).collect();
    Ok(OverlapReport {
        counts: OverlapCounts::new(a.len(), b.len(), size_joint, overlap_tokens.len()),
        token_length_histogram: length_histogram(&overlap_tokens),
        overlap_tokens,
        joint_supplied: joint.is_some(),
    })
}

/// Count-level figures of a three-way overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleOverlapCounts {
    pub o_ab_count: usize,
    pub o_ac_count: usize,
    pub oo_count: usize,
    pub unique_ab: usize,
    pub unique_ac: usize,
    pub share_ab: f64,
    pub share_ac: f64,
    /// Shares rendered as integer percentages.
    pub share_ab_display: String,
    pub share_ac_display: String,
}

pub fn triple_from_counts(
    o_ab: usize,
    o_ac: usize,
    oo: usize,
) -> Result<TripleOverlapCounts, OverlapError> {
    if oo > o_ab || oo > o_ac {
        return Err(OverlapError::Consistency {
            size_a: o_ab,
            size_b: o_ac,
            size_joint: oo,
            overlap: oo,
        });
    }
    let share = |n: usize| {
        if n == 0 {
            0.0
        } else {
            100.0 * oo as f64 / n as f64
        }
    };
    let display = |n: usize| {
        if n == 0 {
            "0".to_owned()
        } else {
            percent_half_up(oo as u64, n as u64, 0)
        }
    };
    Ok(TripleOverlapCounts {
        o_ab_count: o_ab,
        o_ac_count: o_ac,
        oo_count: oo,
        unique_ab: o_ab - oo,
        unique_ac: o_ac - oo,
        share_ab: share(o_ab),
        share_ac: share(o_ac),
        share_ab_display: display(o_ab),
        share_ac_display: display(o_ac),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleOverlapReport {
    /// base ∩ aux1, sorted.
    pub o_ab: Vec<String>,
    /// base ∩ aux2, sorted.
    pub o_ac: Vec<String>,
    /// o_ab ∩ o_ac, sorted.
    pub oo: Vec<String>,
    #[serde(flatten)]
    pub counts: TripleOverlapCounts,
    pub oo_length_histogram: BTreeMap<usize, usize>,
}

impl TripleOverlapReport {
    pub fn summary(&self) -> String {
        let c = &self.counts;
        format!(
            "|o_ab| {}  |o_ac| {}  |oo| {}  unique_ab {}  unique_ac {}  share_ab {}%  share_ac {}%",
            c.o_ab_count,
            c.o_ac_count,
            c.oo_count,
            c.unique_ab,
            c.unique_ac,
            c.share_ab_display,
            c.share_ac_display
        )
    }

    pub fn oo_tsv(&self) -> String {
        tokens_tsv(&self.oo)
    }
}

pub fn compute_triple_overlap(
    base: &Vocabulary,
    aux1: &Vocabulary,
    aux2: &Vocabulary,
) -> TripleOverlapReport {
    let o_ab = intersection(base, aux1);
    let o_ac = intersection(base, aux2);
    let oo: Vec<String> = o_ab.intersection(&o_ac).map(|t| (*t).to_owned()).collect();
    let counts = triple_from_counts(o_ab.len(), o_ac.len(), oo.len())
        .expect("intersection is a subset of both operands");
    TripleOverlapReport {
        o_ab: o_ab.into_iter().map(str::to_owned).collect(),
        o_ac: o_ac.into_iter().map(str::to_owned).collect(),
        oo_length_histogram: length_histogram(&oo),
        oo,
        counts,
    }
}

/// Tokenizer target for the auxiliary language so that the disjoint
/// vocabulary matches the joint one in size: `|joint| - |base|`.
pub fn complementary_size(joint: usize, base: usize) -> Result<usize, OverlapError> {
    if joint <= base {
        return Err(OverlapError::Configuration { joint, base });
    }
    Ok(joint - base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::{EOS_TOKEN, UNK_TOKEN};
    use proptest::prelude::*;

    fn vocab(tokens: &[&str]) -> Vocabulary {
        let specials = [(EOS_TOKEN, 0), (UNK_TOKEN, 0)];
        Vocabulary::from_counts(specials.into_iter().chain(tokens.iter().map(|t| (*t, 1)))).unwrap()
    }

    #[test]
    fn published_size_arithmetic() {
        let sv = overlap_from_sizes(31_421, 31_383, 58_918).unwrap();
        assert_eq!(sv.overlap_count, 3_886);
        assert_eq!(sv.overlap_pct_display, "6.6");
        let fi = overlap_from_sizes(31_421, 31_671, 60_577).unwrap();
        assert_eq!(fi.overlap_count, 2_515);
        assert_eq!(fi.overlap_pct_display, "4.2");
        assert!(overlap_from_sizes(10, 10, 25).is_err());
        assert!(overlap_from_sizes(10, 5, 9).is_err());
    }

    #[test]
    fn small_percentages_keep_three_decimals() {
        assert_eq!(display_pct(2, 62_802), "0.003");
        assert_eq!(display_pct(0, 100), "0.0");
        assert_eq!(display_pct(1, 10), "10.0");
    }

    #[test]
    fn triple_published_arithmetic() {
        let t = triple_from_counts(3_886, 2_515, 2_072).unwrap();
        assert_eq!((t.unique_ab, t.unique_ac), (1_814, 443));
        assert_eq!(t.share_ab_display, "53");
        assert_eq!(t.share_ac_display, "82");
        assert!(triple_from_counts(5, 3, 4).is_err());
    }

    #[test]
    fn complementary_sizes() {
        assert_eq!(complementary_size(58_918, 31_421), Ok(27_497));
        assert_eq!(complementary_size(60_577, 31_421), Ok(29_156));
        assert_eq!(complementary_size(11, 10), Ok(1));
        assert!(complementary_size(10, 10).is_err());
    }

    #[test]
    fn self_overlap() {
        let a = vocab(&["x", "yy", "z"]);
        let r = compute_overlap(&a, &a, None).unwrap();
        assert_eq!(r.counts.overlap_count, a.len());
        assert_eq!(r.counts.size_joint, a.len());
        assert_eq!(r.counts.overlap_pct, 100.0);
    }

    #[test]
    fn disjoint_pair_shares_specials() {
        let a = vocab(&["▁a", "b"]);
        let b = vocab(&["SV_▁a", "SV_b"]);
        let r = compute_overlap(&a, &b, None).unwrap();
        assert_eq!(r.overlap_tokens, ["</s>", "<unk>"]);
        assert_eq!(r.token_length_histogram, BTreeMap::from([(4, 1), (5, 1)]));
    }

    #[test]
    fn inconsistent_joint_is_reported() {
        let a = vocab(&["x", "y"]);
        let b = vocab(&["y", "z"]);
        let wrong = vocab(&["x"]);
        let err = compute_overlap(&a, &b, Some(&wrong)).unwrap_err();
        assert_eq!(
            err,
            OverlapError::Consistency {
                size_a: 4,
                size_b: 4,
                size_joint: 3,
                overlap: 3
            }
        );
        let joint = vocab(&["x", "y", "z"]);
        assert!(
            compute_overlap(&a, &b, Some(&joint))
                .unwrap()
                .joint_supplied
        );
    }

    #[test]
    fn triple_identical_aux() {
        let base = vocab(&["a", "b", "c"]);
        let aux = vocab(&["b", "c", "d"]);
        let t = compute_triple_overlap(&base, &aux, &aux);
        assert_eq!(t.oo, t.o_ab);
        assert_eq!((t.counts.unique_ab, t.counts.unique_ac), (0, 0));
        assert_eq!(t.counts.share_ab_display, "100");
    }

    #[test]
    fn json_field_names() {
        let r = compute_overlap(&vocab(&["a"]), &vocab(&["a"]), None).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for k in [
            "size_a",
            "size_b",
            "size_joint",
            "overlap_tokens",
            "overlap_count",
            "overlap_pct",
            "token_length_histogram",
        ] {
            assert!(v.get(k).is_some(), "missing {k}");
        }
        let back: OverlapReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }

    fn token_set() -> impl Strategy<Value = BTreeSet<String>> {
        prop::collection::btree_set("[a-f]{1,3}", 0..30)
    }

    proptest! {
        #[test]
        fn symmetric(a in token_set(), b in token_set()) {
            let va = vocab(&a.iter().map(String::as_str).collect::<Vec<_>>());
            let vb = vocab(&b.iter().map(String::as_str).collect::<Vec<_>>());
            let ab = compute_overlap(&va, &vb, None).unwrap();
            let ba = compute_overlap(&vb, &va, None).unwrap();
            prop_assert_eq!(&ab.overlap_tokens, &ba.overlap_tokens);
            prop_assert_eq!(ab.counts.size_joint, ba.counts.size_joint);
            prop_assert!(ab.counts.overlap_pct >= 0.0 && ab.counts.overlap_pct <= 100.0);
        }

        #[test]
        fn triple_subset_laws(a in token_set(), b in token_set(), c in token_set()) {
            let v = |s: &BTreeSet<String>| vocab(&s.iter().map(String::as_str).collect::<Vec<_>>());
            let t = compute_triple_overlap(&v(&a), &v(&b), &v(&c));
            prop_assert!(t.oo.iter().all(|x| t.o_ab.contains(x) && t.o_ac.contains(x)));
            prop_assert_eq!(t.counts.unique_ab + t.oo.len(), t.o_ab.len());
            prop_assert_eq!(t.counts.unique_ac + t.oo.len(), t.o_ac.len());
        }
    }
}
