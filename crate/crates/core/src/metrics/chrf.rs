//! Character n-gram F-score compatible with sacreBLEU's chrF.

use std::collections::HashMap;

use rayon::prelude::*;

use super::MetricError;
use crate::text::py_split;

pub const DEFAULT_CHAR_ORDER: usize = 6;
pub const DEFAULT_BETA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChrfParams {
    pub char_order: usize,
    pub beta: f64,
    /// Keep whitespace inside n-grams.
    pub whitespace: bool,
    pub lowercase: bool,
}

impl Default for ChrfParams {
    fn default() -> Self {
        Self {
            char_order: DEFAULT_CHAR_ORDER,
            beta: DEFAULT_BETA,
            whitespace: false,
            lowercase: false,
        }
    }
}

impl ChrfParams {
    pub fn signature(&self) -> String {
        format!(
            "nrefs:1|case:{}|eff:yes|nc:{}|nw:0|space:{}",
            if self.lowercase { "lc" } else { "mixed" },
            self.char_order,
            if self.whitespace { "yes" } else { "no" },
        )
    }
}

/// `[hyp, ref, match]` counts per order, flattened. Adds up across
/// segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChrfStats(pub Vec<u64>);

impl ChrfStats {
    pub fn zero(order: usize) -> Self {
        ChrfStats(vec![0; 3 * order])
    }

    pub fn combine(mut self, other: &Self) -> Self {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChrfResult {
    pub corpus: f64,
    pub sentences: Vec<f64>,
}

fn char_ngrams(line: &str, params: &ChrfParams) -> Vec<HashMap<String, u64>> {
    let line = if params.lowercase {
        line.to_lowercase()
    } else {
        line.to_owned()
    };
    let chars: Vec<char> = if params.whitespace {
        line.chars().collect()
    } else {
        py_split(&line).flat_map(str::chars).collect()
    };
    (1..=params.char_order)
        .map(|n| {
            let mut m = HashMap::new();
            for w in chars.windows(n) {
                *m.entry(w.iter().collect::<String>()).or_insert(0) += 1;
            }
            m
        })
        .collect()
}

pub fn segment_stats(hyp: &str, reference: &str, params: &ChrfParams) -> ChrfStats {
    let h = char_ngrams(hyp, params);
    let r = char_ngrams(reference, params);
    let mut out = Vec::with_capacity(3 * params.char_order);
    for (hn, rn) in h.iter().zip(&r) {
        let mut hyp_count = 0;
        let mut matches = 0;
        for (g, &c) in hn {
            hyp_count += c;
            if let Some(&rc) = rn.get(g) {
                matches += c.min(rc);
            }
        }
        // hits are not counted for an order the reference lacks entirely
        out.push(if rn.is_empty() { 0 } else { hyp_count });
        out.push(rn.values().sum());
        out.push(matches);
    }
    ChrfStats(out)
}

/// F-score from (possibly aggregated) statistics, averaging precision and
/// recall over the orders present on both sides.
pub fn score_from_stats(stats: &ChrfStats, beta: f64) -> f64 {
    let factor = beta * beta;
    let (mut avg_prec, mut avg_rec, mut effective) = (0.0, 0.0, 0u32);
    for c in stats.0.chunks_exact(3) {
        let (n_hyp, n_ref, n_match) = (c[0], c[1], c[2]);
        if n_hyp > 0 && n_ref > 0 {
            avg_prec += n_match as f64 / n_hyp as f64;
            avg_rec += n_match as f64 / n_ref as f64;
            effective += 1;
        }
    }
    if effective == 0 {
        return 0.0;
    }
    avg_prec /= effective as f64;
    avg_rec /= effective as f64;
    if avg_prec + avg_rec == 0.0 {
        return 0.0;
    }
    let score = (1.0 + factor) * avg_prec * avg_rec / (factor * avg_prec + avg_rec);
    100.0 * score
}

pub fn sentence_chrf(hyp: &str, reference: &str, params: &ChrfParams) -> f64 {
    score_from_stats(&segment_stats(hyp, reference, params), params.beta)
}

pub fn chrf<S: AsRef<str> + Sync>(
    hyps: &[S],
    refs: &[S],
    params: &ChrfParams,
) -> Result<ChrfResult, MetricError> {
    super::check_pairs(hyps.len(), refs.len())?;
    let per_pair: Vec<ChrfStats> = hyps
        .par_iter()
        .zip(refs.par_iter())
        .map(|(h, r)| segment_stats(h.as_ref(), r.as_ref(), params))
        .collect();
    let total = per_pair
        .iter()
        .fold(ChrfStats::zero(params.char_order), |acc, s| acc.combine(s));
    Ok(ChrfResult {
        corpus: score_from_stats(&total, params.beta),
        sentences: per_pair
            .iter()
            .map(|s| score_from_stats(s, params.beta))
            .collect(),
    })
}
