//! Corpus BLEU with sacreBLEU's defaults (13a tokenization, exponential
//! smoothing, single reference).

use std::collections::HashMap;

use rayon::prelude::*;

use super::tokenizer::tokenize_13a;
use super::MetricError;
use crate::text::{py_rstrip, py_split};

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BleuTokenizer {
    #[default]
    Tok13a,
    /// Whitespace splitting only.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Smoothing {
    #[default]
    Exp,
    None,
    Floor(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BleuParams {
    pub tokenizer: BleuTokenizer,
    pub smoothing: Smoothing,
    pub lowercase: bool,
}

impl BleuParams {
    /// Parameter signature in sacreBLEU's key order.
    pub fn signature(&self) -> String {
        let tok = match self.tokenizer {
            BleuTokenizer::Tok13a => "13a",
            BleuTokenizer::None => "none",
        };
        let smooth = match self.smoothing {
            Smoothing::Exp => "exp".to_owned(),
            Smoothing::None => "none".to_owned(),
            Smoothing::Floor(v) => format!("floor[{v:.2}]"),
        };
        let case = if self.lowercase { "lc" } else { "mixed" };
        format!("nrefs:1|case:{case}|eff:no|tok:{tok}|smooth:{smooth}")
    }
}

/// Sufficient statistics; they add up across segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BleuStats {
    pub hyp_len: u64,
    pub ref_len: u64,
    pub correct: [u64; MAX_ORDER],
    pub total: [u64; MAX_ORDER],
}

impl std::ops::Add for BleuStats {
    type Output = Self;

    fn add(mut self, o: Self) -> Self {
        self.hyp_len += o.hyp_len;
        self.ref_len += o.ref_len;
        for n in 0..MAX_ORDER {
            self.correct[n] += o.correct[n];
            self.total[n] += o.total[n];
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuScore {
    pub score: f64,
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub stats: BleuStats,
}

fn preprocess(line: &str, params: &BleuParams) -> String {
    let line = py_rstrip(line);
    let line = if params.lowercase {
        line.to_lowercase()
    } else {
        line.to_owned()
    };
    match params.tokenizer {
        BleuTokenizer::Tok13a => tokenize_13a(&line),
        BleuTokenizer::None => line,
    }
}

fn ngram_counts<'a>(tokens: &'a [&'a str], n: usize) -> HashMap<&'a [&'a str], u64> {
    let mut m = HashMap::new();
    for w in tokens.windows(n) {
        *m.entry(w).or_insert(0) += 1;
    }
    m
}

pub fn segment_stats(hyp: &str, reference: &str, params: &BleuParams) -> BleuStats {
    let hyp = preprocess(hyp, params);
    let reference = preprocess(reference, params);
    let h: Vec<&str> = py_split(&hyp).collect();
    let r: Vec<&str> = py_split(&reference).collect();
    let mut stats = BleuStats {
        hyp_len: h.len() as u64,
        ref_len: r.len() as u64,
        ..Default::default()
    };
    for n in 1..=MAX_ORDER {
        let hc = ngram_counts(&h, n);
        let rc = ngram_counts(&r, n);
        stats.total[n - 1] = h.len().saturating_sub(n - 1) as u64;
        stats.correct[n - 1] = hc
            .iter()
            .map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0)))
            .sum();
    }
    stats
}

/// Score from aggregated statistics.
pub fn score_from_stats(stats: &BleuStats, smoothing: Smoothing) -> BleuScore {
    let (sys, refl) = (stats.hyp_len as f64, stats.ref_len as f64);
    let brevity_penalty = if stats.hyp_len < stats.ref_len {
        if stats.hyp_len > 0 {
            (1.0 - refl / sys).exp()
        } else {
            0.0
        }
    } else {
        1.0
    };
    let mut out = BleuScore {
        score: 0.0,
        precisions: [0.0; MAX_ORDER],
        brevity_penalty,
        stats: *stats,
    };
    if stats.correct.iter().all(|&c| c == 0) {
        return out;
    }
    // precisions as ratios, so that a perfect match gives exactly 100
    let mut ratios = [0.0f64; MAX_ORDER];
    let mut smooth = 1.0;
    for (n, ratio) in ratios.iter_mut().enumerate() {
        let total = stats.total[n];
        if total == 0 {
            break;
        }
        let correct = stats.correct[n];
        *ratio = if correct > 0 {
            correct as f64 / total as f64
        } else {
            match smoothing {
                Smoothing::Exp => {
                    smooth *= 2.0;
                    1.0 / (smooth * total as f64)
                }
                Smoothing::Floor(v) => v / total as f64,
                Smoothing::None => 0.0,
            }
        };
    }
    for (p, r) in out.precisions.iter_mut().zip(&ratios) {
        *p = 100.0 * r;
    }
    if ratios.contains(&0.0) {
        return out;
    }
    let mean_log = ratios.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
    out.score = 100.0 * brevity_penalty * mean_log.exp();
    out
}

pub fn corpus_bleu<S: AsRef<str> + Sync>(
    hyps: &[S],
    refs: &[S],
    params: &BleuParams,
) -> Result<BleuScore, MetricError> {
    super::check_pairs(hyps.len(), refs.len())?;
    let stats = hyps
        .par_iter()
        .zip(refs.par_iter())
        .map(|(h, r)| segment_stats(h.as_ref(), r.as_ref(), params))
        .reduce(BleuStats::default, |a, b| a + b);
    Ok(score_from_stats(&stats, params.smoothing))
}
