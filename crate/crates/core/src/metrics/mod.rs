//! Translation quality metrics: corpus BLEU and chrF (corpus and
//! per-sentence), run aggregation and report rendering.
//!
//! Both metrics follow sacreBLEU's default configurations, and every
//! report carries a parameter signature so that scores are only compared
//! when they were computed the same way.

pub mod bleu;
pub mod chrf;
pub mod report;
pub mod tokenizer;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bleu::{corpus_bleu, BleuParams, BleuScore, BleuTokenizer, Smoothing};
pub use chrf::{chrf, sentence_chrf, ChrfParams, ChrfResult};
pub use report::{render_plot_tsv, render_svg, render_table};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("no segments to score")]
    Empty,
    #[error("{hyps} hypotheses but {refs} references")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("scores are not comparable: signature {0:?} differs from {1:?}")]
    Comparability(String, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_pairs(hyps: usize, refs: usize) -> Result<(), MetricError> {
    if hyps != refs {
        return Err(MetricError::LengthMismatch { hyps, refs });
    }
    if hyps == 0 {
        return Err(MetricError::Empty);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    Bleu,
    Chrf,
    #[default]
    Both,
}

impl Metric {
    fn bleu(self) -> bool {
        matches!(self, Metric::Bleu | Metric::Both)
    }

    fn chrf(self) -> bool {
        matches!(self, Metric::Chrf | Metric::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    /// Model or run name; used as the row label when aggregating.
    pub label: String,
    pub pairs: usize,
    pub corpus_bleu: Option<f64>,
    pub corpus_chrf: Option<f64>,
    #[serde(default)]
    pub sentence_chrf: Vec<f64>,
    /// Both parameter signatures, `BLEU[...]+chrF[...]`.
    pub signature: String,
}

impl ScoreReport {
    pub fn load(path: &Path) -> Result<Self, MetricError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn signature(metric: Metric, bleu: &BleuParams, chrf: &ChrfParams) -> String {
    let mut parts = Vec::new();
    if metric.bleu() {
        parts.push(format!("BLEU[{}]", bleu.signature()));
    }
    if metric.chrf() {
        parts.push(format!("chrF[{}]", chrf.signature()));
    }
    parts.join("+")
}

/// Scores a hypothesis file against a reference file.
pub fn score<S: AsRef<str> + Sync>(
    label: &str,
    hyps: &[S],
    refs: &[S],
    metric: Metric,
    bleu_params: &BleuParams,
    chrf_params: &ChrfParams,
) -> Result<ScoreReport, MetricError> {
    check_pairs(hyps.len(), refs.len())?;
    let corpus_bleu = if metric.bleu() {
        Some(corpus_bleu(hyps, refs, bleu_params)?.score)
    } else {
        None
    };
    let (corpus_chrf, sentence_chrf) = if metric.chrf() {
        let r = chrf(hyps, refs, chrf_params)?;
        (Some(r.corpus), r.sentences)
    } else {
        (None, Vec::new())
    };
    Ok(ScoreReport {
        label: label.to_owned(),
        pairs: hyps.len(),
        corpus_bleu,
        corpus_chrf,
        sentence_chrf,
        signature: signature(metric, bleu_params, chrf_params),
    })
}

/// Mean and population standard deviation over runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

pub fn mean_sd(values: &[f64]) -> Option<MeanSd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(MeanSd {
        mean,
        sd: var.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub label: String,
    pub runs: usize,
    pub bleu: Option<MeanSd>,
    pub chrf: Option<MeanSd>,
    /// Always `population`: the deviation divides by the number of runs.
    pub sd_kind: String,
    pub signature: String,
}

pub fn aggregate_runs(reports: &[ScoreReport]) -> Result<RunAggregate, MetricError> {
    let first = reports.first().ok_or(MetricError::Empty)?;
    for r in &reports[1..] {
        if r.signature != first.signature {
            return Err(MetricError::Comparability(
                first.signature.clone(),
                r.signature.clone(),
            ));
        }
    }
    let collect = |f: fn(&ScoreReport) -> Option<f64>| -> Option<Vec<f64>> {
        reports.iter().map(f).collect()
    };
    Ok(RunAggregate {
        label: first.label.clone(),
        runs: reports.len(),
        bleu: collect(|r| r.corpus_bleu).and_then(|v| mean_sd(&v)),
        chrf: collect(|r| r.corpus_chrf).and_then(|v| mean_sd(&v)),
        sd_kind: "population".to_owned(),
        signature: first.signature.clone(),
    })
}
