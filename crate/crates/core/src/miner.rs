//! Divergence mining: sentences where system A beats system B by a
//! sentence-level chrF margin.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{sentence_chrf, ChrfParams};
use crate::text::{escape_field, unescape_field};

pub const DEFAULT_THRESHOLD: f64 = 50.0;

#[derive(Debug, Error, PartialEq)]
pub enum MinerError {
    #[error("line counts differ: source {0}, reference {1}, hyp_a {2}, hyp_b {3}")]
    Alignment(usize, usize, usize, usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRecord {
    /// 1-based line number.
    pub index: usize,
    pub source: String,
    pub reference: String,
    pub hyp_a: String,
    pub hyp_b: String,
    pub chrf_a: f64,
    pub chrf_b: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinerParams {
    pub threshold: f64,
    /// Select on `|delta|` and rank by magnitude, reporting wins in both
    /// directions.
    pub symmetric: bool,
    pub chrf: ChrfParams,
}

impl Default for MinerParams {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            symmetric: false,
            chrf: ChrfParams::default(),
        }
    }
}

pub fn mine_divergence<S: AsRef<str> + Sync>(
    source: &[S],
    reference: &[S],
    hyp_a: &[S],
    hyp_b: &[S],
    params: &MinerParams,
) -> Result<Vec<DivergenceRecord>, MinerError> {
    let n = source.len();
    if reference.len() != n || hyp_a.len() != n || hyp_b.len() != n {
        return Err(MinerError::Alignment(
            n,
            reference.len(),
            hyp_a.len(),
            hyp_b.len(),
        ));
    }
    let key = |d: f64| if params.symmetric { d.abs() } else { d };
    let mut out: Vec<DivergenceRecord> = (0..n)
        .into_par_iter()
        .filter_map(|i| {
            let r = reference[i].as_ref();
            let chrf_a = sentence_chrf(hyp_a[i].as_ref(), r, &params.chrf);
            let chrf_b = sentence_chrf(hyp_b[i].as_ref(), r, &params.chrf);
            let delta = chrf_a - chrf_b;
            (key(delta) >= params.threshold).then(|| DivergenceRecord {
                index: i + 1,
                source: source[i].as_ref().to_owned(),
                reference: r.to_owned(),
                hyp_a: hyp_a[i].as_ref().to_owned(),
                hyp_b: hyp_b[i].as_ref().to_owned(),
                chrf_a,
                chrf_b,
                delta,
            })
        })
        .collect();
    out.sort_by(|x, y| {
        key(y.delta)
            .total_cmp(&key(x.delta))
            .then(x.index.cmp(&y.index))
    });
    Ok(out)
}

pub const TSV_HEADER: &str = "index\tdelta\tchrf_a\tchrf_b\tsource\treference\thyp_a\thyp_b";

pub fn records_tsv(records: &[DivergenceRecord]) -> String {
    let mut out = format!("{TSV_HEADER}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.index,
            r.delta,
            r.chrf_a,
            r.chrf_b,
            escape_field(&r.source),
            escape_field(&r.reference),
            escape_field(&r.hyp_a),
            escape_field(&r.hyp_b)
        );
    }
    out
}

/// One decimal, without a trailing `.0`.
fn short(v: f64) -> String {
    let s = format!("{v:.1}");
    s.strip_suffix(".0").map(str::to_owned).unwrap_or(s)
}

pub const TABLE_HEADER: &str = "Model\tTranslation\tChrF";

/// Example table: one block per record with the source, the reference and
/// both hypotheses. Exact scores are kept on the `#` line of each block.
pub fn render_examples(
    records: &[DivergenceRecord],
    limit: usize,
    label_a: &str,
    label_b: &str,
) -> String {
    let mut out = format!("{TABLE_HEADER}\n");
    for r in records.iter().take(limit) {
        let _ = writeln!(
            out,
            "\n# line {} chrf_a {} chrf_b {} delta {}",
            r.index, r.chrf_a, r.chrf_b, r.delta
        );
        let _ = writeln!(out, "Source\t{}\t", escape_field(&r.source));
        let _ = writeln!(out, "Ref\t{}\t", escape_field(&r.reference));
        let _ = writeln!(
            out,
            "{label_a}\t{}\t{}",
            escape_field(&r.hyp_a),
            short(r.chrf_a)
        );
        let _ = writeln!(
            out,
            "{label_b}\t{}\t{}",
            escape_field(&r.hyp_b),
            short(r.chrf_b)
        );
    }
    out
}

/// Inverse of [`render_examples`].
pub fn parse_examples(text: &str) -> Result<Vec<DivergenceRecord>, MinerError> {
    let lines: Vec<&str> = text.lines().collect();
    let err = |line: usize, msg: &str| MinerError::Parse {
        line,
        msg: msg.to_owned(),
    };
    if lines.first() != Some(&TABLE_HEADER) {
        return Err(err(1, "missing table header"));
    }
    let mut out = Vec::new();
    let mut i = 1;
    while i < lines.len() {
        if lines[i].is_empty() {
            i += 1;
            continue;
        }
        let head: Vec<&str> = lines[i].split(' ').collect();
        let ["#", "line", idx, "chrf_a", a, "chrf_b", b, "delta", d] = head.as_slice() else {
            return Err(err(i + 1, "expected a `# line` block header"));
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(i + 1, "bad number"));
        let field = |k: usize, col: usize| -> Result<String, MinerError> {
            let l = lines
                .get(i + k)
                .ok_or_else(|| err(i + k + 1, "truncated block"))?;
            let cols: Vec<&str> = l.split('\t').collect();
            if cols.len() != 3 {
                return Err(err(i + k + 1, "expected three columns"));
            }
            unescape_field(cols[col]).ok_or_else(|| err(i + k + 1, "bad escape"))
        };
        out.push(DivergenceRecord {
            index: idx.parse().map_err(|_| err(i + 1, "bad line number"))?,
            chrf_a: num(a)?,
            chrf_b: num(b)?,
            delta: num(d)?,
            source: field(1, 1)?,
            reference: field(2, 1)?,
            hyp_a: field(3, 1)?,
            hyp_b: field(4, 1)?,
        });
        i += 5;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_vs_disjoint_hypothesis() {
        let refs = ["abc", "def"];
        let bad = ["xyz", "uvw"];
        let recs = mine_divergence(&refs, &refs, &refs, &bad, &MinerParams::default()).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|r| r.delta == 100.0));
        assert_eq!(recs[0].index, 1);
    }

    #[test]
    fn identical_systems_yield_nothing() {
        let s = ["a b", "c d"];
        assert!(mine_divergence(&s, &s, &s, &s, &MinerParams::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn symmetric_mode_reports_both_directions() {
        let refs = ["abc", "def"];
        let a = ["abc", "uvw"];
        let b = ["xyz", "def"];
        let one_way = mine_divergence(&refs, &refs, &a, &b, &MinerParams::default()).unwrap();
        assert_eq!(one_way.len(), 1);
        let params = MinerParams {
            symmetric: true,
            ..Default::default()
        };
        let both = mine_divergence(&refs, &refs, &a, &b, &params).unwrap();
        assert_eq!(both.iter().map(|r| r.index).collect::<Vec<_>>(), [1, 2]);
        assert_eq!(both[1].delta, -100.0);
    }

    #[test]
    fn alignment_error() {
        let err =
            mine_divergence(&["a"], &["a"], &["a"], &[], &MinerParams::default()).unwrap_err();
        assert_eq!(err, MinerError::Alignment(1, 1, 1, 0));
    }

    #[test]
    fn render_limits_and_round_trips() {
        let empty = render_examples(&[], 5, "A", "B");
        assert_eq!(empty, format!("{TABLE_HEADER}\n"));
        assert!(parse_examples(&empty).unwrap().is_empty());

        let refs = ["\"Let me surprise you.\"", "Give me a kiss.", "tab\there"];
        let src = ["Lass mich dich überraschen.", "Gib mir einen Kuss.", "x"];
        let a = refs;
        let b = [
            "'I am surprised at you.'",
            "I should like to make a point.",
            "q",
        ];
        let recs = mine_divergence(&src, &refs, &a, &b, &MinerParams::default()).unwrap();
        assert_eq!(recs.len(), 3);
        let text = render_examples(&recs, 2, "a", "b");
        assert_eq!(parse_examples(&text).unwrap(), recs[..2]);
        assert!(!text.contains("surprised"));
        let full = render_examples(&recs, 10, "desv-joint", "desv-disjoint");
        assert!(full.contains("desv-joint\t\"Let me surprise you.\"\t100\n"));
        assert!(full.contains("desv-disjoint\t'I am surprised at you.'\t43.1\n"));
        assert_eq!(parse_examples(&full).unwrap(), recs);
    }
}
