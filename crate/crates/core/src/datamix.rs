//! Deterministic assembly of mixed training and validation sets.
//!
//! Each distinct bitext is shuffled once with a seeded Fisher–Yates pass.
//! Validation requests take lines from the head of that permutation and
//! training requests take the lines after them, so the two never share a
//! line pair. The concatenated training set is shuffled again; validation
//! keeps component order.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checksum::sha256_file;
use crate::corpus::{read_lines, split_byte_lines, write_lines, CorpusError};

/// Stream used for the final shuffle of the concatenated training set.
const CONCAT_STREAM: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum MixError {
    #[error("{src} has {src_lines} lines but {trg} has {trg_lines}")]
    Alignment {
        src: String,
        trg: String,
        src_lines: usize,
        trg_lines: usize,
    },
    #[error("{src}: requested {requested} lines but only {available} are available")]
    Quota {
        src: String,
        requested: usize,
        available: usize,
    },
    #[error("invalid mix manifest: {0}")]
    Manifest(String),
    #[error("refusing to overwrite existing {0} (pass --overwrite)")]
    Exists(PathBuf),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// Take lines from a seeded permutation of each bitext.
    #[default]
    Shuffled,
    /// Take lines in file order.
    Head,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitextPaths {
    pub src: PathBuf,
    pub trg: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixComponent {
    #[serde(flatten)]
    pub paths: BitextPaths,
    pub lines: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixManifest {
    pub components: Vec<MixComponent>,
    #[serde(default)]
    pub validation: Vec<MixComponent>,
    pub seed: u64,
    #[serde(default)]
    pub dedup: bool,
    #[serde(default)]
    pub selection: Selection,
}

impl MixManifest {
    /// Loads a manifest; relative bitext paths are resolved against the
    /// manifest's directory.
    pub fn load(path: &Path) -> Result<Self, MixError> {
        let mut m: MixManifest = serde_json::from_str(&fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for c in m.components.iter_mut().chain(m.validation.iter_mut()) {
            c.paths.src = base.join(&c.paths.src);
            c.paths.trg = base.join(&c.paths.trg);
        }
        Ok(m)
    }
}

/// A bitext request against an in-memory list of bitexts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Request {
    pub bitext: usize,
    pub lines: usize,
}

/// Selected `(bitext, line index)` pairs, in output order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MixPlan {
    pub train: Vec<(usize, usize)>,
    pub valid: Vec<(usize, usize)>,
}

/// Uniform draw from `0..n` (Lemire's multiply-and-reject).
fn below(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    debug_assert!(n > 0);
    let mut m = rng.next_u64() as u128 * n as u128;
    if (m as u64) < n {
        let threshold = n.wrapping_neg() % n;
        while (m as u64) < threshold {
            m = rng.next_u64() as u128 * n as u128;
        }
    }
    (m >> 64) as u64
}

/// Seeded Fisher–Yates shuffle. The same `(seed, stream)` always yields the
/// same permutation.
pub fn shuffle<T>(items: &mut [T], seed: u64, stream: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    for i in (1..items.len()).rev() {
        let j = below(&mut rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Plans a mix over bitexts given as `(name, source lines)`. Bitext `i`
/// is shuffled with stream `i`.
pub fn plan_mix<S: AsRef<str>>(
    sources: &[(&str, &[S])],
    components: &[Request],
    validation: &[Request],
    seed: u64,
    dedup: bool,
    selection: Selection,
) -> Result<MixPlan, MixError> {
    let quota = |bitext: usize, requested: usize, available: usize| MixError::Quota {
        src: sources[bitext].0.to_owned(),
        requested,
        available,
    };
    for r in components.iter().chain(validation) {
        if r.bitext >= sources.len() {
            return Err(MixError::Manifest(format!("unknown bitext {}", r.bitext)));
        }
    }
    let order: Vec<Vec<usize>> = sources
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut idx: Vec<usize> = (0..s.1.len()).collect();
            if selection == Selection::Shuffled {
                shuffle(&mut idx, seed, i as u64);
            }
            idx
        })
        .collect();
    let mut cursor = vec![0usize; sources.len()];

    let mut plan = MixPlan::default();
    for r in validation {
        let (b, n) = (r.bitext, r.lines);
        let available = order[b].len() - cursor[b];
        if n > available {
            return Err(quota(b, n, available));
        }
        plan.valid
            .extend(order[b][cursor[b]..cursor[b] + n].iter().map(|&l| (b, l)));
        cursor[b] += n;
    }

    let held_out: HashSet<&str> = if dedup {
        plan.valid
            .iter()
            .map(|&(b, l)| sources[b].1[l].as_ref())
            .collect()
    } else {
        HashSet::new()
    };
    for r in components {
        let (b, n) = (r.bitext, r.lines);
        let mut taken = 0;
        while taken < n {
            let Some(&l) = order[b].get(cursor[b]) else {
                return Err(quota(b, n, taken));
            };
            cursor[b] += 1;
            if !held_out.contains(sources[b].1[l].as_ref()) {
                plan.train.push((b, l));
                taken += 1;
            }
        }
    }
    shuffle(&mut plan.train, seed, CONCAT_STREAM);
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedInput {
    pub src: PathBuf,
    pub trg: PathBuf,
    pub lines: usize,
    pub src_sha256: String,
    pub trg_sha256: String,
}

/// The manifest copy written next to the mix outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedMix {
    pub manifest: MixManifest,
    pub inputs: Vec<ResolvedInput>,
    pub train_pairs: usize,
    pub valid_pairs: usize,
    /// Output file name -> SHA-256.
    pub outputs: BTreeMap<String, String>,
}

pub const MIX_OUTPUTS: [&str; 4] = ["train.src", "train.trg", "valid.src", "valid.trg"];
pub const RESOLVED_MANIFEST: &str = "manifest.resolved.json";

/// Reads both sides of a bitext, checking alignment.
pub fn load_bitext(paths: &BitextPaths) -> Result<(Vec<String>, Vec<String>), MixError> {
    let (src, trg) = rayon::join(|| read_lines(&paths.src), || read_lines(&paths.trg));
    let (src, trg) = (src?, trg?);
    if src.len() != trg.len() {
        return Err(MixError::Alignment {
            src: paths.src.display().to_string(),
            trg: paths.trg.display().to_string(),
            src_lines: src.len(),
            trg_lines: trg.len(),
        });
    }
    Ok((src, trg))
}

/// Fails if any of `names` already exists in `dir` and `overwrite` is off.
pub fn ensure_writable(dir: &Path, names: &[&str], overwrite: bool) -> Result<(), MixError> {
    if !overwrite {
        for n in names {
            let p = dir.join(n);
            if p.exists() {
                return Err(MixError::Exists(p));
            }
        }
    }
    Ok(())
}

/// Runs a mix manifest and writes `train.{src,trg}`, `valid.{src,trg}` and
/// `manifest.resolved.json` into `out_dir`.
pub fn mix(
    manifest: &MixManifest,
    out_dir: &Path,
    overwrite: bool,
) -> Result<ResolvedMix, MixError> {
    if manifest.components.is_empty() {
        return Err(MixError::Manifest("no components".into()));
    }
    let mut all_names: Vec<&str> = MIX_OUTPUTS.to_vec();
    all_names.push(RESOLVED_MANIFEST);
    ensure_writable(out_dir, &all_names, overwrite)?;

    let mut ids: HashMap<&BitextPaths, usize> = HashMap::new();
    let mut distinct: Vec<&BitextPaths> = Vec::new();
    for c in manifest.validation.iter().chain(&manifest.components) {
        ids.entry(&c.paths).or_insert_with(|| {
            distinct.push(&c.paths);
            distinct.len() - 1
        });
    }
    // validation first so ids follow the order in which files are consumed
    let bitexts: Vec<(Vec<String>, Vec<String>)> = distinct
        .par_iter()
        .map(|p| load_bitext(p))
        .collect::<Result<_, _>>()?;

    let request = |c: &MixComponent| Request {
        bitext: ids[&c.paths],
        lines: c.lines,
    };
    let names: Vec<String> = distinct
        .iter()
        .map(|p| p.src.display().to_string())
        .collect();
    let sources: Vec<(&str, &[String])> = names
        .iter()
        .zip(&bitexts)
        .map(|(n, b)| (n.as_str(), b.0.as_slice()))
        .collect();
    let plan = plan_mix(
        &sources,
        &manifest.components.iter().map(request).collect::<Vec<_>>(),
        &manifest.validation.iter().map(request).collect::<Vec<_>>(),
        manifest.seed,
        manifest.dedup,
        manifest.selection,
    )?;

    fs::create_dir_all(out_dir)?;
    let pick = |sel: &[(usize, usize)], side: usize| -> Vec<&str> {
        sel.iter()
            .map(|&(b, l)| {
                let (s, t) = &bitexts[b];
                if side == 0 {
                    s[l].as_str()
                } else {
                    t[l].as_str()
                }
            })
            .collect()
    };
    let selections = [
        (MIX_OUTPUTS[0], pick(&plan.train, 0)),
        (MIX_OUTPUTS[1], pick(&plan.train, 1)),
        (MIX_OUTPUTS[2], pick(&plan.valid, 0)),
        (MIX_OUTPUTS[3], pick(&plan.valid, 1)),
    ];
    let mut outputs = BTreeMap::new();
    for (name, lines) in &selections {
        let path = out_dir.join(name);
        write_lines(&path, lines)?;
        outputs.insert((*name).to_owned(), sha256_file(&path)?);
    }

    let inputs = distinct
        .iter()
        .zip(&bitexts)
        .map(|(p, b)| {
            Ok(ResolvedInput {
                src: p.src.clone(),
                trg: p.trg.clone(),
                lines: b.0.len(),
                src_sha256: sha256_file(&p.src)?,
                trg_sha256: sha256_file(&p.trg)?,
            })
        })
        .collect::<Result<Vec<_>, std::io::Error>>()?;
    let resolved = ResolvedMix {
        manifest: manifest.clone(),
        inputs,
        train_pairs: plan.train.len(),
        valid_pairs: plan.valid.len(),
        outputs,
    };
    let mut json = serde_json::to_string_pretty(&resolved)?;
    json.push('\n');
    fs::write(out_dir.join(RESOLVED_MANIFEST), json)?;
    log::info!(
        "mixed {} training and {} validation pairs into {}",
        resolved.train_pairs,
        resolved.valid_pairs,
        out_dir.display()
    );
    Ok(resolved)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Src,
    Trg,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EncodingIssue {
    pub side: Side,
    pub line: usize,
    /// Offset of the first invalid byte within the file.
    pub byte_offset: usize,
}

/// Diagnostics for a pair of parallel files. Problems are collected rather
/// than raised; only I/O failures are errors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParallelDiagnostics {
    pub src_lines: usize,
    pub trg_lines: usize,
    pub aligned: bool,
    /// `(side, line)` of empty lines, 1-based; at most [`MAX_LISTED`].
    pub empty_lines: Vec<(Side, usize)>,
    pub empty_line_count: usize,
    pub encoding_issues: Vec<EncodingIssue>,
}

pub const MAX_LISTED: usize = 100;

impl ParallelDiagnostics {
    pub fn is_ok(&self) -> bool {
        self.aligned && self.encoding_issues.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        if self.aligned {
            out.push_str(&format!("ok: {} aligned lines\n", self.src_lines));
        } else {
            out.push_str(&format!(
                "alignment error: {} source lines vs {} target lines\n",
                self.src_lines, self.trg_lines
            ));
        }
        for e in &self.encoding_issues {
            out.push_str(&format!(
                "encoding error: {:?} line {} invalid UTF-8 at byte offset {}\n",
                e.side, e.line, e.byte_offset
            ));
        }
        if self.empty_line_count > 0 {
            out.push_str(&format!("warning: {} empty lines\n", self.empty_line_count));
        }
        out
    }
}

pub fn check_parallel_bytes(src: &[u8], trg: &[u8]) -> ParallelDiagnostics {
    let mut empty_lines = Vec::new();
    let mut empty_line_count = 0;
    let mut encoding_issues = Vec::new();
    let mut scan = |bytes: &[u8], side: Side| -> usize {
        let lines = split_byte_lines(bytes);
        let mut offset = 0;
        for (i, l) in lines.iter().enumerate() {
            if l.is_empty() {
                empty_line_count += 1;
                if empty_lines.len() < MAX_LISTED {
                    empty_lines.push((side, i + 1));
                }
            }
            if let Err(e) = std::str::from_utf8(l) {
                if encoding_issues.len() < MAX_LISTED {
                    encoding_issues.push(EncodingIssue {
                        side,
                        line: i + 1,
                        byte_offset: offset + e.valid_up_to(),
                    });
                }
            }
            offset += l.len() + 1;
        }
        lines.len()
    };
    let src_lines = scan(src, Side::Src);
    let trg_lines = scan(trg, Side::Trg);
    ParallelDiagnostics {
        src_lines,
        trg_lines,
        aligned: src_lines == trg_lines,
        empty_lines,
        empty_line_count,
        encoding_issues,
    }
}

pub fn check_parallel(paths: &BitextPaths) -> Result<ParallelDiagnostics, MixError> {
    Ok(check_parallel_bytes(
        &fs::read(&paths.src)?,
        &fs::read(&paths.trg)?,
    ))
}
