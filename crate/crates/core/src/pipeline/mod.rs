//! End-to-end experiment construction from a single manifest.
//!
//! A run tokenizes every language with its own BPE model, optionally
//! prefixes the auxiliary languages, merges the source side, extracts the
//! vocabularies, reports overlaps and writes the mixed training and
//! validation sets. The artifact directory layout is fixed:
//!
//! ```text
//! models/   src.<lang>.model, trg.<lang>.model
//! tok/      <lang>.{train,valid}.src[.prefixed]
//! vocab/    <lang>.vocab, joint.<src>-<aux>.vocab, src.vocab[.yml], trg.vocab[.yml]
//! mix/      train.src, train.trg, valid.src, valid.trg
//! reports/  overlap.<src>-<aux>.{json,tsv}, overlap3.<src>-<a>-<b>.json, summary.tsv
//! manifest.resolved.json
//! ```

mod comp_size;
mod run;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bpe::Normalization;
use crate::datamix::Selection;

pub use comp_size::{comp_size_experiment, CompSizeEntry, CompSizeReport, COMP_SIZE_REPORT};
pub use run::{run_experiment, RunSummary};

pub const DEFAULT_VOCAB_SIZE: usize = 32_000;
pub const RESOLVED_MANIFEST: &str = "manifest.resolved.json";
/// Top-level entries a run owns inside its output directory.
pub const LAYOUT: [&str; 6] = [
    "models",
    "tok",
    "vocab",
    "mix",
    "reports",
    RESOLVED_MANIFEST,
];

/// Failure classes; each maps to its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Input,
    Mix,
    Train,
    Encode,
    Vocab,
    Overlap,
    Output,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 3,
            Stage::Input => 4,
            Stage::Mix => 5,
            Stage::Train => 6,
            Stage::Encode => 7,
            Stage::Vocab => 8,
            Stage::Overlap => 9,
            Stage::Output => 10,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Input => "input",
            Stage::Mix => "mix",
            Stage::Train => "train",
            Stage::Encode => "encode",
            Stage::Vocab => "vocab",
            Stage::Overlap => "overlap",
            Stage::Output => "output",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    /// Artifacts written before the failure; they are left in place.
    pub completed: Vec<PathBuf>,
    #[source]
    pub source: BoxError,
}

impl PipelineError {
    pub(crate) fn new(stage: Stage, source: impl Into<BoxError>) -> Self {
        Self {
            stage,
            completed: Vec::new(),
            source: source.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.stage.exit_code()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Order {
    /// Tokenizers are trained on the lines the mixer selects.
    #[default]
    SubsetThenTokenize,
    /// Tokenizers are trained on the full corpora (or their heads, see the
    /// tokenizer line quotas) before the mix is taken.
    TokenizeThenSubset,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    /// Source-side file in this language.
    pub src: PathBuf,
    /// Parallel target-side file.
    pub trg: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixQuotas {
    /// Training lines per source-side language.
    pub train_lines: BTreeMap<String, usize>,
    /// Validation lines per source-side language; missing means none.
    #[serde(default)]
    pub valid_lines: BTreeMap<String, usize>,
    #[serde(default)]
    pub dedup: bool,
    #[serde(default)]
    pub selection: Selection,
}

fn default_vocab_size() -> usize {
    DEFAULT_VOCAB_SIZE
}

fn default_true() -> bool {
    true
}

fn default_name() -> String {
    "experiment".to_owned()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    #[serde(default = "default_name")]
    pub name: String,
    pub source: String,
    /// Empty for a bilingual baseline.
    #[serde(default)]
    pub auxiliaries: Vec<String>,
    pub target: String,
    /// Bitext per source-side language, each paired with the target.
    pub corpora: BTreeMap<String, CorpusSpec>,
    /// Tokenizer target size per language tag (source side and target).
    #[serde(default)]
    pub vocab_size: BTreeMap<String, usize>,
    #[serde(default = "default_vocab_size")]
    pub default_vocab_size: usize,
    #[serde(default = "default_true")]
    pub byte_fallback: bool,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub disjoint: bool,
    /// Prefix per auxiliary language; defaults to the upper-cased tag
    /// followed by `_`.
    #[serde(default)]
    pub aux_prefixes: BTreeMap<String, String>,
    pub mix: MixQuotas,
    #[serde(default)]
    pub order: Order,
    /// Caps the lines each source-side tokenizer is trained on (head).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokenizer_lines: Option<usize>,
    /// Caps the lines the target tokenizer is trained on (head of the
    /// concatenated target sides).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_tokenizer_lines: Option<usize>,
    /// Earlier artifact directory whose models and merged vocabularies are
    /// reused instead of being rebuilt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reuse_vocab_from: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentManifest {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::new(Stage::Config, e))
    }

    /// Loads a manifest; relative paths inside it are taken relative to
    /// the manifest's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::new(Stage::Config, format!("{}: {e}", path.display())))?;
        let mut m = Self::from_json(&text)?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Source-side languages, source first.
    pub fn languages(&self) -> Vec<&str> {
        std::iter::once(self.source.as_str())
            .chain(self.auxiliaries.iter().map(String::as_str))
            .collect()
    }

    pub fn vocab_size_for(&self, lang: &str) -> usize {
        self.vocab_size
            .get(lang)
            .copied()
            .unwrap_or(self.default_vocab_size)
    }

    pub fn prefix_for(&self, lang: &str) -> String {
        self.aux_prefixes
            .get(lang)
            .cloned()
            .unwrap_or_else(|| crate::prefix::default_prefix(lang))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let err = |m: String| Err(PipelineError::new(Stage::Config, m));
        let langs = self.languages();
        for (i, l) in langs.iter().enumerate() {
            if l.is_empty() || l.contains(['/', '\\', '.']) {
                return err(format!("invalid language tag {l:?}"));
            }
            if langs[..i].contains(l) {
                return err(format!("language {l} listed twice"));
            }
            if !self.corpora.contains_key(*l) {
                return err(format!("no corpus for language {l}"));
            }
            if !self.mix.train_lines.contains_key(*l) {
                return err(format!("no training quota for language {l}"));
            }
        }
        if self.target.is_empty() || self.target.contains(['/', '\\', '.']) {
            return err(format!("invalid target tag {:?}", self.target));
        }
        for l in langs.iter().copied().chain([self.target.as_str()]) {
            if self.vocab_size_for(l) == 0 {
                return err(format!("vocabulary size for {l} must be positive"));
            }
        }
        for key in self
            .mix
            .train_lines
            .keys()
            .chain(self.mix.valid_lines.keys())
            .chain(self.aux_prefixes.keys())
        {
            if !langs.contains(&key.as_str()) {
                return err(format!("quota or prefix for unknown language {key}"));
            }
        }
        if self.disjoint {
            let mut seen = Vec::new();
            for aux in &self.auxiliaries {
                let p = self.prefix_for(aux);
                crate::prefix::PrefixRule::new(p.clone())
                    .map_err(|e| PipelineError::new(Stage::Config, e))?;
                if seen
                    .iter()
                    .any(|s: &String| s.starts_with(&p) || p.starts_with(s.as_str()))
                {
                    return err(format!(
                        "prefix {p:?} is not distinguishable from another prefix"
                    ));
                }
                seen.push(p);
            }
        }
        Ok(())
    }
}

/// Options that affect how, not what, a run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub overwrite: bool,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}
