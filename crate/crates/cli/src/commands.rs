use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use vocab_lab::bpe::{encode_corpus, BpeModel, BpeTrainer, Normalization};
use vocab_lab::corpus::{read_lines, write_lines, TokenizedCorpus};
use vocab_lab::datamix::{self, BitextPaths, MixError, MixManifest, MIX_OUTPUTS};
use vocab_lab::metrics::{
    aggregate_runs, render_plot_tsv, render_svg, render_table, score, BleuParams, BleuTokenizer,
    ChrfParams, Metric, ScoreReport,
};
use vocab_lab::miner::{
    mine_divergence, records_tsv, render_examples, MinerParams, DEFAULT_THRESHOLD,
};
use vocab_lab::overlap::{complementary_size, compute_overlap, compute_triple_overlap};
use vocab_lab::pipeline::{
    comp_size_experiment, run_experiment, ExperimentManifest, RunOptions, Stage,
};
use vocab_lab::prefix::{apply_prefix, strip_prefix, PrefixRule};
use vocab_lab::vocab::{extract_vocab, parse_compat, VocabFormat, Vocabulary};

use crate::{at, guard_outputs, Failure, Global};

type Result<T = ()> = std::result::Result<T, Failure>;

fn write_out(path: &Path, data: impl AsRef<[u8]>) -> Result {
    fs::write(path, data)
        .map_err(|e| Failure::new(Stage::Output, format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Reads a canonical vocabulary, or a compat (`.yml`) one by token set;
/// compat files carry no counts, so every token is given a count of one.
fn read_vocab(path: &Path) -> Result<Vocabulary> {
    let compat = matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("yml" | "yaml")
    );
    let res = if compat {
        fs::read_to_string(path)
            .map_err(|e| e.to_string())
            .and_then(|t| parse_compat(&t).map_err(|e| e.to_string()))
            .and_then(|items| {
                Vocabulary::from_counts(items.into_iter().map(|(t, _)| (t, 1)))
                    .map_err(|e| e.to_string())
            })
    } else {
        Vocabulary::read(path).map_err(|e| e.to_string())
    };
    res.map_err(|e| Failure::new(Stage::Input, format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<Vec<String>> {
    read_lines(path).map_err(at(Stage::Input))
}

fn read_stream(path: &Path) -> Result<TokenizedCorpus> {
    TokenizedCorpus::read("", path).map_err(at(Stage::Input))
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormalizationArg {
    None,
    Nfkc,
}

#[derive(Debug, Args)]
pub struct TrainBpe {
    /// Training text, one sentence per line; repeat to concatenate files.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    vocab_size: usize,
    /// Encode characters outside the vocabulary as UTF-8 byte pieces.
    #[arg(long)]
    byte_fallback: bool,
    #[arg(long, value_enum, default_value = "none")]
    normalization: NormalizationArg,
    #[arg(long)]
    model_out: PathBuf,
}

impl TrainBpe {
    pub fn run(&self, g: &Global) -> Result {
        guard_outputs([&self.model_out], g.overwrite)?;
        let mut lines = Vec::new();
        for p in &self.input {
            lines.extend(read_text(p)?);
        }
        let norm = match self.normalization {
            NormalizationArg::None => Normalization::None,
            NormalizationArg::Nfkc => Normalization::Nfkc,
        };
        let model = BpeTrainer::new(self.vocab_size, self.byte_fallback)
            .with_normalization(norm)
            .train(&lines)
            .map_err(at(Stage::Train))?;
        log::info!(
            "trained {} pieces, {} merges",
            model.len(),
            model.merges().len()
        );
        write_out(&self.model_out, model.to_text())
    }
}

fn load_model(path: &Path) -> Result<BpeModel> {
    BpeModel::load(path).map_err(|e| Failure::new(Stage::Input, format!("{}: {e}", path.display())))
}

#[derive(Debug, Args)]
pub struct Encode {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

impl Encode {
    pub fn run(&self, g: &Global) -> Result {
        guard_outputs([&self.output], g.overwrite)?;
        let model = load_model(&self.model)?;
        let lines = read_text(&self.input)?;
        let corpus = encode_corpus(&model, &lines, "");
        write_out(&self.output, corpus.to_token_stream())
    }
}

#[derive(Debug, Args)]
pub struct Decode {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

impl Decode {
    pub fn run(&self, g: &Global) -> Result {
        guard_outputs([&self.output], g.overwrite)?;
        let model = load_model(&self.model)?;
        let corpus = read_stream(&self.input)?;
        let lines = corpus
            .lines
            .iter()
            .enumerate()
            .map(|(i, toks)| {
                model
                    .decode(toks)
                    .map_err(|e| Failure::new(Stage::Encode, format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        write_lines(&self.output, &lines).map_err(at(Stage::Output))
    }
}

#[derive(Debug, Args)]
pub struct PrefixCmd {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    prefix: String,
    /// Remove the prefix instead of adding it.
    #[arg(long)]
    strip: bool,
    /// Token left untouched; may be repeated.
    #[arg(long)]
    exempt: Vec<String>,
    /// Defaults to standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl PrefixCmd {
    pub fn run(&self, g: &Global) -> Result {
        guard_outputs(&self.output, g.overwrite)?;
        let rule = PrefixRule::new(self.prefix.clone())
            .map_err(at(Stage::Config))?
            .with_exempt(self.exempt.iter().cloned());
        let corpus = read_stream(&self.input)?;
        let out = if self.strip {
            strip_prefix(&corpus, &rule)
        } else {
            apply_prefix(&corpus, &rule)
        }
        .map_err(at(Stage::Encode))?;
        match &self.output {
            Some(p) => write_out(p, out.to_token_stream()),
            None => {
                print!("{}", out.to_token_stream());
                Ok(())
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct ExtractVocab {
    /// Token stream; repeat to extract a joint vocabulary.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Write the YAML-compatible `"token": id` format.
    #[arg(long)]
    compat: bool,
}

impl ExtractVocab {
    pub fn run(&self, g: &Global) -> Result {
        guard_outputs([&self.out], g.overwrite)?;
        let corpora = self
            .input
            .iter()
            .map(|p| read_stream(p))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&TokenizedCorpus> = corpora.iter().collect();
        let vocab = extract_vocab(&refs).map_err(at(Stage::Vocab))?;
        let fmt = if self.compat {
            VocabFormat::Compat
        } else {
            VocabFormat::Canonical
        };
        log::info!("{} entries", vocab.len());
        write_out(&self.out, vocab.render(fmt))
    }
}

#[derive(Debug, Args)]
pub struct OverlapCmd {
    #[arg(long)]
    vocab_a: PathBuf,
    #[arg(long)]
    vocab_b: PathBuf,
    /// Vocabulary extracted from both corpora; checked against the union.
    #[arg(long)]
    vocab_joint: Option<PathBuf>,
    /// JSON report.
    #[arg(long)]
    report: PathBuf,
    /// Optional TSV dump of the overlapping tokens.
    #[arg(long)]
    tokens: Option<PathBuf>,
}

impl OverlapCmd {
    pub fn run(&self, g: &Global) -> Result {
        guard_outputs(
            std::iter::once(&self.report).chain(&self.tokens),
            g.overwrite,
        )?;
        let a = read_vocab(&self.vocab_a)?;
        let b = read_vocab(&self.vocab_b)?;
        let joint = self.vocab_joint.as_deref().map(read_vocab).transpose()?;
        let report = compute_overlap(&a, &b, joint.as_ref()).map_err(at(Stage::Overlap))?;
        write_out(&self.report, to_json(&report))?;
        if let Some(p) = &self.tokens {
            write_out(p, report.tokens_tsv())?;
        }
        println!("{}", report.summary());
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct Overlap3 {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    aux1: PathBuf,
    #[arg(long)]
    aux2: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Optional TSV dump of the overlap of overlaps.
    #[arg(long)]
    tokens: Option<PathBuf>,
}

impl Overlap3 {
    pub fn run(&self, g: &Global) -> Result {
        guard_outputs(self.report.iter().chain(&self.tokens), g.overwrite)?;
        let t = compute_triple_overlap(
            &read_vocab(&self.base)?,
            &read_vocab(&self.aux1)?,
            &read_vocab(&self.aux2)?,
        );
        if let Some(p) = &self.report {
            write_out(p, to_json(&t))?;
        }
        if let Some(p) = &self.tokens {
            write_out(p, t.oo_tsv())?;
        }
        println!("{}", t.summary());
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct CompSize {
    /// Joint vocabulary of base and auxiliary.
    #[arg(long)]
    joint: PathBuf,
    /// Base (source language) vocabulary.
    #[arg(long)]
    base: PathBuf,
}

impl CompSize {
    pub fn run(&self, _: &Global) -> Result {
        let joint = read_vocab(&self.joint)?.len();
        let base = read_vocab(&self.base)?.len();
        let target = complementary_size(joint, base).map_err(at(Stage::Config))?;
        println!("{target}");
        log::info!("{joint} - {base} = {target}");
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct Mix {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

impl Mix {
    pub fn run(&self, g: &Global) -> Result {
        let mut m = MixManifest::load(&self.manifest).map_err(|e| {
            Failure::new(Stage::Config, format!("{}: {e}", self.manifest.display()))
        })?;
        if let Some(s) = g.seed {
            m.seed = s;
        }
        let resolved = datamix::mix(&m, &self.out_dir, g.overwrite).map_err(|e| {
            let stage = match &e {
                MixError::Exists(_) | MixError::Manifest(_) | MixError::Json(_) => Stage::Config,
                MixError::Corpus(_) | MixError::Alignment { .. } => Stage::Input,
                MixError::Io(_) => Stage::Output,
                MixError::Quota { .. } => Stage::Mix,
            };
            Failure::new(stage, e)
        })?;
        println!(
            "{} training and {} validation pairs written to {} ({})",
            resolved.train_pairs,
            resolved.valid_pairs,
            self.out_dir.display(),
            MIX_OUTPUTS.join(", ")
        );
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct CheckParallel {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    trg: PathBuf,
}

impl CheckParallel {
    pub fn run(&self, _: &Global) -> Result {
        let diag = datamix::check_parallel(&BitextPaths {
            src: self.src.clone(),
            trg: self.trg.clone(),
        })
        .map_err(at(Stage::Input))?;
        print!("{}", diag.render());
        if diag.is_ok() {
            Ok(())
        } else {
            Err(Failure::new(Stage::Input, "bitext is not usable"))
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Bleu,
    Chrf,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TokenizeArg {
    #[value(name = "13a")]
    Tok13a,
    None,
}

#[derive(Debug, Args)]
pub struct Score {
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    metric: MetricArg,
    /// BLEU tokenizer.
    #[arg(long, value_enum, default_value = "13a")]
    tokenize: TokenizeArg,
    #[arg(long)]
    lowercase: bool,
    /// Sentence-level chrF, one score per line.
    #[arg(long)]
    per_sentence: Option<PathBuf>,
    #[arg(long)]
    report: PathBuf,
    /// Row label used by `report`; defaults to the hypothesis file stem.
    #[arg(long)]
    label: Option<String>,
}

impl Score {
    pub fn run(&self, g: &Global) -> Result {
        guard_outputs(
            std::iter::once(&self.report).chain(&self.per_sentence),
            g.overwrite,
        )?;
        let hyps = read_text(&self.hyp)?;
        let refs = read_text(&self.reference)?;
        let metric = match self.metric {
            MetricArg::Bleu => Metric::Bleu,
            MetricArg::Chrf => Metric::Chrf,
            MetricArg::Both => Metric::Both,
        };
        let bp = BleuParams {
            tokenizer: match self.tokenize {
                TokenizeArg::Tok13a => BleuTokenizer::Tok13a,
                TokenizeArg::None => BleuTokenizer::None,
            },
            lowercase: self.lowercase,
            ..Default::default()
        };
        let cp = ChrfParams {
            lowercase: self.lowercase,
            ..Default::default()
        };
        let label = self.label.clone().unwrap_or_else(|| {
            self.hyp
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        });
        let mut report = score(&label, &hyps, &refs, metric, &bp, &cp).map_err(at(Stage::Input))?;
        if let Some(p) = &self.per_sentence {
            if report.sentence_chrf.is_empty() {
                let cp_only = score(&label, &hyps, &refs, Metric::Chrf, &bp, &cp)
                    .map_err(at(Stage::Input))?;
                report.sentence_chrf = cp_only.sentence_chrf;
            }
            let body: String = report
                .sentence_chrf
                .iter()
                .map(|s| format!("{s}\n"))
                .collect();
            write_out(p, body)?;
        }
        write_out(&self.report, report.to_json())?;
        let show = |v: Option<f64>| v.map_or("-".to_owned(), |x| format!("{x:.2}"));
        println!(
            "{label}\tBLEU {}\tchrF {}\t{}",
            show(report.corpus_bleu),
            show(report.corpus_chrf),
            report.signature
        );
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct Report {
    /// Score reports; runs sharing a label form one row.
    #[arg(long, required = true, num_args = 1..)]
    scores: Vec<PathBuf>,
    /// Results table (TSV).
    #[arg(long)]
    out: PathBuf,
    /// Plot-ready TSV: metric, model, mean, sd.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Bar chart with deviation whiskers.
    #[arg(long)]
    svg: Option<PathBuf>,
}

impl Report {
    pub fn run(&self, g: &Global) -> Result {
        guard_outputs(
            std::iter::once(&self.out)
                .chain(&self.plot)
                .chain(&self.svg),
            g.overwrite,
        )?;
        let mut groups: Vec<(String, Vec<ScoreReport>)> = Vec::new();
        for p in &self.scores {
            let r = ScoreReport::load(p)
                .map_err(|e| Failure::new(Stage::Input, format!("{}: {e}", p.display())))?;
            match groups.iter_mut().find(|(l, _)| *l == r.label) {
                Some((_, v)) => v.push(r),
                None => groups.push((r.label.clone(), vec![r])),
            }
        }
        let rows = groups
            .iter()
            .map(|(_, v)| aggregate_runs(v).map_err(at(Stage::Input)))
            .collect::<Result<Vec<_>>>()?;
        let table = render_table(&rows);
        write_out(&self.out, &table)?;
        if let Some(p) = &self.plot {
            write_out(p, render_plot_tsv(&rows))?;
        }
        if let Some(p) = &self.svg {
            write_out(p, render_svg(&rows))?;
        }
        print!("{table}");
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct Mine {
    #[arg(long)]
    src: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    hyp_a: PathBuf,
    #[arg(long)]
    hyp_b: PathBuf,
    /// Minimum chrF advantage of A over B.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Also report lines where B beats A by the margin.
    #[arg(long)]
    symmetric: bool,
    /// TSV of every selected line.
    #[arg(long)]
    out: PathBuf,
    /// Rendered example table.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Blocks in the rendered table.
    #[arg(long, default_value_t = 10)]
    limit: usize,
    #[arg(long, default_value = "A")]
    label_a: String,
    #[arg(long, default_value = "B")]
    label_b: String,
}

impl Mine {
    pub fn run(&self, g: &Global) -> Result {
        guard_outputs(std::iter::once(&self.out).chain(&self.table), g.overwrite)?;
        let src = read_text(&self.src)?;
        let refs = read_text(&self.reference)?;
        let a = read_text(&self.hyp_a)?;
        let b = read_text(&self.hyp_b)?;
        let params = MinerParams {
            threshold: self.threshold,
            symmetric: self.symmetric,
            ..Default::default()
        };
        let recs = mine_divergence(&src, &refs, &a, &b, &params).map_err(at(Stage::Input))?;
        write_out(&self.out, records_tsv(&recs))?;
        let table = render_examples(&recs, self.limit, &self.label_a, &self.label_b);
        match &self.table {
            Some(p) => write_out(p, table)?,
            None => print!("{table}"),
        }
        eprintln!("{} of {} lines selected", recs.len(), src.len());
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct RunCmd {
    #[arg(long)]
    manifest: PathBuf,
}

impl RunCmd {
    pub fn run(&self, g: &Global, comp_size: bool) -> Result {
        let mut m = ExperimentManifest::load(&self.manifest)?;
        if let Some(s) = g.seed {
            m.seed = s;
        }
        let opts = RunOptions {
            overwrite: g.overwrite,
            workers: g.workers(),
        };
        if comp_size {
            let report = comp_size_experiment(&m, &opts)?;
            for e in &report.entries {
                println!(
                    "{}\tjoint {}\tbase {}\ttarget {}\tachieved {}",
                    e.auxiliary, e.joint_size, e.base_size, e.target, e.achieved
                );
            }
        } else {
            let summary = run_experiment(&m, &opts)?;
            for o in &summary.overlaps {
                println!("{}", o.summary());
            }
            for t in &summary.triples {
                println!("{}", t.summary());
            }
            println!(
                "{} artifacts in {}",
                summary.artifacts.len(),
                summary.output_dir.display()
            );
        }
        Ok(())
    }
}
