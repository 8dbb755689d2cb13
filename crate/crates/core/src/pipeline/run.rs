use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::{BoxError, ExperimentManifest, Order, PipelineError, Stage, LAYOUT, RESOLVED_MANIFEST};
use crate::bpe::{encode_corpus, BpeModel, BpeTrainer, MODEL_FORMAT_NAME, MODEL_FORMAT_VERSION};
use crate::checksum::{sha256_bytes, sha256_file};
use crate::corpus::TokenizedCorpus;
use crate::datamix::{load_bitext, plan_mix, BitextPaths, Request};
use crate::overlap::{compute_overlap, compute_triple_overlap, OverlapReport, TripleOverlapReport};
use crate::prefix::{apply_prefix, PrefixRule};
use crate::vocab::{extract_vocab, VocabFormat, Vocabulary};

/// Tracks what a run has written so far.
pub(super) struct Artifacts {
    root: PathBuf,
    written: Vec<PathBuf>,
    checksums: BTreeMap<String, String>,
}

impl Artifacts {
    pub(super) fn new(root: PathBuf) -> Self {
        Self {
            root,
            written: Vec::new(),
            checksums: BTreeMap::new(),
        }
    }

    pub(super) fn fail(&self, stage: Stage, e: impl Into<BoxError>) -> PipelineError {
        PipelineError {
            stage,
            completed: self.written.clone(),
            source: e.into(),
        }
    }

    pub(super) fn write(&mut self, rel: &str, data: impl AsRef<[u8]>) -> Result<(), PipelineError> {
        let path = self.root.join(rel);
        let data = data.as_ref();
        let res = path
            .parent()
            .map_or(Ok(()), fs::create_dir_all)
            .and_then(|_| fs::write(&path, data));
        if let Err(e) = res {
            return Err(self.fail(Stage::Output, format!("{}: {e}", path.display())));
        }
        log::debug!("wrote {}", path.display());
        self.checksums.insert(rel.to_owned(), sha256_bytes(data));
        self.written.push(path);
        Ok(())
    }

    pub(super) fn write_json<T: Serialize>(
        &mut self,
        rel: &str,
        value: &T,
    ) -> Result<(), PipelineError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| self.fail(Stage::Output, e))?;
        s.push('\n');
        self.write(rel, s)
    }
}

/// Refuses to touch an output directory that already holds any of `names`
/// unless `overwrite` is set, in which case those entries are removed.
pub(super) fn prepare_output(
    root: &Path,
    names: &[&str],
    overwrite: bool,
) -> Result<(), PipelineError> {
    for n in names {
        let p = root.join(n);
        if !p.exists() {
            continue;
        }
        if !overwrite {
            return Err(PipelineError::new(
                Stage::Config,
                format!(
                    "refusing to overwrite existing {} (pass --overwrite)",
                    p.display()
                ),
            ));
        }
        let res = if p.is_dir() {
            fs::remove_dir_all(&p)
        } else {
            fs::remove_file(&p)
        };
        res.map_err(|e| PipelineError::new(Stage::Output, format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

pub(super) fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, PipelineError> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| PipelineError::new(Stage::Config, e))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
    /// Vocabulary file (relative path) -> entry count.
    pub vocab_sizes: BTreeMap<String, usize>,
    pub overlaps: Vec<OverlapReport>,
    pub triples: Vec<TripleOverlapReport>,
}

#[derive(Debug, Serialize)]
struct ResolvedCorpus {
    language: String,
    src: PathBuf,
    trg: PathBuf,
    lines: usize,
    src_sha256: String,
    trg_sha256: String,
}

#[derive(Debug, Serialize)]
struct ResolvedExperiment<'a> {
    toolkit_version: &'static str,
    model_format: String,
    manifest: ExperimentManifest,
    languages: Vec<&'a str>,
    prefixes: BTreeMap<&'a str, String>,
    tokenizer_targets: BTreeMap<String, usize>,
    train_pairs: usize,
    valid_pairs: usize,
    inputs: Vec<ResolvedCorpus>,
    vocab_sizes: &'a BTreeMap<String, usize>,
    artifacts: BTreeMap<String, String>,
}

pub fn run_experiment(
    manifest: &ExperimentManifest,
    opts: &super::RunOptions,
) -> Result<RunSummary, PipelineError> {
    with_workers(opts.workers, || run_inner(manifest, opts.overwrite))?
}

fn pick<'a>(side: &'a [String], idx: &[usize]) -> Vec<&'a str> {
    idx.iter().map(|&l| side[l].as_str()).collect()
}

fn head<T>(mut v: Vec<T>, cap: Option<usize>) -> Vec<T> {
    if let Some(n) = cap {
        v.truncate(n);
    }
    v
}

fn run_inner(m: &ExperimentManifest, overwrite: bool) -> Result<RunSummary, PipelineError> {
    m.validate()?;
    let root = m.output_path();
    prepare_output(&root, &LAYOUT, overwrite)?;
    let mut arts = Artifacts::new(root.clone());
    let langs = m.languages();
    let src_lang = langs[0];
    log::info!("experiment {}: {} -> {}", m.name, langs.join("+"), m.target);

    // inputs
    let paths: Vec<BitextPaths> = langs
        .iter()
        .map(|l| BitextPaths {
            src: m.resolve(&m.corpora[*l].src),
            trg: m.resolve(&m.corpora[*l].trg),
        })
        .collect();
    let bitexts: Vec<(Vec<String>, Vec<String>)> = paths
        .par_iter()
        .map(load_bitext)
        .collect::<Result<_, _>>()
        .map_err(|e| arts.fail(Stage::Input, e))?;

    // selection
    let names: Vec<String> = paths.iter().map(|p| p.src.display().to_string()).collect();
    let sources: Vec<(&str, &[String])> = names
        .iter()
        .zip(&bitexts)
        .map(|(n, b)| (n.as_str(), b.0.as_slice()))
        .collect();
    let requests = |quota: &BTreeMap<String, usize>| -> Vec<Request> {
        langs
            .iter()
            .enumerate()
            .filter_map(|(i, l)| {
                let lines = quota.get(*l).copied().unwrap_or(0);
                (lines > 0).then_some(Request { bitext: i, lines })
            })
            .collect()
    };
    let plan = plan_mix(
        &sources,
        &requests(&m.mix.train_lines),
        &requests(&m.mix.valid_lines),
        m.seed,
        m.mix.dedup,
        m.mix.selection,
    )
    .map_err(|e| arts.fail(Stage::Mix, e))?;
    let by_lang = |sel: &[(usize, usize)], i: usize| -> Vec<usize> {
        sel.iter().filter(|p| p.0 == i).map(|p| p.1).collect()
    };
    let train_idx: Vec<Vec<usize>> = (0..langs.len()).map(|i| by_lang(&plan.train, i)).collect();
    let valid_idx: Vec<Vec<usize>> = (0..langs.len()).map(|i| by_lang(&plan.valid, i)).collect();
    let pick_pairs = |sel: &[(usize, usize)]| -> Vec<&str> {
        sel.iter().map(|&(b, l)| bitexts[b].1[l].as_str()).collect()
    };

    // tokenizers
    let mut jobs: Vec<(String, Vec<&str>, usize)> = langs
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let data = match m.order {
                Order::SubsetThenTokenize => pick(&bitexts[i].0, &train_idx[i]),
                Order::TokenizeThenSubset => bitexts[i].0.iter().map(String::as_str).collect(),
            };
            (
                format!("models/src.{l}.model"),
                head(data, m.tokenizer_lines),
                m.vocab_size_for(l),
            )
        })
        .collect();
    let trg_data = match m.order {
        Order::SubsetThenTokenize => pick_pairs(&plan.train),
        Order::TokenizeThenSubset => bitexts
            .iter()
            .flat_map(|b| b.1.iter().map(String::as_str))
            .collect(),
    };
    jobs.push((
        format!("models/trg.{}.model", m.target),
        head(trg_data, m.target_tokenizer_lines),
        m.vocab_size_for(&m.target),
    ));
    let models: Vec<BpeModel> = match &m.reuse_vocab_from {
        Some(dir) => {
            let dir = m.resolve(dir);
            jobs.iter()
                .map(|(rel, _, _)| {
                    BpeModel::load(&dir.join(rel))
                        .map_err(|e| format!("{}: {e}", dir.join(rel).display()))
                })
                .collect::<Result<_, _>>()
                .map_err(|e| arts.fail(Stage::Input, e))?
        }
        None => jobs
            .par_iter()
            .map(|(rel, data, size)| {
                BpeTrainer::new(*size, m.byte_fallback)
                    .with_normalization(m.normalization)
                    .train(data)
                    .map_err(|e| format!("{rel}: {e}"))
            })
            .collect::<Result<_, _>>()
            .map_err(|e| arts.fail(Stage::Train, e))?,
    };
    let tokenizer_targets: BTreeMap<String, usize> = jobs
        .iter()
        .zip(&models)
        .map(|((rel, _, _), model)| (rel.clone(), model.target_vocab_size()))
        .collect();
    for ((rel, _, _), model) in jobs.iter().zip(&models) {
        arts.write(rel, model.to_text())?;
    }
    let trg_model = models.last().expect("target model");

    // encoding and prefixing
    let encoded: Vec<(TokenizedCorpus, TokenizedCorpus)> = (0..langs.len())
        .into_par_iter()
        .map(|i| {
            let src = &bitexts[i].0;
            (
                encode_corpus(&models[i], &pick(src, &train_idx[i]), langs[i]),
                encode_corpus(&models[i], &pick(src, &valid_idx[i]), langs[i]),
            )
        })
        .collect();
    let mut prefixes = BTreeMap::new();
    let mut final_src: Vec<(TokenizedCorpus, TokenizedCorpus)> = Vec::with_capacity(langs.len());
    for (i, (train, valid)) in encoded.into_iter().enumerate() {
        let l = langs[i];
        arts.write(&format!("tok/{l}.train.src"), train.to_token_stream())?;
        arts.write(&format!("tok/{l}.valid.src"), valid.to_token_stream())?;
        if i == 0 || !m.disjoint {
            final_src.push((train, valid));
            continue;
        }
        let rule = PrefixRule::new(m.prefix_for(l)).map_err(|e| arts.fail(Stage::Config, e))?;
        let pt = apply_prefix(&train, &rule)
            .map_err(|e| arts.fail(Stage::Encode, format!("{l}: {e}")))?;
        let pv = apply_prefix(&valid, &rule)
            .map_err(|e| arts.fail(Stage::Encode, format!("{l}: {e}")))?;
        arts.write(&format!("tok/{l}.train.src.prefixed"), pt.to_token_stream())?;
        arts.write(&format!("tok/{l}.valid.src.prefixed"), pv.to_token_stream())?;
        prefixes.insert(l, rule.prefix().to_owned());
        final_src.push((pt, pv));
    }
    let (trg_train, trg_valid) = rayon::join(
        || encode_corpus(trg_model, &pick_pairs(&plan.train), &m.target),
        || encode_corpus(trg_model, &pick_pairs(&plan.valid), &m.target),
    );

    // merged training data, in mix order
    let merge =
        |sel: &[(usize, usize)],
         part: fn(&(TokenizedCorpus, TokenizedCorpus)) -> &TokenizedCorpus| {
            let mut cursors = vec![0usize; langs.len()];
            let lines = sel
                .iter()
                .map(|&(b, _)| {
                    let line = part(&final_src[b]).lines[cursors[b]].clone();
                    cursors[b] += 1;
                    line
                })
                .collect();
            TokenizedCorpus::new(langs.join("+"), lines)
        };
    let mix_train = merge(&plan.train, |p| &p.0);
    let mix_valid = merge(&plan.valid, |p| &p.1);
    arts.write("mix/train.src", mix_train.to_token_stream())?;
    arts.write("mix/train.trg", trg_train.to_token_stream())?;
    arts.write("mix/valid.src", mix_valid.to_token_stream())?;
    arts.write("mix/valid.trg", trg_valid.to_token_stream())?;

    // vocabularies
    let vocab_err = |arts: &Artifacts, what: &str, e: crate::vocab::VocabError| {
        arts.fail(Stage::Vocab, format!("{what}: {e}"))
    };
    let mut vocab_sizes = BTreeMap::new();
    let lang_vocabs: Vec<Vocabulary> = final_src
        .par_iter()
        .map(|(train, _)| extract_vocab(&[train]))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| vocab_err(&arts, "per-language vocabulary", e))?;
    for (l, v) in langs.iter().zip(&lang_vocabs) {
        let rel = format!("vocab/{l}.vocab");
        arts.write(&rel, v.to_canonical())?;
        vocab_sizes.insert(rel, v.len());
    }
    let (src_vocab, trg_vocab) = match &m.reuse_vocab_from {
        Some(dir) => {
            let dir = m.resolve(dir);
            let read = |name: &str| {
                Vocabulary::read(&dir.join("vocab").join(name)).map_err(|e| {
                    arts.fail(
                        Stage::Input,
                        format!("{}: {e}", dir.join("vocab").join(name).display()),
                    )
                })
            };
            (read("src.vocab")?, read("trg.vocab")?)
        }
        None => {
            let (s, t) = rayon::join(
                || extract_vocab(&[&mix_train]),
                || extract_vocab(&[&trg_train]),
            );
            (
                s.map_err(|e| vocab_err(&arts, "source vocabulary", e))?,
                t.map_err(|e| vocab_err(&arts, "target vocabulary", e))?,
            )
        }
    };
    for (name, v) in [("src", &src_vocab), ("trg", &trg_vocab)] {
        arts.write(&format!("vocab/{name}.vocab"), v.to_canonical())?;
        arts.write(
            &format!("vocab/{name}.vocab.yml"),
            v.render(VocabFormat::Compat),
        )?;
        vocab_sizes.insert(format!("vocab/{name}.vocab"), v.len());
    }

    // overlaps
    let mut overlaps = Vec::new();
    for (i, aux) in langs.iter().enumerate().skip(1) {
        let joint = extract_vocab(&[&final_src[0].0, &final_src[i].0])
            .map_err(|e| vocab_err(&arts, "joint vocabulary", e))?;
        let rel = format!("vocab/joint.{src_lang}-{aux}.vocab");
        arts.write(&rel, joint.to_canonical())?;
        vocab_sizes.insert(rel, joint.len());
        let report = compute_overlap(&lang_vocabs[0], &lang_vocabs[i], Some(&joint))
            .map_err(|e| arts.fail(Stage::Overlap, format!("{src_lang}-{aux}: {e}")))?;
        if m.disjoint && report.counts.overlap_count != 2 {
            return Err(arts.fail(
                Stage::Overlap,
                format!(
                    "{src_lang}-{aux}: disjoint vocabularies share {} tokens instead of the 2 specials",
                    report.counts.overlap_count
                ),
            ));
        }
        log::info!("{src_lang}-{aux}: {}", report.summary());
        arts.write_json(&format!("reports/overlap.{src_lang}-{aux}.json"), &report)?;
        arts.write(
            &format!("reports/overlap.{src_lang}-{aux}.tsv"),
            report.tokens_tsv(),
        )?;
        overlaps.push(report);
    }
    let mut triples = Vec::new();
    for i in 1..langs.len() {
        for j in i + 1..langs.len() {
            let t = compute_triple_overlap(&lang_vocabs[0], &lang_vocabs[i], &lang_vocabs[j]);
            log::info!("{src_lang}-{}-{}: {}", langs[i], langs[j], t.summary());
            arts.write_json(
                &format!("reports/overlap3.{src_lang}-{}-{}.json", langs[i], langs[j]),
                &t,
            )?;
            triples.push(t);
        }
    }
    let mut summary = String::from("kind\tname\tvalue\n");
    for (name, size) in &vocab_sizes {
        summary.push_str(&format!("vocab_size\t{name}\t{size}\n"));
    }
    for (aux, r) in langs.iter().skip(1).zip(&overlaps) {
        summary.push_str(&format!(
            "overlap_count\t{src_lang}-{aux}\t{}\n",
            r.counts.overlap_count
        ));
        summary.push_str(&format!(
            "overlap_pct\t{src_lang}-{aux}\t{}\n",
            r.counts.overlap_pct_display
        ));
    }
    summary.push_str(&format!("train_pairs\tmix\t{}\n", plan.train.len()));
    summary.push_str(&format!("valid_pairs\tmix\t{}\n", plan.valid.len()));
    arts.write("reports/summary.tsv", summary)?;

    // resolved manifest
    let inputs = langs
        .iter()
        .zip(&paths)
        .zip(&bitexts)
        .map(|((l, p), b)| {
            Ok(ResolvedCorpus {
                language: (*l).to_owned(),
                src: m.corpora[*l].src.clone(),
                trg: m.corpora[*l].trg.clone(),
                lines: b.0.len(),
                src_sha256: sha256_file(&p.src)?,
                trg_sha256: sha256_file(&p.trg)?,
            })
        })
        .collect::<Result<Vec<_>, std::io::Error>>()
        .map_err(|e| arts.fail(Stage::Input, e))?;
    let mut manifest = m.clone();
    manifest.output_dir = PathBuf::from(".");
    let resolved = ResolvedExperiment {
        toolkit_version: crate::VERSION,
        model_format: format!("{MODEL_FORMAT_NAME} {MODEL_FORMAT_VERSION}"),
        manifest,
        languages: langs.clone(),
        prefixes,
        tokenizer_targets,
        train_pairs: plan.train.len(),
        valid_pairs: plan.valid.len(),
        inputs,
        vocab_sizes: &vocab_sizes,
        artifacts: arts.checksums.clone(),
    };
    arts.write_json(RESOLVED_MANIFEST, &resolved)?;

    Ok(RunSummary {
        output_dir: root,
        artifacts: arts.written,
        vocab_sizes,
        overlaps,
        triples,
    })
}
