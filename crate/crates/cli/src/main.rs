//! `vocab-lab`: command-line front end.
//!
//! Exit codes: 0 on success, 2 on usage errors, otherwise the code of the
//! failing stage class (see [`Stage::exit_code`]).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use log::LevelFilter;
use thiserror::Error;
use vocab_lab::bpe::{MODEL_FORMAT_NAME, MODEL_FORMAT_VERSION};
use vocab_lab::pipeline::{PipelineError, Stage};

#[derive(Debug, Error)]
#[error("{msg}")]
pub struct Failure {
    pub stage: Stage,
    pub msg: String,
}

impl Failure {
    pub fn new(stage: Stage, msg: impl ToString) -> Self {
        Self {
            stage,
            msg: msg.to_string(),
        }
    }
}

/// Maps any displayable error into a failure of `stage`.
pub fn at<E: std::fmt::Display>(stage: Stage) -> impl Fn(E) -> Failure {
    move |e| Failure::new(stage, e)
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let mut msg = e.to_string();
        if !e.completed.is_empty() {
            msg.push_str(&format!(
                "\n{} artifacts were written before the failure:",
                e.completed.len()
            ));
            for p in &e.completed {
                msg.push_str(&format!("\n  {}", p.display()));
            }
        }
        Failure::new(e.stage, msg)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "vocab-lab",
    about = "Joint vs. disjoint vocabulary experiments for multilingual MT"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

#[derive(Debug, Args)]
pub struct Global {
    #[arg(long, global = true, value_enum, default_value = "warn")]
    log_level: LogLevel,
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "VOCAB_LAB_WORKERS", value_parser = clap::value_parser!(u16).range(1..))]
    workers: Option<u16>,
    /// Run every stage on a single thread.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Overrides the seed of mix and experiment manifests.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Replace existing outputs instead of refusing to run.
    #[arg(long, global = true)]
    pub overwrite: bool,
}

impl Global {
    pub fn workers(&self) -> Option<usize> {
        if self.deterministic {
            Some(1)
        } else {
            self.workers.map(usize::from)
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a BPE model on raw text.
    TrainBpe(commands::TrainBpe),
    /// Tokenize raw text into a token stream.
    Encode(commands::Encode),
    /// Turn a token stream back into text.
    Decode(commands::Decode),
    /// Add or remove a language prefix on every token.
    Prefix(commands::PrefixCmd),
    /// Extract a frequency ordered vocabulary from token streams.
    ExtractVocab(commands::ExtractVocab),
    /// Pairwise vocabulary overlap.
    Overlap(commands::OverlapCmd),
    /// Overlap of the overlaps of a base vocabulary with two others.
    Overlap3(commands::Overlap3),
    /// Complementary tokenizer size: |joint| - |base|.
    CompSize(commands::CompSize),
    /// Assemble training and validation sets from bitexts.
    Mix(commands::Mix),
    /// Check that a bitext is line aligned and valid UTF-8.
    CheckParallel(commands::CheckParallel),
    /// Score hypotheses with corpus BLEU and chrF.
    Score(commands::Score),
    /// Aggregate score reports into a results table.
    Report(commands::Report),
    /// Find lines where system A beats system B by a chrF margin.
    Mine(commands::Mine),
    /// Run a full experiment from a manifest.
    Run(commands::RunCmd),
    /// Joint run, complementary resizing, then the disjoint run.
    CompSizeRun(commands::RunCmd),
}

fn version() -> &'static str {
    let s = format!(
        "{} (model format {MODEL_FORMAT_NAME} v{MODEL_FORMAT_VERSION})",
        vocab_lab::VERSION
    );
    Box::leak(s.into_boxed_str())
}

fn level(l: LogLevel) -> LevelFilter {
    match l {
        LogLevel::Error => LevelFilter::Error,
        LogLevel::Warn => LevelFilter::Warn,
        LogLevel::Info => LevelFilter::Info,
        LogLevel::Debug => LevelFilter::Debug,
        LogLevel::Trace => LevelFilter::Trace,
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::TrainBpe(c) => c.run(g),
        Command::Encode(c) => c.run(g),
        Command::Decode(c) => c.run(g),
        Command::Prefix(c) => c.run(g),
        Command::ExtractVocab(c) => c.run(g),
        Command::Overlap(c) => c.run(g),
        Command::Overlap3(c) => c.run(g),
        Command::CompSize(c) => c.run(g),
        Command::Mix(c) => c.run(g),
        Command::CheckParallel(c) => c.run(g),
        Command::Score(c) => c.run(g),
        Command::Report(c) => c.run(g),
        Command::Mine(c) => c.run(g),
        Command::Run(c) => c.run(g, false),
        Command::CompSizeRun(c) => c.run(g, true),
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().version(version()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    env_logger::Builder::new()
        .filter_level(level(cli.global.log_level))
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.global.workers() {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(Stage::Config.exit_code() as u8);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.stage.exit_code() as u8)
        }
    }
}

/// Paths a subcommand will create; checked before any work is done.
pub fn guard_outputs<'a>(
    paths: impl IntoIterator<Item = &'a PathBuf>,
    overwrite: bool,
) -> Result<(), Failure> {
    for p in paths {
        if p.exists() && !overwrite {
            return Err(Failure::new(
                Stage::Config,
                format!(
                    "refusing to overwrite existing {} (pass --overwrite)",
                    p.display()
                ),
            ));
        }
    }
    Ok(())
}
