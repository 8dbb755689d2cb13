//! Corpus and vocabulary engineering for joint vs. disjoint vocabulary
//! experiments in multilingual machine translation.
//!
//! The crate is organised along the experiment pipeline:
//!
//! * [`bpe`] trains byte-pair-encoding models with a whitespace marker and
//!   byte fallback, and encodes/decodes text with them.
//! * [`prefix`] adds (and removes) a per-language token prefix so that the
//!   auxiliary language cannot share content tokens with the source language.
//! * [`vocab`] extracts frequency ordered vocabularies from tokenized data.
//! * [`overlap`] computes vocabulary overlaps, overlaps of overlaps and
//!   complementary vocabulary sizes.
//! * [`datamix`] assembles deterministic train/validation mixes from bitexts.
//! * [`metrics`] scores translations with corpus BLEU and chrF.
//! * [`miner`] retrieves sentences where one system beats another by a chrF
//!   margin.
//! * [`pipeline`] runs all of the above from a single experiment manifest.

pub mod bpe;
pub mod corpus;
pub mod datamix;
pub mod metrics;
pub mod miner;
pub mod overlap;
pub mod pipeline;
pub mod prefix;
pub mod vocab;

mod checksum;
mod text;

pub use bpe::{BpeModel, BpeTrainer};
pub use corpus::TokenizedCorpus;
pub use vocab::Vocabulary;

/// Version of the toolkit, reported by the CLI.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
