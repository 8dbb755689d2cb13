//! Byte-pair-encoding subword models.
//!
//! Text is pre-processed the way SentencePiece does it with its default
//! settings: every space becomes the marker `▁` (U+2581), a marker is
//! prepended to the line, and merges never cross a boundary between letters,
//! digits and other symbols. Characters the model cannot represent are
//! emitted as `<0xNN>` byte pieces when byte fallback is enabled, which makes
//! `decode(encode(x)) == x` hold for every line.

mod format;
mod model;
mod pretokenize;
mod train;

use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TokenizedCorpus;

pub use format::{MODEL_FORMAT_NAME, MODEL_FORMAT_VERSION};
pub use model::{BpeModel, Merge, Piece, PieceKind};
pub use train::{train_bpe, BpeTrainer};

/// Word-initial marker standing in for a space.
pub const WHITESPACE_MARKER: char = '\u{2581}';
pub const UNK_PIECE: &str = "<unk>";
pub const BOS_PIECE: &str = "<s>";
pub const EOS_PIECE: &str = "</s>";
/// Special pieces, in id order.
pub const SPECIAL_PIECES: [&str; 3] = [UNK_PIECE, BOS_PIECE, EOS_PIECE];
/// Words longer than this many characters are split before merging.
pub const MAX_WORD_CHARS: usize = 4096;

/// Unicode normalization applied to every line before tokenization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    None,
    Nfkc,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::None => "none",
            Normalization::Nfkc => "nfkc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Normalization::None),
            "nfkc" => Some(Normalization::Nfkc),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum BpeError {
    #[error("training corpus contains no words")]
    EmptyCorpus,
    #[error("vocabulary size {target} cannot hold the {required} mandatory pieces")]
    VocabTooSmall { target: usize, required: usize },
    #[error("token {0:?} is not in the piece inventory")]
    UnknownToken(String),
    #[error("decoded byte sequence is not valid UTF-8")]
    InvalidUtf8,
    #[error("model file line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = BpeError> = std::result::Result<T, E>;

/// Renders the byte piece for `b`, e.g. `<0xE2>`.
pub fn byte_piece(b: u8) -> String {
    format!("<0x{b:02X}>")
}

/// Parses a `<0xNN>` byte piece (uppercase hex only).
pub fn parse_byte_piece(s: &str) -> Option<u8> {
    let hex = s.strip_prefix("<0x")?.strip_suffix('>')?;
    if hex.len() != 2
        || !hex
            .bytes()
            .all(|b| b.is_ascii_digit() || (b'A'..=b'F').contains(&b))
    {
        return None;
    }
    u8::from_str_radix(hex, 16).ok()
}

/// Encodes every line with `model`. Lines are processed in parallel; the
/// output order always matches the input order.
pub fn encode_corpus<S: AsRef<str> + Sync>(
    model: &BpeModel,
    lines: &[S],
    language: &str,
) -> TokenizedCorpus {
    let lines = lines.par_iter().map(|l| model.encode(l.as_ref())).collect();
    TokenizedCorpus::new(language, lines)
}
