//! Versioned text serialization of [`BpeModel`].
//!
//! ```text
//! vocab-lab-bpe<TAB>1
//! target_vocab_size<TAB>30
//! byte_fallback<TAB>false
//! normalization<TAB>none
//! merges<TAB>3
//! 0<TAB>l<TAB>o
//! ...
//! pieces<TAB>12
//! 0<TAB><unk><TAB>special
//! ...
//! ```

use std::fs;
use std::path::Path;

use super::model::{BpeModel, Merge, Piece, PieceKind};
use super::{BpeError, Normalization, Result};

pub const MODEL_FORMAT_NAME: &str = "vocab-lab-bpe";
pub const MODEL_FORMAT_VERSION: u32 = 1;

impl BpeModel {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{MODEL_FORMAT_NAME}\t{MODEL_FORMAT_VERSION}\n"));
        out.push_str(&format!(
            "target_vocab_size\t{}\n",
            self.target_vocab_size()
        ));
        out.push_str(&format!("byte_fallback\t{}\n", self.byte_fallback()));
        out.push_str(&format!(
            "normalization\t{}\n",
            self.normalization().as_str()
        ));
        out.push_str(&format!("merges\t{}\n", self.merges().len()));
        for (rank, m) in self.merges().iter().enumerate() {
            out.push_str(&format!("{rank}\t{}\t{}\n", m.left, m.right));
        }
        out.push_str(&format!("pieces\t{}\n", self.pieces().len()));
        for (id, p) in self.pieces().iter().enumerate() {
            out.push_str(&format!("{id}\t{}\t{}\n", p.text, p.kind.as_str()));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, Vec<&str>)> {
            match lines.next() {
                Some((n, l)) => Ok((n, l.split('\t').collect())),
                None => Err(BpeError::Format {
                    line: 0,
                    msg: format!("unexpected end of file, expected {what}"),
                }),
            }
        };
        fn err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
            Err(BpeError::Format {
                line,
                msg: msg.into(),
            })
        }
        fn field<'a>(line: usize, fields: &[&'a str], key: &str) -> Result<&'a str> {
            match fields {
                [k, v] if *k == key => Ok(v),
                _ => err(line, format!("expected `{key}<TAB>value`")),
            }
        }
        fn number(line: usize, s: &str) -> Result<usize> {
            s.parse()
                .or_else(|_| err(line, format!("expected a number, got {s:?}")))
        }

        let (n, f) = next("header")?;
        let version = field(n, &f, MODEL_FORMAT_NAME)?;
        if version != MODEL_FORMAT_VERSION.to_string() {
            return err(n, format!("unsupported model version {version}"));
        }
        let (n, f) = next("target_vocab_size")?;
        let target = number(n, field(n, &f, "target_vocab_size")?)?;
        let (n, f) = next("byte_fallback")?;
        let byte_fallback = match field(n, &f, "byte_fallback")? {
            "true" => true,
            "false" => false,
            other => return err(n, format!("expected true or false, got {other:?}")),
        };
        let (n, f) = next("normalization")?;
        let norm_str = field(n, &f, "normalization")?;
        let normalization = Normalization::parse(norm_str)
            .map_or_else(|| err(n, format!("unknown normalization {norm_str:?}")), Ok)?;

        let (n, f) = next("merges")?;
        let merge_count = number(n, field(n, &f, "merges")?)?;
        let mut merges = Vec::with_capacity(merge_count);
        for rank in 0..merge_count {
            let (n, f) = next("merge")?;
            match f.as_slice() {
                [r, left, right] if *r == rank.to_string() => merges.push(Merge {
                    left: (*left).to_owned(),
                    right: (*right).to_owned(),
                }),
                _ => return err(n, format!("expected `{rank}<TAB>left<TAB>right`")),
            }
        }

        let (n, f) = next("pieces")?;
        let piece_count = number(n, field(n, &f, "pieces")?)?;
        let mut pieces = Vec::with_capacity(piece_count);
        for id in 0..piece_count {
            let (n, f) = next("piece")?;
            match f.as_slice() {
                [i, text, kind] if *i == id.to_string() => {
                    let kind = PieceKind::parse(kind)
                        .map_or_else(|| err(n, format!("unknown piece kind {kind:?}")), Ok)?;
                    pieces.push(Piece {
                        text: (*text).to_owned(),
                        kind,
                    });
                }
                _ => return err(n, format!("expected `{id}<TAB>piece<TAB>kind`")),
            }
        }
        if let Some((n, _)) = lines.next() {
            return err(n, "trailing content after piece inventory");
        }
        BpeModel::from_parts(pieces, merges, target, byte_fallback, normalization)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}
