//! Line oriented corpus files and tokenized corpora.
//!
//! Corpus files are UTF-8, one sentence per line, LF terminated. Token
//! streams use the same layout with pieces separated by single spaces.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: invalid UTF-8 at byte offset {offset}")]
    InvalidUtf8 {
        path: String,
        line: usize,
        offset: usize,
    },
    #[error("{path}:{line}: empty token (pieces must be separated by exactly one space)")]
    EmptyToken { path: String, line: usize },
}

/// A tokenized corpus: one token sequence per input line, tagged with its
/// language.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizedCorpus {
    pub language: String,
    pub lines: Vec<Vec<String>>,
}

impl TokenizedCorpus {
    pub fn new(language: impl Into<String>, lines: Vec<Vec<String>>) -> Self {
        Self {
            language: language.into(),
            lines,
        }
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.lines.iter().map(Vec::len).sum()
    }

    /// Parses a token stream. `name` is only used in error messages.
    pub fn from_token_stream(
        language: impl Into<String>,
        text: &str,
        name: &str,
    ) -> Result<Self, CorpusError> {
        let mut lines = Vec::new();
        for (i, line) in split_lines(text).enumerate() {
            lines.push(
                parse_token_line(line).ok_or_else(|| CorpusError::EmptyToken {
                    path: name.to_owned(),
                    line: i + 1,
                })?,
            );
        }
        Ok(Self::new(language, lines))
    }

    pub fn read(language: impl Into<String>, path: &Path) -> Result<Self, CorpusError> {
        let lines = read_lines(path)?;
        let name = path.display().to_string();
        let mut out = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            out.push(
                parse_token_line(line).ok_or_else(|| CorpusError::EmptyToken {
                    path: name.clone(),
                    line: i + 1,
                })?,
            );
        }
        Ok(Self::new(language, out))
    }

    pub fn to_token_stream(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        for line in &self.lines {
            w.write_all(line.join(" ").as_bytes())?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), CorpusError> {
        fs::write(path, self.to_token_stream()).map_err(|e| io_error(path, e))
    }
}

fn parse_token_line(line: &str) -> Option<Vec<String>> {
    if line.is_empty() {
        return Some(Vec::new());
    }
    let tokens: Vec<String> = line.split(' ').map(str::to_owned).collect();
    if tokens.iter().any(String::is_empty) {
        return None;
    }
    Some(tokens)
}

pub(crate) fn io_error(path: &Path, source: io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Splits on LF; a trailing LF does not produce an extra empty line.
pub fn split_lines(text: &str) -> impl Iterator<Item = &str> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let empty = text.is_empty();
    body.split('\n').filter(move |_| !empty)
}

/// Splits raw bytes into lines (LF separated, trailing LF optional).
pub fn split_byte_lines(bytes: &[u8]) -> Vec<&[u8]> {
    if bytes.is_empty() {
        return Vec::new();
    }
    let body = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    body.split(|&b| b == b'\n').collect()
}

/// Reads a UTF-8 line file, reporting the first invalid line and the byte
/// offset of the offending byte within the file.
pub fn read_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    lines_from_bytes(&bytes, &path.display().to_string())
}

pub fn lines_from_bytes(bytes: &[u8], name: &str) -> Result<Vec<String>, CorpusError> {
    let mut out = Vec::new();
    let mut offset = 0usize;
    for (i, raw) in split_byte_lines(bytes).into_iter().enumerate() {
        match std::str::from_utf8(raw) {
            Ok(s) => out.push(s.to_owned()),
            Err(e) => {
                return Err(CorpusError::InvalidUtf8 {
                    path: name.to_owned(),
                    line: i + 1,
                    offset: offset + e.valid_up_to(),
                })
            }
        }
        offset += raw.len() + 1;
    }
    Ok(out)
}

pub fn write_lines<S: AsRef<str>>(path: &Path, lines: &[S]) -> Result<(), CorpusError> {
    let mut out = String::new();
    for l in lines {
        out.push_str(l.as_ref());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_error(path, e))
}
