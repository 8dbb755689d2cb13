//! Token-level prefixing that makes an auxiliary language's vocabulary
//! disjoint from the source language's.
//!
//! Prefixing is applied to tokenized corpora only, never to raw text, so
//! that it cannot change tokenizer statistics.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::bpe::WHITESPACE_MARKER;
use crate::corpus::TokenizedCorpus;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PrefixError {
    #[error("invalid prefix {0:?}: must be non-empty, contain no whitespace and not start with the marker")]
    InvalidPrefix(String),
    #[error("line {line}: token {token:?} already starts with prefix {prefix:?}")]
    Collision {
        line: usize,
        token: String,
        prefix: String,
    },
    #[error("line {line}: token {token:?} does not carry prefix {prefix:?}")]
    MissingPrefix {
        line: usize,
        token: String,
        prefix: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixRule {
    prefix: String,
    exempt: BTreeSet<String>,
}

impl PrefixRule {
    pub fn new(prefix: impl Into<String>) -> Result<Self, PrefixError> {
        let prefix = prefix.into();
        if prefix.is_empty()
            || prefix.chars().any(char::is_whitespace)
            || prefix.starts_with(WHITESPACE_MARKER)
        {
            return Err(PrefixError::InvalidPrefix(prefix));
        }
        Ok(Self {
            prefix,
            exempt: BTreeSet::new(),
        })
    }

    /// Default rule for a language tag: upper-cased tag plus `_`, e.g.
    /// `sv` → `SV_`.
    pub fn for_language(lang: &str) -> Result<Self, PrefixError> {
        Self::new(default_prefix(lang))
    }

    pub fn with_exempt<I, S>(mut self, tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.exempt.extend(tokens.into_iter().map(Into::into));
        self
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn exempt(&self) -> &BTreeSet<String> {
        &self.exempt
    }

    fn is_exempt(&self, token: &str) -> bool {
        self.exempt.contains(token)
    }
}

pub fn default_prefix(lang: &str) -> String {
    format!("{}_", lang.to_uppercase())
}

/// Prefixes every non-exempt token. Fails if a token already carries the
/// prefix, since the transform would then not be invertible.
pub fn apply_prefix(
    corpus: &TokenizedCorpus,
    rule: &PrefixRule,
) -> Result<TokenizedCorpus, PrefixError> {
    let lines = corpus
        .lines
        .par_iter()
        .enumerate()
        .map(|(i, line)| {
            line.iter()
                .map(|t| {
                    if rule.is_exempt(t) {
                        Ok(t.clone())
                    } else if t.starts_with(&rule.prefix) {
                        Err(PrefixError::Collision {
                            line: i + 1,
                            token: t.clone(),
                            prefix: rule.prefix.clone(),
                        })
                    } else {
                        Ok(format!("{}{}", rule.prefix, t))
                    }
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TokenizedCorpus::new(corpus.language.clone(), lines))
}

/// Inverse of [`apply_prefix`].
pub fn strip_prefix(
    corpus: &TokenizedCorpus,
    rule: &PrefixRule,
) -> Result<TokenizedCorpus, PrefixError> {
    let lines = corpus
        .lines
        .par_iter()
        .enumerate()
        .map(|(i, line)| {
            line.iter()
                .map(|t| {
                    if rule.is_exempt(t) {
                        return Ok(t.clone());
                    }
                    match t.strip_prefix(&rule.prefix) {
                        Some(rest) if !rest.is_empty() => Ok(rest.to_owned()),
                        _ => Err(PrefixError::MissingPrefix {
                            line: i + 1,
                            token: t.clone(),
                            prefix: rule.prefix.clone(),
                        }),
                    }
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TokenizedCorpus::new(corpus.language.clone(), lines))
}
