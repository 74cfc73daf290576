//! Column-format tagged corpora: the BIS tag inventory, parsing and writing,
//! statistics and train/dev/test splitting.

mod column;
mod split;
mod tagset;

use std::collections::HashSet;
use std::sync::Arc;

use thiserror::Error;
use unicode_normalization::{is_nfc, UnicodeNormalization};

pub use column::{parse_column_file, parse_column_str, write_column_file, Diagnostic, ParseMode, Parsed};
pub use split::split_corpus;
pub use tagset::{builtin_bis_tagset, Category, Tag, TagSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("input is not valid UTF-8 (byte offset {offset})")]
    InvalidUtf8 { offset: usize },
    #[error("line {line}: expected 1 or 2 fields, found {fields}")]
    Malformed { line: usize, fields: usize },
    #[error("line {line}: unknown tag {code:?}")]
    UnknownTag { line: usize, code: String },
    #[error("invalid tagset: {0}")]
    InvalidTagSet(String),
    #[error("invalid token surface {0:?}")]
    InvalidSurface(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("sentence {0} has no tokens")]
    EmptySentence(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    surface: String,
    pub gold: Option<usize>,
}

impl Token {
    /// Builds a token, normalizing the surface to NFC. Surfaces must be
    /// non-empty and free of whitespace.
    pub fn new(surface: &str, gold: Option<usize>) -> Result<Token, CorpusError> {
        let surface: String = if is_nfc(surface) {
            surface.to_string()
        } else {
            surface.nfc().collect()
        };
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            return Err(CorpusError::InvalidSurface(surface));
        }
        Ok(Token { surface, gold })
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }
}

/// A non-empty token sequence with a stable identifier.
///
/// Equality compares tokens only; the id is provenance, not content.
#[derive(Debug, Clone, Eq)]
pub struct Sentence {
    pub id: String,
    tokens: Vec<Token>,
}

impl PartialEq for Sentence {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
    }
}

impl Sentence {
    pub fn new(id: impl Into<String>, tokens: Vec<Token>) -> Result<Sentence, CorpusError> {
        let id = id.into();
        if tokens.is_empty() {
            return Err(CorpusError::EmptySentence(id));
        }
        Ok(Sentence { id, tokens })
    }

    /// Untagged sentence from surfaces.
    pub fn from_surfaces<S: AsRef<str>>(id: impl Into<String>, surfaces: &[S]) -> Result<Sentence, CorpusError> {
        let tokens = surfaces
            .iter()
            .map(|s| Token::new(s.as_ref(), None))
            .collect::<Result<Vec<_>, _>>()?;
        Sentence::new(id, tokens)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface())
    }

    /// Gold ordinals, or `None` if any token is untagged.
    pub fn gold_path(&self) -> Option<Vec<usize>> {
        self.tokens.iter().map(|t| t.gold).collect()
    }

    /// Same surfaces, new tags.
    pub fn with_tags(&self, tags: &[usize]) -> Sentence {
        assert_eq!(tags.len(), self.tokens.len(), "tag count must match token count");
        let tokens = self
            .tokens
            .iter()
            .zip(tags)
            .map(|(t, &g)| Token { surface: t.surface.clone(), gold: Some(g) })
            .collect();
        Sentence { id: self.id.clone(), tokens }
    }

    pub fn without_tags(&self) -> Sentence {
        let tokens = self
            .tokens
            .iter()
            .map(|t| Token { surface: t.surface.clone(), gold: None })
            .collect();
        Sentence { id: self.id.clone(), tokens }
    }
}

#[derive(Debug, Clone)]
pub struct TaggedCorpus {
    pub sentences: Vec<Sentence>,
    pub tagset: Arc<TagSet>,
}

impl PartialEq for TaggedCorpus {
    fn eq(&self, other: &Self) -> bool {
        self.sentences == other.sentences && self.tagset == other.tagset
    }
}

/// Summary counts for a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusStats {
    pub sentence_count: usize,
    pub token_count: usize,
    /// Indexed by tag ordinal.
    pub tag_histogram: Vec<usize>,
    pub untagged_count: usize,
    /// Distinct surfaces absent from the reference vocabulary, in first-seen order.
    pub oov_candidates: Vec<String>,
}

impl TaggedCorpus {
    pub fn new(sentences: Vec<Sentence>, tagset: Arc<TagSet>) -> TaggedCorpus {
        TaggedCorpus { sentences, tagset }
    }

    pub fn empty(tagset: Arc<TagSet>) -> TaggedCorpus {
        TaggedCorpus { sentences: Vec::new(), tagset }
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn is_fully_tagged(&self) -> bool {
        self.sentences.iter().all(|s| s.tokens.iter().all(|t| t.gold.is_some()))
    }

    pub fn stats(&self) -> CorpusStats {
        corpus_stats(self, None::<fn(&str) -> bool>)
    }
}

/// Counts sentences, tokens and per-tag frequencies. When `in_vocab` is
/// given, surfaces it rejects are listed as OOV candidates.
pub fn corpus_stats<F>(corpus: &TaggedCorpus, in_vocab: Option<F>) -> CorpusStats
where
    F: Fn(&str) -> bool,
{
    let mut stats = CorpusStats {
        sentence_count: corpus.sentences.len(),
        tag_histogram: vec![0; corpus.tagset.len()],
        ..CorpusStats::default()
    };
    let mut seen = HashSet::new();
    for token in corpus.sentences.iter().flat_map(|s| s.tokens.iter()) {
        stats.token_count += 1;
        match token.gold {
            Some(g) => stats.tag_histogram[g] += 1,
            None => stats.untagged_count += 1,
        }
        if let Some(f) = &in_vocab {
            if !f(token.surface()) && seen.insert(token.surface()) {
                stats.oov_candidates.push(token.surface().to_string());
            }
        }
    }
    stats
}
