//! Semi-automatic annotation: tag raw text with the current model, let a
//! human correct the resulting column file, merge the corrections into the
//! training data and retrain against a fixed held-out set.

use std::collections::HashSet;
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{parse_column_str, CorpusError, Diagnostic, ParseMode, Sentence, TaggedCorpus};
use crate::eval::{evaluate, EvalError, EvalReport};
use crate::training::{train, write_model, LearningCurve, SequenceModel, TrainError, TrainingConfig};

#[derive(Debug, Error)]
pub enum BootstrapError {
    #[error("duplicate sentence id {0:?}")]
    DuplicateId(String),
    #[error("sentence {id}: token {token} has no tag")]
    Untagged { id: String, token: usize },
    #[error("corrected corpus uses a different tagset")]
    TagSetMismatch,
    #[error("raw text contains no sentences")]
    EmptyRaw,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Where a review file came from; written as comments above every sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    /// Raw file name; also the prefix of generated sentence ids.
    pub source: String,
    pub model_id: String,
    /// Unix seconds.
    pub timestamp: u64,
}

/// Auto-tagged sentences awaiting correction.
#[derive(Debug, Clone)]
pub struct ReviewFile {
    pub corpus: TaggedCorpus,
    pub provenance: Provenance,
    /// Skipped blank lines.
    pub diagnostics: Vec<Diagnostic>,
}

impl ReviewFile {
    /// Column text with `# source`, `# model`, `# timestamp` and `# id`
    /// comments before each sentence.
    pub fn render(&self) -> String {
        let p = &self.provenance;
        let tagset = &self.corpus.tagset;
        let mut out = String::new();
        for s in &self.corpus.sentences {
            out.push_str(&format!(
                "# source = {}\n# model = {}\n# timestamp = {}\n# id = {}\n",
                p.source, p.model_id, p.timestamp, s.id
            ));
            for t in s.tokens() {
                out.push_str(t.surface());
                if let Some(g) = t.gold {
                    out.push('\t');
                    out.push_str(tagset.code(g));
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

/// Short stable fingerprint of a model's checkpoint bytes.
pub fn model_id(model: &SequenceModel) -> String {
    Sha256::digest(write_model(model))[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash of a corpus: sentence ids, surfaces and tags.
pub fn corpus_hash(corpus: &TaggedCorpus) -> String {
    let mut h = Sha256::new();
    for s in &corpus.sentences {
        h.update(s.id.as_bytes());
        h.update([0u8]);
        for t in s.tokens() {
            h.update(t.surface().as_bytes());
            h.update([1u8]);
            h.update(t.gold.map_or("-".to_string(), |g| corpus.tagset.code(g).to_string()).as_bytes());
            h.update([2u8]);
        }
        h.update([3u8]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses one-sentence-per-line raw text (tokens separated by whitespace)
/// into untagged sentences with ids `<source>:<line>`. Blank lines are
/// skipped with a diagnostic.
pub fn parse_raw(raw: &str, source: &str) -> Result<(Vec<Sentence>, Vec<Diagnostic>), CorpusError> {
    let mut sentences = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            diagnostics.push(Diagnostic { line: i + 1, message: "empty line skipped".to_string() });
            continue;
        }
        sentences.push(Sentence::from_surfaces(format!("{source}:{}", i + 1), &toks)?);
    }
    Ok((sentences, diagnostics))
}

/// Tags every raw sentence with `model`.
pub fn annotate_raw(
    model: &SequenceModel,
    raw: &str,
    provenance: Provenance,
    threads: usize,
) -> Result<ReviewFile, BootstrapError> {
    let (sentences, diagnostics) = parse_raw(raw, &provenance.source)?;
    let untagged = TaggedCorpus::new(sentences, Arc::clone(&model.tagset));
    let corpus = model.tag_corpus(&untagged, threads)?;
    Ok(ReviewFile { corpus, provenance, diagnostics })
}

/// Strict-parses a corrected review file; every token must carry a tag.
pub fn parse_corrected(text: &str, source: &str, tagset: Arc<crate::corpus::TagSet>) -> Result<TaggedCorpus, BootstrapError> {
    let corpus = parse_column_str(text, source, tagset, ParseMode::Strict)?.corpus;
    check_tagged(&corpus)?;
    Ok(corpus)
}

fn check_tagged(corpus: &TaggedCorpus) -> Result<(), BootstrapError> {
    for s in &corpus.sentences {
        if let Some(token) = s.tokens().iter().position(|t| t.gold.is_none()) {
            return Err(BootstrapError::Untagged { id: s.id.clone(), token });
        }
    }
    Ok(())
}

/// Concatenates `base` and the corrected corpora. Sentence ids must be
/// unique across all inputs.
pub fn merge_corrected(base: &TaggedCorpus, corrected: &[TaggedCorpus]) -> Result<TaggedCorpus, BootstrapError> {
    let mut seen = HashSet::new();
    let mut sentences = Vec::with_capacity(base.sentences.len() + corrected.iter().map(|c| c.sentences.len()).sum::<usize>());
    for part in std::iter::once(base).chain(corrected) {
        if part.tagset != base.tagset {
            return Err(BootstrapError::TagSetMismatch);
        }
        for s in &part.sentences {
            if !seen.insert(s.id.clone()) {
                return Err(BootstrapError::DuplicateId(s.id.clone()));
            }
            sentences.push(s.clone());
        }
    }
    for c in corrected {
        check_tagged(c)?;
    }
    Ok(TaggedCorpus::new(sentences, Arc::clone(&base.tagset)))
}

pub struct CycleInputs<'a> {
    /// Training data of the incumbent model.
    pub base: &'a TaggedCorpus,
    /// Model-selection set for retraining.
    pub dev: &'a TaggedCorpus,
    /// Evaluation set, identical before and after.
    pub heldout: &'a TaggedCorpus,
    pub raw: &'a str,
    pub provenance: Provenance,
    pub corrected: &'a [TaggedCorpus],
}

#[derive(Debug)]
pub struct CycleReport {
    pub model: SequenceModel,
    pub review: ReviewFile,
    pub curve: LearningCurve,
    pub merged_tokens: usize,
    pub before: EvalReport,
    pub after: EvalReport,
    pub heldout_hash_before: String,
    pub heldout_hash_after: String,
}

/// Evaluate the incumbent, annotate the raw text, merge corrections, train
/// further from the incumbent's weights on the merged data and evaluate
/// again on the same held-out set.
pub fn bootstrap_cycle(model: &SequenceModel, inputs: CycleInputs<'_>, config: &TrainingConfig) -> Result<CycleReport, BootstrapError> {
    let heldout_hash_before = corpus_hash(inputs.heldout);
    let before = evaluate(inputs.heldout, &model.tag_corpus(inputs.heldout, 1)?)?;
    let review = annotate_raw(model, inputs.raw, inputs.provenance, 1)?;
    let merged = merge_corrected(inputs.base, inputs.corrected)?;
    let merged_tokens = merged.token_count();
    let (new_model, curve) = train(model.clone(), &merged, inputs.dev, config)?;
    let after = evaluate(inputs.heldout, &new_model.tag_corpus(inputs.heldout, 1)?)?;
    let heldout_hash_after = corpus_hash(inputs.heldout);
    Ok(CycleReport {
        model: new_model,
        review,
        curve,
        merged_tokens,
        before,
        after,
        heldout_hash_before,
        heldout_hash_after,
    })
}
