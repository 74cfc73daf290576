//! Token-level scoring of predicted tags against gold tags.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{TagSet, TaggedCorpus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("sentence {index} ({id}): {reason}")]
    StructureMismatch { index: usize, id: String, reason: String },
    #[error("sentence {id}: gold token {token} has no tag")]
    UntaggedGold { id: String, token: usize },
    #[error("gold and predicted corpora use different tagsets")]
    TagSetMismatch,
    #[error("k must be at least 1")]
    InvalidK,
}

/// Rows are gold tags, columns predicted tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub size: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(size: usize) -> ConfusionMatrix {
        ConfusionMatrix { size, counts: vec![vec![0; size]; size] }
    }

    pub fn add(&mut self, gold: usize, predicted: usize) {
        self.counts[gold][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, gold: usize) -> u64 {
        self.counts[gold].iter().sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        self.counts.iter().map(|r| r[predicted]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionPair {
    pub gold: usize,
    pub predicted: usize,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagScore {
    pub code: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold occurrences.
    pub support: u64,
    pub predicted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub token_count: u64,
    pub correct: u64,
    /// Gold tokens with no predicted tag.
    pub unpredicted: u64,
    pub accuracy: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub per_tag: Vec<TagScore>,
    pub confusion: ConfusionMatrix,
    pub top_confusions: Vec<ConfusionPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Count tags with no gold support as F1 = 0 in the macro mean.
    pub include_zero_support: bool,
    pub top_confusions: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { include_zero_support: false, top_confusions: 10 }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// F1 as `2TP / (2TP + FP + FN)`, zero when undefined.
fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    ratio(2 * tp, 2 * tp + fp + fn_)
}

pub fn evaluate(gold: &TaggedCorpus, predicted: &TaggedCorpus) -> Result<EvalReport, EvalError> {
    evaluate_with(gold, predicted, EvalOptions::default())
}

pub fn evaluate_with(gold: &TaggedCorpus, predicted: &TaggedCorpus, options: EvalOptions) -> Result<EvalReport, EvalError> {
    if gold.tagset != predicted.tagset {
        return Err(EvalError::TagSetMismatch);
    }
    if gold.sentences.len() != predicted.sentences.len() {
        let index = gold.sentences.len().min(predicted.sentences.len());
        let id = gold
            .sentences
            .get(index)
            .or_else(|| predicted.sentences.get(index))
            .map(|s| s.id.clone())
            .unwrap_or_default();
        return Err(EvalError::StructureMismatch {
            index,
            id,
            reason: format!("{} gold vs {} predicted sentences", gold.sentences.len(), predicted.sentences.len()),
        });
    }
    let t = gold.tagset.len();
    let mut confusion = ConfusionMatrix::new(t);
    let mut support = vec![0u64; t];
    let mut unpredicted = 0u64;
    for (index, (gs, ps)) in gold.sentences.iter().zip(&predicted.sentences).enumerate() {
        if gs.len() != ps.len() {
            return Err(EvalError::StructureMismatch {
                index,
                id: gs.id.clone(),
                reason: format!("{} gold vs {} predicted tokens", gs.len(), ps.len()),
            });
        }
        for (k, (gt, pt)) in gs.tokens().iter().zip(ps.tokens()).enumerate() {
            if gt.surface() != pt.surface() {
                return Err(EvalError::StructureMismatch {
                    index,
                    id: gs.id.clone(),
                    reason: format!("token {k}: {:?} vs {:?}", gt.surface(), pt.surface()),
                });
            }
            let g = gt.gold.ok_or_else(|| EvalError::UntaggedGold { id: gs.id.clone(), token: k })?;
            support[g] += 1;
            match pt.gold {
                Some(p) => confusion.add(g, p),
                None => unpredicted += 1,
            }
        }
    }

    let token_count: u64 = support.iter().sum();
    let correct: u64 = (0..t).map(|i| confusion.counts[i][i]).sum();
    let predicted_total = confusion.total();
    let per_tag: Vec<TagScore> = (0..t)
        .map(|i| {
            let tp = confusion.counts[i][i];
            let pred = confusion.col_sum(i);
            TagScore {
                code: gold.tagset.code(i).to_string(),
                precision: ratio(tp, pred),
                recall: ratio(tp, support[i]),
                f1: f1(tp, pred - tp, support[i] - tp),
                support: support[i],
                predicted: pred,
            }
        })
        .collect();
    let included: Vec<f64> = per_tag
        .iter()
        .filter(|s| options.include_zero_support || s.support > 0)
        .map(|s| s.f1)
        .collect();
    let macro_f1 = if included.is_empty() { 0.0 } else { included.iter().sum::<f64>() / included.len() as f64 };

    let top_confusions = if options.top_confusions == 0 {
        Vec::new()
    } else {
        confusion_pairs(&confusion, options.top_confusions)?
    };

    Ok(EvalReport {
        token_count,
        correct,
        unpredicted,
        accuracy: ratio(correct, token_count),
        micro_precision: ratio(correct, predicted_total),
        micro_recall: ratio(correct, token_count),
        micro_f1: f1(correct, predicted_total - correct, token_count - correct),
        macro_f1,
        per_tag,
        confusion,
        top_confusions,
    })
}

/// Largest `k` off-diagonal cells, count descending, then by (gold, predicted).
pub fn confusion_pairs(matrix: &ConfusionMatrix, k: usize) -> Result<Vec<ConfusionPair>, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    let mut pairs: Vec<ConfusionPair> = Vec::new();
    for (g, row) in matrix.counts.iter().enumerate() {
        for (p, &count) in row.iter().enumerate() {
            if g != p && count > 0 {
                pairs.push(ConfusionPair { gold: g, predicted: p, count });
            }
        }
    }
    pairs.sort_by(|a, b| b.count.cmp(&a.count).then(a.gold.cmp(&b.gold)).then(a.predicted.cmp(&b.predicted)));
    pairs.truncate(k);
    Ok(pairs)
}

pub fn percent(x: f64) -> String {
    format!("{:.2}%", x * 100.0)
}

/// Human-readable report.
pub fn render_text(report: &EvalReport, tagset: &TagSet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "tokens      {}", report.token_count);
    let _ = writeln!(out, "accuracy    {}", percent(report.accuracy));
    let _ = writeln!(out, "micro F1    {}", percent(report.micro_f1));
    let _ = writeln!(out, "macro F1    {}", percent(report.macro_f1));
    if report.unpredicted > 0 {
        let _ = writeln!(out, "unpredicted {}", report.unpredicted);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<10} {:>9} {:>9} {:>9} {:>8}", "tag", "precision", "recall", "f1", "support");
    for s in report.per_tag.iter().filter(|s| s.support > 0 || s.predicted > 0) {
        let _ = writeln!(
            out,
            "{:<10} {:>9} {:>9} {:>9} {:>8}",
            s.code,
            percent(s.precision),
            percent(s.recall),
            percent(s.f1),
            s.support
        );
    }
    if !report.top_confusions.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "top confusions (gold -> predicted)");
        for c in &report.top_confusions {
            let _ = writeln!(out, "{:<10} -> {:<10} {}", tagset.code(c.gold), tagset.code(c.predicted), c.count);
        }
    }
    out
}

pub fn render_json(report: &EvalReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}
