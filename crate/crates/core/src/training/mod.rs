//! Epoch loop, learning-rate annealing, early stopping and persistence.

mod checkpoint;
mod config;
mod model;

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

pub use checkpoint::{load_model, read_model, save_model, write_model, CheckpointError, FORMAT_VERSION};
pub use config::{Architecture, TrainingConfig, CONFIG_KEYS};
pub use model::SequenceModel;

use crate::corpus::TaggedCorpus;
use crate::crf::CrfError;
use crate::embeddings::EmbeddingError;
use crate::eval::{evaluate, EvalError};
use crate::neural::{sgd_step, NeuralError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("config: {0}")]
    Config(String),
    #[error("training corpus is empty")]
    EmptyTrain,
    #[error("dev corpus is empty")]
    EmptyDev,
    #[error("corpus tagset differs from the model's tagset")]
    TagSetMismatch,
    #[error("sentence {0} has untagged tokens")]
    Untagged(String),
    #[error("sentence {0} is empty")]
    EmptySentence(String),
    #[error("sentence {sentence}: tag ordinal {tag} outside the tagset")]
    InvalidTag { sentence: String, tag: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("non-finite gradient in {param} at epoch {epoch}, batch {batch}")]
    NonFiniteGradient { epoch: usize, batch: usize, param: String },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Crf(#[from] CrfError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-sentence training loss over the epoch.
    pub train_loss: f64,
    /// Dev micro-F1 after the epoch.
    pub dev_score: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LearningCurve {
    pub records: Vec<EpochRecord>,
}

impl LearningCurve {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.records
            .iter()
            .fold(None, |best: Option<&EpochRecord>, r| match best {
                Some(b) if b.dev_score >= r.dev_score => Some(b),
                _ => Some(r),
            })
    }

    /// Tab-separated `epoch train_loss dev_score lr` with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("epoch\ttrain_loss\tdev_score\tlr\n");
        for r in &self.records {
            out.push_str(&format!("{}\t{:.6}\t{:.6}\t{}\n", r.epoch, r.train_loss, r.dev_score, r.lr));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Anneal,
    Stop,
}

/// Schedule decision after the last record of `curve`.
///
/// An epoch is "bad" when it does not beat the best dev score so far; the
/// bad-epoch counter resets on improvement and whenever the LR changes.
/// After `patience` bad epochs the LR is annealed, unless annealing would
/// take it below `min_learning_rate`, in which case training stops.
pub fn anneal_and_stop_check(curve: &LearningCurve, config: &TrainingConfig) -> Decision {
    let Some(last) = curve.records.last() else {
        return Decision::Continue;
    };
    if last.lr < config.min_learning_rate || last.epoch >= config.max_epochs {
        return Decision::Stop;
    }
    let mut best = f64::NEG_INFINITY;
    let mut bad = 0;
    let mut prev_lr = None;
    for r in &curve.records {
        if prev_lr != Some(r.lr) {
            bad = 0;
        }
        if r.dev_score > best {
            best = r.dev_score;
            bad = 0;
        } else {
            bad += 1;
        }
        prev_lr = Some(r.lr);
    }
    if bad < config.patience {
        Decision::Continue
    } else if last.lr * config.anneal_factor < config.min_learning_rate {
        Decision::Stop
    } else {
        Decision::Anneal
    }
}

fn check_corpus(corpus: &TaggedCorpus, model: &SequenceModel) -> Result<(), TrainError> {
    if corpus.tagset != model.tagset {
        return Err(TrainError::TagSetMismatch);
    }
    let t = model.num_tags();
    for s in &corpus.sentences {
        let path = s.gold_path().ok_or_else(|| TrainError::Untagged(s.id.clone()))?;
        if path.is_empty() {
            return Err(TrainError::EmptySentence(s.id.clone()));
        }
        if let Some(&tag) = path.iter().find(|&&g| g >= t) {
            return Err(TrainError::InvalidTag { sentence: s.id.clone(), tag });
        }
    }
    Ok(())
}

/// Dev micro-F1 of `model` on `dev`.
pub fn dev_score(model: &SequenceModel, dev: &TaggedCorpus) -> Result<f64, TrainError> {
    let predicted = model.tag_corpus(dev, 1)?;
    Ok(evaluate(dev, &predicted)?.micro_f1)
}

/// Trains with [`train_with`] and no progress callback.
pub fn train(
    model: SequenceModel,
    train_set: &TaggedCorpus,
    dev: &TaggedCorpus,
    config: &TrainingConfig,
) -> Result<(SequenceModel, LearningCurve), TrainError> {
    train_with(model, train_set, dev, config, |_| {})
}

/// Mini-batch SGD with global-norm clipping. Each epoch shuffles sentences
/// with a generator seeded from `(seed, epoch)`, sums sentence losses over a
/// batch, steps once per batch, then scores the dev set. Returns the
/// best-dev model (first epoch wins ties) and the full curve.
pub fn train_with(
    mut model: SequenceModel,
    train_set: &TaggedCorpus,
    dev: &TaggedCorpus,
    config: &TrainingConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(SequenceModel, LearningCurve), TrainError> {
    config.validate()?;
    if train_set.sentences.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    if dev.sentences.is_empty() {
        return Err(TrainError::EmptyDev);
    }
    check_corpus(train_set, &model)?;
    check_corpus(dev, &model)?;
    model.config = config.clone();
    model.zero_grad();

    let mut curve = LearningCurve::default();
    let mut best: Option<(SequenceModel, f64)> = None;
    let mut anneals = 0;
    let mut order: Vec<usize> = (0..train_set.sentences.len()).collect();
    for epoch in 1..=config.max_epochs {
        let lr = config.learning_rate * config.anneal_factor.powi(anneals);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch, ids) in order.chunks(config.mini_batch_size).enumerate() {
            for &i in ids {
                let loss = model.accumulate_gradients(&train_set.sentences[i], Some(&mut rng))?;
                if !loss.is_finite() {
                    return Err(TrainError::NonFiniteLoss { epoch, batch });
                }
                total += loss;
            }
            let mut params = model.trainable_params_mut();
            sgd_step(&mut params, lr, Some(config.clip_norm)).map_err(|e| match e {
                NeuralError::NonFiniteGradient { param, .. } => TrainError::NonFiniteGradient { epoch, batch, param },
                other => other.into(),
            })?;
        }
        let score = dev_score(&model, dev)?;
        let record = EpochRecord { epoch, train_loss: total / order.len() as f64, dev_score: score, lr };
        curve.records.push(record);
        on_epoch(&record);
        if best.as_ref().is_none_or(|(_, b)| score > *b) {
            best = Some((model.clone(), score));
        }
        match anneal_and_stop_check(&curve, config) {
            Decision::Continue => {}
            Decision::Anneal => anneals += 1,
            Decision::Stop => break,
        }
    }
    let (mut best_model, score) = best.expect("at least one epoch ran");
    best_model.dev_score = Some(score);
    Ok((best_model, curve))
}

/// Tags a corpus and shares the model's tagset.
pub fn tag_corpus(model: &SequenceModel, corpus: &TaggedCorpus, threads: usize) -> Result<TaggedCorpus, TrainError> {
    if corpus.tagset != model.tagset {
        return Err(TrainError::TagSetMismatch);
    }
    let mut out = model.tag_corpus(corpus, threads)?;
    out.tagset = Arc::clone(&model.tagset);
    Ok(out)
}
