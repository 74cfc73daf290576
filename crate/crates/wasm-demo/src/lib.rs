//! Browser bindings. Every export takes and returns JSON text so the page
//! needs no generated glue beyond `wasm-bindgen`'s string passing.

use std::cell::RefCell;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use seqtag::corpus::Sentence;
use seqtag::crf::{log_partition, posterior_marginals, score_path, viterbi_decode, Transitions};
use seqtag::eval::evaluate;
use seqtag::synthetic::{ambiguous_corpus, unambiguous_corpus, SyntheticSpec};
use seqtag::training::{train_with, Architecture, EpochRecord, SequenceModel, TrainingConfig};

thread_local! {
    static MODEL: RefCell<Option<SequenceModel>> = const { RefCell::new(None) };
}

#[derive(Debug, Deserialize)]
pub struct CrfInput {
    /// `n × k` emission scores.
    pub emissions: Vec<Vec<f64>>,
    /// `k × k`, row = from.
    pub transitions: Vec<Vec<f64>>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct CrfOutput {
    pub best_path: Vec<usize>,
    pub best_score: f64,
    pub log_partition: f64,
    /// Probability of the best path.
    pub best_probability: f64,
    pub marginals: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct TrainOutput {
    pub curve: Vec<EpochRecord>,
    pub test_accuracy: f64,
    pub vocabulary: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct TagOutput {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
}

#[derive(Debug, Serialize)]
struct ErrorOutput {
    error: String,
}

fn respond<T: Serialize>(result: Result<T, String>) -> String {
    match result {
        Ok(v) => serde_json::to_string(&v),
        Err(error) => serde_json::to_string(&ErrorOutput { error }),
    }
    .expect("serializable output")
}

pub fn explore_crf(input: &CrfInput) -> Result<CrfOutput, String> {
    let k = input.start.len();
    if input.end.len() != k || input.transitions.len() != k || input.transitions.iter().any(|r| r.len() != k) {
        return Err(format!("transitions must be {k}×{k} with start and end of length {k}"));
    }
    let mut trans = Transitions::zeros(k);
    trans.matrix.value = input.transitions.concat();
    trans.start.value = input.start.clone();
    trans.end.value = input.end.clone();
    let e = &input.emissions;
    let (best_path, best_score) = viterbi_decode(e, &trans).map_err(|err| err.to_string())?;
    let z = log_partition(e, &trans).map_err(|err| err.to_string())?;
    let marginals = posterior_marginals(e, &trans).map_err(|err| err.to_string())?;
    debug_assert!((score_path(e, &trans, &best_path).unwrap_or(f64::NAN) - best_score).abs() < 1e-9);
    Ok(CrfOutput { best_path, best_score, log_partition: z, best_probability: (best_score - z).exp(), marginals })
}

/// Viterbi path, partition function and marginals for a hand-built CRF.
#[wasm_bindgen]
pub fn crf_explore(input_json: &str) -> String {
    respond(serde_json::from_str::<CrfInput>(input_json).map_err(|e| e.to_string()).and_then(|i| explore_crf(&i)))
}

/// Trains a small tagger on a generated corpus and keeps it for [`tag_text`].
/// `corpus` is `"plain"` or `"ambiguous"`; `architecture` is `"bilstm-crf"` or `"crf"`.
pub fn train_toy_model(corpus: &str, architecture: &str, epochs: usize, seed: u64) -> Result<TrainOutput, String> {
    let architecture: Architecture = architecture.parse().map_err(|e| format!("{e}"))?;
    let spec = SyntheticSpec { train: 150, dev: 30, test: 30, seed, ..SyntheticSpec::default() };
    let data = match corpus {
        "plain" => unambiguous_corpus(&spec),
        "ambiguous" => ambiguous_corpus(&spec),
        other => return Err(format!("unknown corpus {other:?}")),
    };
    let config = TrainingConfig {
        hidden_size: 16,
        hidden_layers: 1,
        max_epochs: epochs.clamp(1, 50),
        mini_batch_size: 8,
        learning_rate: 0.1,
        seed,
        architecture,
        ..TrainingConfig::default()
    };
    let model = SequenceModel::new(data.stack(), Arc::clone(&data.train.tagset), config.clone()).map_err(|e| e.to_string())?;
    let (model, curve) = train_with(model, &data.train, &data.dev, &config, |_| {}).map_err(|e| e.to_string())?;
    let predicted = model.tag_corpus(&data.test, 1).map_err(|e| e.to_string())?;
    let test_accuracy = evaluate(&data.test, &predicted).map_err(|e| e.to_string())?.accuracy;
    let vocabulary = data.embeddings.words().to_vec();
    MODEL.with(|m| *m.borrow_mut() = Some(model));
    Ok(TrainOutput { curve: curve.records, test_accuracy, vocabulary })
}

#[wasm_bindgen]
pub fn train_toy(corpus: &str, architecture: &str, epochs: usize, seed: u64) -> String {
    respond(train_toy_model(corpus, architecture, epochs, seed))
}

/// Tags whitespace-separated text with the last trained model.
pub fn tag_with_model(text: &str) -> Result<TagOutput, String> {
    let tokens: Vec<String> = text.split_whitespace().map(String::from).collect();
    if tokens.is_empty() {
        return Err("enter at least one word".into());
    }
    MODEL.with(|m| {
        let m = m.borrow();
        let model = m.as_ref().ok_or("train a model first")?;
        let sentence = Sentence::from_surfaces("input", &tokens).map_err(|e| e.to_string())?;
        let path = model.tag_sentence(&sentence).map_err(|e| e.to_string())?;
        let tokens = sentence.tokens().iter().map(|t| t.surface().to_string()).collect();
        let tags = path.iter().map(|&t| model.tagset.code(t).to_string()).collect();
        Ok(TagOutput { tokens, tags })
    })
}

#[wasm_bindgen]
pub fn tag_text(text: &str) -> String {
    respond(tag_with_model(text))
}
