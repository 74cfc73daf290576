use std::fmt;
use std::str::FromStr;

use super::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// Embeddings -> BiLSTM -> projection -> CRF.
    BiLstmCrf,
    /// Embeddings -> projection -> CRF, no recurrent encoder.
    CrfOnly,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::BiLstmCrf => "bilstm-crf",
            Architecture::CrfOnly => "crf",
        })
    }
}

impl FromStr for Architecture {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bilstm-crf" => Ok(Architecture::BiLstmCrf),
            "crf" => Ok(Architecture::CrfOnly),
            other => Err(TrainError::Config(format!("unknown architecture {other:?} (bilstm-crf | crf)"))),
        }
    }
}

/// Training hyperparameters. Defaults reproduce the published setup:
/// hidden 512, 2 layers, word dropout 0.05, LR 0.01, 100 epochs,
/// sequence length 128, mini-batch 16.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub hidden_size: usize,
    pub hidden_layers: usize,
    pub word_dropout: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub sequence_length: usize,
    pub mini_batch_size: usize,
    pub anneal_factor: f64,
    pub patience: usize,
    pub min_learning_rate: f64,
    pub clip_norm: f64,
    pub init_scale: f64,
    pub seed: u64,
    pub architecture: Architecture,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            hidden_size: 512,
            hidden_layers: 2,
            word_dropout: 0.05,
            learning_rate: 0.01,
            max_epochs: 100,
            sequence_length: 128,
            mini_batch_size: 16,
            anneal_factor: 0.5,
            patience: 3,
            min_learning_rate: 1e-4,
            clip_norm: 5.0,
            init_scale: 0.1,
            seed: 1,
            architecture: Architecture::BiLstmCrf,
        }
    }
}

pub const CONFIG_KEYS: [&str; 14] = [
    "hidden_size",
    "hidden_layers",
    "word_dropout",
    "learning_rate",
    "max_epochs",
    "sequence_length",
    "mini_batch_size",
    "anneal_factor",
    "patience",
    "min_learning_rate",
    "clip_norm",
    "init_scale",
    "seed",
    "architecture",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, TrainError> {
    value
        .parse()
        .map_err(|_| TrainError::Config(format!("{key}: cannot parse {value:?}")))
}

impl TrainingConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), TrainError> {
        let v = value.trim();
        match key {
            "hidden_size" => self.hidden_size = parse(key, v)?,
            "hidden_layers" => self.hidden_layers = parse(key, v)?,
            "word_dropout" => self.word_dropout = parse(key, v)?,
            "learning_rate" => self.learning_rate = parse(key, v)?,
            "max_epochs" => self.max_epochs = parse(key, v)?,
            "sequence_length" => self.sequence_length = parse(key, v)?,
            "mini_batch_size" => self.mini_batch_size = parse(key, v)?,
            "anneal_factor" => self.anneal_factor = parse(key, v)?,
            "patience" => self.patience = parse(key, v)?,
            "min_learning_rate" => self.min_learning_rate = parse(key, v)?,
            "clip_norm" => self.clip_norm = parse(key, v)?,
            "init_scale" => self.init_scale = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "architecture" => self.architecture = v.parse()?,
            other => return Err(TrainError::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "hidden_size" => self.hidden_size.to_string(),
            "hidden_layers" => self.hidden_layers.to_string(),
            "word_dropout" => self.word_dropout.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "max_epochs" => self.max_epochs.to_string(),
            "sequence_length" => self.sequence_length.to_string(),
            "mini_batch_size" => self.mini_batch_size.to_string(),
            "anneal_factor" => self.anneal_factor.to_string(),
            "patience" => self.patience.to_string(),
            "min_learning_rate" => self.min_learning_rate.to_string(),
            "clip_norm" => self.clip_norm.to_string(),
            "init_scale" => self.init_scale.to_string(),
            "seed" => self.seed.to_string(),
            "architecture" => self.architecture.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), TrainError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| TrainError::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<TrainingConfig, TrainError> {
        let mut c = TrainingConfig::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    /// `key = value` per line, in [`CONFIG_KEYS`] order.
    pub fn render(&self) -> String {
        CONFIG_KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", self.get(k).expect("known key")))
            .collect()
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.architecture == Architecture::BiLstmCrf && (self.hidden_size == 0 || self.hidden_layers == 0) {
            return fail("hidden_size and hidden_layers must be positive");
        }
        if !(0.0..=1.0).contains(&self.word_dropout) {
            return fail("word_dropout must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if self.max_epochs == 0 || self.sequence_length == 0 || self.mini_batch_size == 0 {
            return fail("max_epochs, sequence_length and mini_batch_size must be positive");
        }
        if !(self.anneal_factor > 0.0 && self.anneal_factor < 1.0) {
            return fail("anneal_factor must lie in (0, 1)");
        }
        if self.patience == 0 {
            return fail("patience must be positive");
        }
        // written so that NaN fails too
        if ![self.min_learning_rate, self.clip_norm, self.init_scale].iter().all(|v| *v > 0.0) {
            return fail("min_learning_rate, clip_norm and init_scale must be positive");
        }
        Ok(())
    }
}
