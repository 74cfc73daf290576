//! Token vectors from pluggable providers, concatenated in a fixed order.
//!
//! Three provider kinds exist: static word tables, precomputed per-token
//! vectors produced outside this crate (contextual models), and a
//! character-level BiLSTM encoder. A stack's output for a token is the
//! concatenation of every provider's vector in declaration order.

mod char_encoder;
mod precomputed;
mod static_table;

use rand::Rng;
use thiserror::Error;

use crate::corpus::Sentence;
use crate::neural::ParamTensor;

pub use char_encoder::{char_encode, CharEncoder, CharTrace, DEFAULT_CHAR_DIM, DEFAULT_CHAR_HIDDEN};
pub use precomputed::{load_precomputed, serialize_precomputed, PrecomputedContextual};
pub use static_table::{load_static_vectors, serialize_static_vectors, OovPolicy, StaticTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: expected dimension {expected}, found {found}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("no vectors found")]
    Empty,
    #[error("non-finite value for {0:?}")]
    NonFinite(String),
    #[error("no precomputed vector for sentence {sentence_id:?} token {token_index}")]
    MissingPrecomputed { sentence_id: String, token_index: usize },
    #[error("word dropout rate {0} outside [0, 1]")]
    InvalidDropout(f64),
    #[error("embedding stack has no providers")]
    EmptyStack,
    #[error("no provider named {0:?}")]
    UnknownProvider(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provider {
    Static(StaticTable),
    Precomputed(PrecomputedContextual),
    Char(CharEncoder),
}

impl Provider {
    pub fn dim(&self) -> usize {
        match self {
            Provider::Static(t) => t.dim(),
            Provider::Precomputed(p) => p.dim(),
            Provider::Char(c) => c.dim(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Provider::Static(_) => "static",
            Provider::Precomputed(_) => "precomputed",
            Provider::Char(_) => "char",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackEntry {
    pub name: String,
    pub provider: Provider,
    /// Precomputed providers are never trainable.
    pub trainable: bool,
}

impl StackEntry {
    pub fn new(name: impl Into<String>, mut provider: Provider, trainable: bool) -> StackEntry {
        let name = name.into();
        match &mut provider {
            Provider::Static(t) => t.matrix.name = format!("embed.{name}.matrix"),
            Provider::Char(c) => {
                c.embeddings.name = format!("embed.{name}.embeddings");
                for (dir, cell) in [("fwd", &mut c.fwd), ("bwd", &mut c.bwd)] {
                    cell.w.name = format!("embed.{name}.{dir}.w");
                    cell.u.name = format!("embed.{name}.{dir}.u");
                    cell.bias.name = format!("embed.{name}.{dir}.bias");
                }
            }
            Provider::Precomputed(_) => {}
        }
        let trainable = trainable && !matches!(provider, Provider::Precomputed(_));
        StackEntry { name, provider, trainable }
    }
}

/// Ordered, non-empty list of providers.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStack {
    entries: Vec<StackEntry>,
}

/// Forward record for trainable character encoders, one per token.
#[derive(Debug, Clone)]
pub struct EmbedTrace {
    pub vectors: Vec<Vec<f64>>,
    char_traces: Vec<Option<Vec<CharTrace>>>,
}

impl EmbeddingStack {
    pub fn new(entries: Vec<StackEntry>) -> Result<EmbeddingStack, EmbeddingError> {
        if entries.is_empty() {
            return Err(EmbeddingError::EmptyStack);
        }
        Ok(EmbeddingStack { entries })
    }

    pub fn entries(&self) -> &[StackEntry] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [StackEntry] {
        &mut self.entries
    }

    pub fn total_dim(&self) -> usize {
        self.entries.iter().map(|e| e.provider.dim()).sum()
    }

    /// Replaces the vectors behind a precomputed provider (e.g. after loading a checkpoint).
    pub fn attach_precomputed(&mut self, name: &str, store: PrecomputedContextual) -> Result<(), EmbeddingError> {
        let entry = self
            .entries
            .iter_mut()
            .find(|e| e.name == name && matches!(e.provider, Provider::Precomputed(_)))
            .ok_or_else(|| EmbeddingError::UnknownProvider(name.to_string()))?;
        if entry.provider.dim() != store.dim() {
            return Err(EmbeddingError::DimensionMismatch { line: 0, expected: entry.provider.dim(), found: store.dim() });
        }
        entry.provider = Provider::Precomputed(store);
        Ok(())
    }

    pub fn embed_sentence(&self, sentence: &Sentence) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        Ok(self.embed(sentence, false)?.vectors)
    }

    /// Like [`embed_sentence`](Self::embed_sentence) but keeps what backward needs.
    pub fn forward(&self, sentence: &Sentence) -> Result<EmbedTrace, EmbeddingError> {
        self.embed(sentence, true)
    }

    fn embed(&self, sentence: &Sentence, keep_traces: bool) -> Result<EmbedTrace, EmbeddingError> {
        let total = self.total_dim();
        let mut vectors: Vec<Vec<f64>> = (0..sentence.len()).map(|_| Vec::with_capacity(total)).collect();
        let mut char_traces = Vec::with_capacity(self.entries.len());
        for entry in &self.entries {
            let mut traces = None;
            match &entry.provider {
                Provider::Static(t) => {
                    for (v, tok) in vectors.iter_mut().zip(sentence.tokens()) {
                        v.extend_from_slice(t.lookup(tok.surface()));
                    }
                }
                Provider::Precomputed(p) => {
                    for (i, v) in vectors.iter_mut().enumerate() {
                        v.extend_from_slice(p.get(&sentence.id, i)?);
                    }
                }
                Provider::Char(c) => {
                    let ts: Vec<CharTrace> = sentence.surfaces().map(|s| c.forward(s)).collect();
                    for (v, t) in vectors.iter_mut().zip(&ts) {
                        v.extend(CharEncoder::output(t));
                    }
                    if keep_traces && entry.trainable {
                        traces = Some(ts);
                    }
                }
            }
            char_traces.push(traces);
        }
        Ok(EmbedTrace { vectors, char_traces })
    }

    /// Routes `dL/d vector` into trainable providers.
    pub fn backward(&mut self, sentence: &Sentence, trace: &EmbedTrace, d_vectors: &[Vec<f64>]) {
        let mut offset = 0;
        for (entry, traces) in self.entries.iter_mut().zip(&trace.char_traces) {
            let dim = entry.provider.dim();
            if entry.trainable {
                match &mut entry.provider {
                    Provider::Static(t) => {
                        for (tok, d) in sentence.tokens().iter().zip(d_vectors) {
                            if let Some(r) = t.row_of(tok.surface()) {
                                for (g, x) in t.matrix.grad_row_mut(r).iter_mut().zip(&d[offset..offset + dim]) {
                                    *g += x;
                                }
                            }
                        }
                    }
                    Provider::Char(c) => {
                        if let Some(ts) = traces {
                            for (t, d) in ts.iter().zip(d_vectors) {
                                c.backward(t, &d[offset..offset + dim]);
                            }
                        }
                    }
                    Provider::Precomputed(_) => {}
                }
            }
            offset += dim;
        }
    }

    /// Parameters of trainable providers only.
    pub fn trainable_params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = Vec::new();
        for e in self.entries.iter_mut().filter(|e| e.trainable) {
            match &mut e.provider {
                Provider::Static(t) => out.push(&mut t.matrix),
                Provider::Char(c) => out.extend(c.params_mut()),
                Provider::Precomputed(_) => {}
            }
        }
        out
    }

    pub fn trainable_params(&self) -> Vec<&ParamTensor> {
        let mut out = Vec::new();
        for e in self.entries.iter().filter(|e| e.trainable) {
            match &e.provider {
                Provider::Static(t) => out.push(&t.matrix),
                Provider::Char(c) => out.extend(c.params()),
                Provider::Precomputed(_) => {}
            }
        }
        out
    }
}

/// Per-token keep/drop decisions: `true` means the token's vector is zeroed.
pub fn word_dropout_mask<R: Rng>(n: usize, p: f64, rng: &mut R) -> Result<Vec<bool>, EmbeddingError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(EmbeddingError::InvalidDropout(p));
    }
    Ok((0..n).map(|_| p > 0.0 && rng.gen::<f64>() < p).collect())
}

/// Zeroes each token's whole vector with probability `p`. Survivors are not rescaled.
pub fn word_dropout<R: Rng>(mut vectors: Vec<Vec<f64>>, p: f64, rng: &mut R) -> Result<Vec<Vec<f64>>, EmbeddingError> {
    let mask = word_dropout_mask(vectors.len(), p, rng)?;
    for (v, drop) in vectors.iter_mut().zip(mask) {
        if drop {
            v.fill(0.0);
        }
    }
    Ok(vectors)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn table(words: &[&str], dim: usize, rng: &mut ChaCha8Rng) -> StaticTable {
        let rows = words.iter().map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        StaticTable::from_rows(words.iter().map(|s| s.to_string()).collect(), rows, OovPolicy::Zero).unwrap()
    }

    #[test]
    fn concatenated_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let stack = EmbeddingStack::new(vec![
            StackEntry::new("a", Provider::Static(table(&["x", "y"], 100, &mut rng)), false),
            StackEntry::new("b", Provider::Static(table(&["x"], 50, &mut rng)), false),
        ])
        .unwrap();
        assert_eq!(stack.total_dim(), 150);
        let s = Sentence::from_surfaces("s:1", &["x", "y", "zz"]).unwrap();
        let out = stack.embed_sentence(&s).unwrap();
        assert!(out.iter().all(|v| v.len() == 150));
    }

    #[test]
    fn single_static_is_identity_lookup() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = table(&["x", "y"], 4, &mut rng);
        let row = t.lookup("y").to_vec();
        let stack = EmbeddingStack::new(vec![StackEntry::new("a", Provider::Static(t), false)]).unwrap();
        let s = Sentence::from_surfaces("s:1", &["y"]).unwrap();
        assert_eq!(stack.embed_sentence(&s).unwrap()[0], row);
    }

    #[test]
    fn paper_best_configuration_shape() {
        let mut muril = PrecomputedContextual::new(6).unwrap();
        let mut flair = PrecomputedContextual::new(4).unwrap();
        for i in 0..2 {
            muril.insert("s:1", i, vec![i as f64; 6]).unwrap();
            flair.insert("s:1", i, vec![-(i as f64); 4]).unwrap();
        }
        let stack = EmbeddingStack::new(vec![
            StackEntry::new("muril-precomputed", Provider::Precomputed(muril), false),
            StackEntry::new("flair-precomputed", Provider::Precomputed(flair), false),
        ])
        .unwrap();
        let s = Sentence::from_surfaces("s:1", &["a", "b"]).unwrap();
        let out = stack.embed_sentence(&s).unwrap();
        assert_eq!(out[1], [vec![1.0; 6], vec![-1.0; 4]].concat());

        let missing = Sentence::from_surfaces("s:2", &["a"]).unwrap();
        assert_eq!(
            stack.embed_sentence(&missing).unwrap_err(),
            EmbeddingError::MissingPrecomputed { sentence_id: "s:2".into(), token_index: 0 }
        );
    }

    #[test]
    fn empty_stack_rejected() {
        assert_eq!(EmbeddingStack::new(vec![]), Err(EmbeddingError::EmptyStack));
    }

    #[test]
    fn dropout_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(word_dropout(v.clone(), 0.0, &mut rng).unwrap(), v);
        assert_eq!(word_dropout(v.clone(), 1.0, &mut rng).unwrap(), vec![vec![0.0; 2]; 2]);
        assert_eq!(word_dropout(v.clone(), 1.5, &mut rng), Err(EmbeddingError::InvalidDropout(1.5)));
        assert!(word_dropout(v, -0.1, &mut rng).is_err());
    }

    #[test]
    fn dropout_rate_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mask = word_dropout_mask(100_000, 0.05, &mut rng).unwrap();
        let frac = mask.iter().filter(|&&d| d).count() as f64 / 100_000.0;
        assert!((frac - 0.05).abs() <= 0.005, "zeroed fraction {frac}");
    }

    #[test]
    fn survivors_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 + 1.0; 3]).collect();
        let out = word_dropout(v.clone(), 0.3, &mut rng).unwrap();
        for (a, b) in v.iter().zip(&out) {
            assert!(b == a || b.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn precomputed_entries_never_trainable() {
        let e = StackEntry::new("p", Provider::Precomputed(PrecomputedContextual::new(2).unwrap()), true);
        assert!(!e.trainable);
    }
}
