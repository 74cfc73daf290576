use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, TaggedCorpus};

/// Partitions sentences into `ratios.len()` disjoint parts.
///
/// Sentences are permuted with a seeded generator; part boundaries sit at
/// `round(n * cumulative_ratio)`, so each part is within one sentence of its
/// exact share. Sentences keep their original relative order inside a part.
pub fn split_corpus(
    corpus: &TaggedCorpus,
    ratios: &[f64],
    seed: u64,
) -> Result<Vec<TaggedCorpus>, CorpusError> {
    if ratios.is_empty() {
        return Err(CorpusError::InvalidSplit("no ratios given".into()));
    }
    if ratios.iter().any(|r| !r.is_finite() || *r <= 0.0) {
        return Err(CorpusError::InvalidSplit(format!("ratios must be positive: {ratios:?}")));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(CorpusError::InvalidSplit(format!("ratios sum to {total}, expected 1")));
    }
    let n = corpus.sentences.len();
    if n < ratios.len() {
        return Err(CorpusError::InvalidSplit(format!(
            "{n} sentences cannot fill {} parts",
            ratios.len()
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut parts = Vec::with_capacity(ratios.len());
    let mut cumulative = 0.0;
    let mut start = 0;
    for (k, r) in ratios.iter().enumerate() {
        cumulative += r;
        let end = if k + 1 == ratios.len() {
            n
        } else {
            ((n as f64) * cumulative).round().min(n as f64) as usize
        };
        let end = end.max(start);
        let mut idx = order[start..end].to_vec();
        idx.sort_unstable();
        let sentences = idx.into_iter().map(|i| corpus.sentences[i].clone()).collect();
        parts.push(TaggedCorpus::new(sentences, corpus.tagset.clone()));
        start = end;
    }
    Ok(parts)
}
