//! Generated corpora with known structure, for convergence and
//! architecture experiments that need no external data.
//!
//! All corpora use the built-in BIS tagset and come with a random static
//! embedding table covering their vocabulary.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{builtin_bis_tagset, Sentence, TagSet, TaggedCorpus, Token};
use crate::embeddings::{EmbeddingStack, OovPolicy, Provider, StackEntry, StaticTable};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub vocab_size: usize,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub embedding_dim: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            vocab_size: 200,
            train: 500,
            dev: 50,
            test: 50,
            min_len: 5,
            max_len: 15,
            embedding_dim: 300,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub train: TaggedCorpus,
    pub dev: TaggedCorpus,
    pub test: TaggedCorpus,
    pub embeddings: StaticTable,
}

impl SyntheticData {
    /// A single frozen static provider named `words`.
    pub fn stack(&self) -> EmbeddingStack {
        EmbeddingStack::new(vec![StackEntry::new("words", Provider::Static(self.embeddings.clone()), false)])
            .expect("one provider")
    }
}

/// Tags used by the unambiguous corpus, cycled over the vocabulary.
pub const UNAMBIGUOUS_TAGS: [&str; 8] = ["N_NN", "V_VM", "J_JJ", "RB", "PSP", "PR_PRP", "CC_CCD", "QT_QTC"];

fn tag(tagset: &TagSet, code: &str) -> usize {
    tagset.ordinal(code).expect("built-in code")
}

fn random_table<R: Rng>(words: &[String], dim: usize, rng: &mut R) -> StaticTable {
    let rows = words
        .iter()
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    StaticTable::from_rows(words.to_vec(), rows, OovPolicy::Zero).expect("non-empty finite table")
}

fn sentence(id: String, tokens: &[(String, usize)]) -> Sentence {
    let toks = tokens
        .iter()
        .map(|(s, t)| Token::new(s, Some(*t)).expect("generated surfaces are valid"))
        .collect();
    Sentence::new(id, toks).expect("generated sentences are non-empty")
}

fn build(
    spec: &SyntheticSpec,
    tagset: Arc<TagSet>,
    vocab: &[String],
    rng: &mut ChaCha8Rng,
    mut gen: impl FnMut(&mut ChaCha8Rng, usize) -> Vec<(String, usize)>,
    prefix: &str,
) -> SyntheticData {
    let mut part = |name: &str, n: usize, rng: &mut ChaCha8Rng| {
        let sentences = (0..n)
            .map(|i| {
                let len = rng.gen_range(spec.min_len..=spec.max_len);
                sentence(format!("{prefix}-{name}:{}", i + 1), &gen(rng, len))
            })
            .collect();
        TaggedCorpus::new(sentences, Arc::clone(&tagset))
    };
    let train = part("train", spec.train, rng);
    let dev = part("dev", spec.dev, rng);
    let test = part("test", spec.test, rng);
    let embeddings = random_table(vocab, spec.embedding_dim, rng);
    SyntheticData { train, dev, test, embeddings }
}

/// Every surface `w<i>` always carries tag `UNAMBIGUOUS_TAGS[i % 8]`, so a
/// perfect tagger exists. Tokens are drawn uniformly from the vocabulary.
pub fn unambiguous_corpus(spec: &SyntheticSpec) -> SyntheticData {
    let tagset = Arc::new(builtin_bis_tagset());
    let tags: Vec<usize> = UNAMBIGUOUS_TAGS.iter().map(|c| tag(&tagset, c)).collect();
    let vocab: Vec<String> = (0..spec.vocab_size).map(|i| format!("w{i:03}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gen = |rng: &mut ChaCha8Rng, len: usize| {
        (0..len)
            .map(|_| {
                let i = rng.gen_range(0..vocab.len());
                (vocab[i].clone(), tags[i % tags.len()])
            })
            .collect()
    };
    build(spec, Arc::clone(&tagset), &vocab, &mut rng, gen, "u")
}

/// Vocabulary layout of the context-ambiguous corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguousLayout {
    /// Plain words with a fixed tag (cycled over [`UNAMBIGUOUS_TAGS`]).
    pub plain: Vec<String>,
    /// Markers that license `V_VM` on the following ambiguous word. Tagged `PSP`.
    pub main_markers: Vec<String>,
    /// Markers that license `V_VAUX` on the following ambiguous word. Tagged `PSP`.
    pub aux_markers: Vec<String>,
    /// Words tagged `V_VM` or `V_VAUX` depending on the preceding marker.
    pub ambiguous: Vec<String>,
}

impl AmbiguousLayout {
    pub fn new(vocab_size: usize) -> AmbiguousLayout {
        let groups = (vocab_size / 10).max(1);
        let name = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i:03}")).collect::<Vec<_>>();
        AmbiguousLayout {
            plain: name("w", vocab_size.saturating_sub(3 * groups).max(1)),
            main_markers: name("m", groups),
            aux_markers: name("x", groups),
            ambiguous: name("a", groups),
        }
    }

    pub fn vocabulary(&self) -> Vec<String> {
        [&self.plain, &self.main_markers, &self.aux_markers, &self.ambiguous]
            .into_iter()
            .flatten()
            .cloned()
            .collect()
    }
}

/// Sentences of plain words interleaved with `marker ambiguous` pairs. The
/// tag of an ambiguous word is `V_VM` after a main marker and `V_VAUX`
/// after an aux marker. Both marker kinds share the tag `PSP`, so the
/// decision depends on the neighboring *surface*: tag-to-tag transitions
/// alone cannot resolve it, a contextual encoder can.
pub fn ambiguous_corpus(spec: &SyntheticSpec) -> SyntheticData {
    let layout = AmbiguousLayout::new(spec.vocab_size);
    let tagset = Arc::new(builtin_bis_tagset());
    let plain_tags: Vec<usize> = UNAMBIGUOUS_TAGS.iter().map(|c| tag(&tagset, c)).collect();
    let (psp, vm, vaux) = (tag(&tagset, "PSP"), tag(&tagset, "V_VM"), tag(&tagset, "V_VAUX"));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let l = layout.clone();
    let gen = move |rng: &mut ChaCha8Rng, len: usize| {
        let mut out: Vec<(String, usize)> = Vec::with_capacity(len + 1);
        while out.len() < len {
            if rng.gen_bool(0.4) {
                let (marker, t) = if rng.gen_bool(0.5) {
                    (l.main_markers.choose(rng).expect("non-empty"), vm)
                } else {
                    (l.aux_markers.choose(rng).expect("non-empty"), vaux)
                };
                out.push((marker.clone(), psp));
                out.push((l.ambiguous.choose(rng).expect("non-empty").clone(), t));
            } else {
                let i = rng.gen_range(0..l.plain.len());
                out.push((l.plain[i].clone(), plain_tags[i % plain_tags.len()]));
            }
        }
        out
    };
    build(spec, tagset, &layout.vocabulary(), &mut rng, gen, "a")
}

/// A bootstrap round with a constructed systematic error.
#[derive(Debug, Clone)]
pub struct BootstrapScenario {
    /// `train` holds only sentences free of the fresh words.
    pub data: SyntheticData,
    /// Surfaces absent from the base training data, so an incumbent model
    /// tags them arbitrarily.
    pub fresh: Vec<String>,
    /// One pre-tokenized sentence per line, each containing a fresh word.
    pub raw_text: String,
    /// The raw sentences with gold tags (the human correction), ids
    /// `<raw_source>:<line>`.
    pub corrected: TaggedCorpus,
}

/// Splits an ambiguous corpus so the first `fresh` plain words never occur
/// in the base training set; training sentences that contain them become
/// the raw text and, with gold tags, its correction.
pub fn bootstrap_scenario(spec: &SyntheticSpec, fresh: usize, raw_source: &str) -> BootstrapScenario {
    let mut data = ambiguous_corpus(spec);
    let fresh: Vec<String> = AmbiguousLayout::new(spec.vocab_size).plain.into_iter().take(fresh).collect();
    let has_fresh = |s: &Sentence| s.surfaces().any(|w| fresh.iter().any(|f| f == w));
    let (raw, base): (Vec<Sentence>, Vec<Sentence>) = data.train.sentences.drain(..).partition(|s| has_fresh(s));
    data.train.sentences = base;
    let mut raw_text = String::new();
    let corrected = raw
        .iter()
        .enumerate()
        .map(|(i, s)| {
            raw_text.push_str(&s.surfaces().collect::<Vec<_>>().join(" "));
            raw_text.push('\n');
            let mut s = s.clone();
            s.id = format!("{raw_source}:{}", i + 1);
            s
        })
        .collect();
    let corrected = TaggedCorpus::new(corrected, Arc::clone(&data.train.tagset));
    BootstrapScenario { data, fresh, raw_text, corrected }
}
