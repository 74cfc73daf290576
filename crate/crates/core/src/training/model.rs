use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Architecture, TrainError, TrainingConfig};
use crate::corpus::{Sentence, TagSet, TaggedCorpus};
use crate::crf::{crf_gradients, nll_loss, viterbi_decode, Transitions};
use crate::embeddings::{word_dropout_mask, EmbeddingStack};
use crate::neural::{BiLstmEncoder, Linear, ParamTensor};

/// Embedding stack -> optional BiLSTM -> emission projection -> CRF.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceModel {
    pub stack: EmbeddingStack,
    pub encoder: Option<BiLstmEncoder>,
    pub projection: Linear,
    pub transitions: Transitions,
    pub tagset: Arc<TagSet>,
    pub config: TrainingConfig,
    /// Dev score of the epoch this model was selected at, if trained.
    pub dev_score: Option<f64>,
}

impl SequenceModel {
    /// Fresh model, initialized from `config.seed`.
    pub fn new(stack: EmbeddingStack, tagset: Arc<TagSet>, config: TrainingConfig) -> Result<SequenceModel, TrainError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let scale = config.init_scale;
        let input = stack.total_dim();
        let encoder = match config.architecture {
            Architecture::BiLstmCrf => {
                Some(BiLstmEncoder::new(input, config.hidden_size, config.hidden_layers, scale, &mut rng))
            }
            Architecture::CrfOnly => None,
        };
        let feat = encoder.as_ref().map_or(input, BiLstmEncoder::output_dim);
        let projection = Linear::new("projection", feat, tagset.len(), scale, &mut rng);
        let transitions = Transitions::uniform(tagset.len(), scale, &mut rng);
        Ok(SequenceModel { stack, encoder, projection, transitions, tagset, config, dev_score: None })
    }

    pub fn num_tags(&self) -> usize {
        self.tagset.len()
    }

    fn features(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, TrainError> {
        match &self.encoder {
            Some(enc) => Ok(enc.encode(inputs)?),
            None => Ok(inputs.to_vec()),
        }
    }

    /// Emission scores for a whole sentence (no dropout, no chunking).
    pub fn emissions(&self, sentence: &Sentence) -> Result<Vec<Vec<f64>>, TrainError> {
        if sentence.is_empty() {
            return Err(TrainError::EmptySentence(sentence.id.clone()));
        }
        let vectors = self.stack.embed_sentence(sentence)?;
        self.features(&vectors)?
            .iter()
            .map(|f| Ok(self.projection.forward(f)?))
            .collect()
    }

    /// Viterbi path over the whole sentence; dropout is never applied.
    pub fn tag_sentence(&self, sentence: &Sentence) -> Result<Vec<usize>, TrainError> {
        let e = self.emissions(sentence)?;
        Ok(viterbi_decode(&e, &self.transitions)?.0)
    }

    /// Negative log-likelihood of the gold path over the whole sentence.
    pub fn loss(&self, sentence: &Sentence) -> Result<f64, TrainError> {
        let gold = gold_of(sentence)?;
        let e = self.emissions(sentence)?;
        Ok(nll_loss(&e, &self.transitions, &gold)?)
    }

    /// Adds the gradient of the training loss for one sentence to every
    /// parameter's `grad` and returns the loss.
    ///
    /// With `dropout` set, whole token vectors are zeroed with probability
    /// `config.word_dropout`. Sentences longer than `config.sequence_length`
    /// are embedded whole, then encoded and scored in consecutive chunks.
    pub fn accumulate_gradients<R: Rng>(&mut self, sentence: &Sentence, dropout: Option<&mut R>) -> Result<f64, TrainError> {
        let gold = gold_of(sentence)?;
        let n = sentence.len();
        let trace = self.stack.forward(sentence)?;
        let mask = match dropout {
            Some(rng) => word_dropout_mask(n, self.config.word_dropout, rng)?,
            None => vec![false; n],
        };
        let mut inputs = trace.vectors.clone();
        for (v, &drop) in inputs.iter_mut().zip(&mask) {
            if drop {
                v.fill(0.0);
            }
        }
        let width = self.stack.total_dim();
        let mut d_inputs = vec![vec![0.0; width]; n];
        let mut loss = 0.0;
        let mut start = 0;
        while start < n {
            let end = (start + self.config.sequence_length).min(n);
            loss += self.chunk_backward(&inputs[start..end], &gold[start..end], &mut d_inputs[start..end])?;
            start = end;
        }
        for (d, &drop) in d_inputs.iter_mut().zip(&mask) {
            if drop {
                d.fill(0.0);
            }
        }
        self.stack.backward(sentence, &trace, &d_inputs);
        Ok(loss)
    }

    fn chunk_backward(&mut self, inputs: &[Vec<f64>], gold: &[usize], d_inputs: &mut [Vec<f64>]) -> Result<f64, TrainError> {
        let enc_trace = match &self.encoder {
            Some(enc) => Some(enc.forward(inputs)?),
            None => None,
        };
        let feats: &[Vec<f64>] = enc_trace.as_ref().map_or(inputs, |t| &t.outputs);
        let emissions = feats
            .iter()
            .map(|f| self.projection.forward(f))
            .collect::<Result<Vec<_>, _>>()?;
        let g = crf_gradients(&emissions, &self.transitions, gold)?;
        for (p, d) in self
            .transitions
            .params_mut()
            .into_iter()
            .zip([&g.transitions, &g.start, &g.end])
        {
            for (a, b) in p.grad.iter_mut().zip(d) {
                *a += b;
            }
        }
        let d_feats: Vec<Vec<f64>> = feats
            .iter()
            .zip(&g.emissions)
            .map(|(f, de)| self.projection.backward(f, de))
            .collect();
        let d_x = match (&mut self.encoder, &enc_trace) {
            (Some(enc), Some(t)) => enc.backward(t, &d_feats),
            _ => d_feats,
        };
        for (slot, d) in d_inputs.iter_mut().zip(d_x) {
            *slot = d;
        }
        Ok(g.loss)
    }

    /// Everything updated by the optimizer.
    pub fn trainable_params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut v = self.stack.trainable_params_mut();
        if let Some(enc) = &mut self.encoder {
            v.extend(enc.params_mut());
        }
        v.extend(self.projection.params_mut());
        v.extend(self.transitions.params_mut());
        v
    }

    pub fn trainable_params(&self) -> Vec<&ParamTensor> {
        let mut v = self.stack.trainable_params();
        if let Some(enc) = &self.encoder {
            v.extend(enc.params());
        }
        v.extend([&self.projection.weight, &self.projection.bias]);
        v.extend(self.transitions.params());
        v
    }

    pub fn zero_grad(&mut self) {
        for p in self.trainable_params_mut() {
            p.zero_grad();
        }
    }

    /// Tags every sentence, optionally across `threads` worker threads.
    /// Output order and content do not depend on the thread count.
    pub fn tag_corpus(&self, corpus: &TaggedCorpus, threads: usize) -> Result<TaggedCorpus, TrainError> {
        let sentences = &corpus.sentences;
        let threads = threads.clamp(1, sentences.len().max(1));
        let paths: Vec<Result<Vec<usize>, TrainError>> = if threads == 1 {
            sentences.iter().map(|s| self.tag_sentence(s)).collect()
        } else {
            let chunk = sentences.len().div_ceil(threads);
            std::thread::scope(|scope| {
                let handles: Vec<_> = sentences
                    .chunks(chunk)
                    .map(|part| scope.spawn(move || part.iter().map(|s| self.tag_sentence(s)).collect::<Vec<_>>()))
                    .collect();
                handles
                    .into_iter()
                    .flat_map(|h| h.join().expect("tagging thread panicked"))
                    .collect()
            })
        };
        let tagged = sentences
            .iter()
            .zip(paths)
            .map(|(s, p)| Ok(s.with_tags(&p?)))
            .collect::<Result<Vec<_>, TrainError>>()?;
        Ok(TaggedCorpus::new(tagged, Arc::clone(&self.tagset)))
    }
}

fn gold_of(sentence: &Sentence) -> Result<Vec<usize>, TrainError> {
    if sentence.is_empty() {
        return Err(TrainError::EmptySentence(sentence.id.clone()));
    }
    sentence
        .gold_path()
        .ok_or_else(|| TrainError::Untagged(sentence.id.clone()))
}
