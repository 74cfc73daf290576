use std::collections::{BTreeSet, HashMap};

use rand::Rng;

use crate::neural::{LstmCell, LstmTrace, ParamTensor};

pub const DEFAULT_CHAR_DIM: usize = 25;
pub const DEFAULT_CHAR_HIDDEN: usize = 25;

/// Character-level BiLSTM word encoder. Output is the final forward hidden
/// state concatenated with the final backward hidden state.
///
/// Row 0 of the character embedding matrix is the unknown-character slot.
#[derive(Debug, Clone, PartialEq)]
pub struct CharEncoder {
    chars: Vec<char>,
    index: HashMap<char, usize>,
    pub embeddings: ParamTensor,
    pub fwd: LstmCell,
    pub bwd: LstmCell,
}

#[derive(Debug, Clone)]
pub struct CharTrace {
    ids: Vec<usize>,
    fwd: LstmTrace,
    bwd: LstmTrace,
}

impl CharEncoder {
    pub fn new<R: Rng>(
        chars: impl IntoIterator<Item = char>,
        char_dim: usize,
        hidden: usize,
        scale: f64,
        rng: &mut R,
    ) -> CharEncoder {
        let chars: Vec<char> = chars.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let embeddings = ParamTensor::uniform("char.embeddings", chars.len() + 1, char_dim, scale, rng);
        let fwd = LstmCell::new("char.fwd", char_dim, hidden, scale, rng);
        let bwd = LstmCell::new("char.bwd", char_dim, hidden, scale, rng);
        CharEncoder::from_parts(chars, embeddings, fwd, bwd)
    }

    /// `chars` must be sorted and unique; `embeddings` has `chars.len() + 1` rows.
    pub fn from_parts(chars: Vec<char>, embeddings: ParamTensor, fwd: LstmCell, bwd: LstmCell) -> CharEncoder {
        assert_eq!(embeddings.rows, chars.len() + 1, "one embedding row per character plus unknown");
        assert_eq!(fwd.hidden(), bwd.hidden(), "directions must share a hidden size");
        let index = chars.iter().enumerate().map(|(i, &c)| (c, i + 1)).collect();
        CharEncoder { chars, index, embeddings, fwd, bwd }
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn dim(&self) -> usize {
        2 * self.fwd.hidden()
    }

    fn ids(&self, surface: &str) -> Vec<usize> {
        surface.chars().map(|c| self.index.get(&c).copied().unwrap_or(0)).collect()
    }

    pub fn forward(&self, surface: &str) -> CharTrace {
        let mut ids = self.ids(surface);
        if ids.is_empty() {
            ids.push(0);
        }
        let xs: Vec<Vec<f64>> = ids.iter().map(|&i| self.embeddings.row(i).to_vec()).collect();
        let fwd = self.fwd.run(&xs, false).expect("char dims are consistent by construction");
        let bwd = self.bwd.run(&xs, true).expect("char dims are consistent by construction");
        CharTrace { ids, fwd, bwd }
    }

    pub fn output(trace: &CharTrace) -> Vec<f64> {
        let mut v = trace.fwd.final_hidden().to_vec();
        v.extend_from_slice(trace.bwd.final_hidden());
        v
    }

    /// Accumulates gradients given `dL/d output`.
    pub fn backward(&mut self, trace: &CharTrace, d_out: &[f64]) {
        let h = self.fwd.hidden();
        let n = trace.ids.len();
        let mut d_f = vec![vec![0.0; h]; n];
        d_f[n - 1].copy_from_slice(&d_out[..h]);
        // the backward direction finishes at position 0
        let mut d_b = vec![vec![0.0; h]; n];
        d_b[0].copy_from_slice(&d_out[h..]);
        let dx_f = self.fwd.backward(&trace.fwd, &d_f);
        let dx_b = self.bwd.backward(&trace.bwd, &d_b);
        for (pos, &id) in trace.ids.iter().enumerate() {
            let row = self.embeddings.grad_row_mut(id);
            for ((g, a), b) in row.iter_mut().zip(&dx_f[pos]).zip(&dx_b[pos]) {
                *g += a + b;
            }
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut v = vec![&mut self.embeddings];
        v.extend(self.fwd.params_mut());
        v.extend(self.bwd.params_mut());
        v
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        let mut v = vec![&self.embeddings];
        v.extend(self.fwd.params());
        v.extend(self.bwd.params());
        v
    }
}

/// Encodes one surface; unknown codepoints use the unknown slot.
pub fn char_encode(params: &CharEncoder, surface: &str) -> Vec<f64> {
    CharEncoder::output(&params.forward(surface))
}
