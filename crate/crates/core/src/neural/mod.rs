//! Dense numeric core for the tagger: parameter tensors with gradient
//! accumulators, linear layers, LSTM cells, a stacked BiLSTM encoder and SGD.
//!
//! There is no general autodiff graph. Each layer's forward pass returns a
//! trace holding exactly what its backward pass needs, so backward cannot be
//! called without a recorded forward.

mod linear;
mod lstm;
mod optim;

use rand::Rng;
use thiserror::Error;

pub use linear::{linear_forward, Linear};
pub use lstm::{lstm_cell_step, BiLstmEncoder, BiLstmTrace, LstmCell, LstmTrace, StepCache};
pub use optim::{global_grad_norm, sgd_step};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch { context: &'static str, expected: usize, found: usize },
    #[error("empty input sequence")]
    EmptySequence,
    #[error("non-finite gradient in parameter {param} (index {index})")]
    NonFiniteGradient { param: String, index: usize },
    #[error("invalid learning rate {0}")]
    InvalidLearningRate(f64),
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<(), NeuralError> {
    if expected == found {
        Ok(())
    } else {
        Err(NeuralError::DimensionMismatch { context, expected, found })
    }
}

/// A named row-major matrix (or column vector when `cols == 1`) with a
/// same-shape gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl ParamTensor {
    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> ParamTensor {
        ParamTensor {
            name: name.into(),
            rows,
            cols,
            value: vec![0.0; rows * cols],
            grad: vec![0.0; rows * cols],
        }
    }

    /// Uniform(-scale, scale) initialization.
    pub fn uniform<R: Rng>(name: impl Into<String>, rows: usize, cols: usize, scale: f64, rng: &mut R) -> ParamTensor {
        let mut t = ParamTensor::zeros(name, rows, cols);
        for v in &mut t.value {
            *v = rng.gen_range(-scale..=scale);
        }
        t
    }

    pub fn from_values(name: impl Into<String>, rows: usize, cols: usize, value: Vec<f64>) -> ParamTensor {
        assert_eq!(value.len(), rows * cols, "value length must equal rows * cols");
        ParamTensor { name: name.into(), rows, cols, grad: vec![0.0; value.len()], value }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.value[r * self.cols..(r + 1) * self.cols]
    }

    pub fn grad_row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.grad[r * c..(r + 1) * c]
    }

    pub fn zero_grad(&mut self) {
        self.grad.clear();
        self.grad.resize(self.value.len(), 0.0);
    }

    pub fn is_finite(&self) -> bool {
        self.value.iter().all(|v| v.is_finite())
    }
}

/// `y = M x` for a row-major `rows x cols` matrix.
pub(crate) fn matvec(m: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    for (r, out) in y.iter_mut().enumerate().take(rows) {
        let row = &m[r * cols..(r + 1) * cols];
        *out += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `x += M^T y`.
pub(crate) fn matvec_t_acc(m: &[f64], rows: usize, cols: usize, y: &[f64], x: &mut [f64]) {
    for r in 0..rows {
        let yr = y[r];
        if yr == 0.0 {
            continue;
        }
        let row = &m[r * cols..(r + 1) * cols];
        for (xi, a) in x.iter_mut().zip(row) {
            *xi += a * yr;
        }
    }
}

/// `G += y x^T`.
pub(crate) fn outer_acc(g: &mut [f64], y: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, &yr) in y.iter().enumerate() {
        if yr == 0.0 {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for (gi, xi) in row.iter_mut().zip(x) {
            *gi += yr * xi;
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
