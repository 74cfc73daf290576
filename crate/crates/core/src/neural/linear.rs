use rand::Rng;

use super::{check_dim, matvec, matvec_t_acc, outer_acc, NeuralError, ParamTensor};

/// `W x + b`.
pub fn linear_forward(weight: &ParamTensor, bias: &ParamTensor, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
    check_dim("linear input", weight.cols, x.len())?;
    check_dim("linear bias", weight.rows, bias.len())?;
    let mut y = bias.value.clone();
    matvec(&weight.value, weight.rows, weight.cols, x, &mut y);
    Ok(y)
}

/// Affine projection, used for tag emission scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
}

impl Linear {
    pub fn new<R: Rng>(name: &str, input_dim: usize, output_dim: usize, scale: f64, rng: &mut R) -> Linear {
        Linear {
            weight: ParamTensor::uniform(format!("{name}.weight"), output_dim, input_dim, scale, rng),
            bias: ParamTensor::zeros(format!("{name}.bias"), output_dim, 1),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        linear_forward(&self.weight, &self.bias, x)
    }

    /// Accumulates parameter gradients for one input and returns `dL/dx`.
    pub fn backward(&mut self, x: &[f64], dy: &[f64]) -> Vec<f64> {
        outer_acc(&mut self.weight.grad, dy, x);
        for (g, d) in self.bias.grad.iter_mut().zip(dy) {
            *g += d;
        }
        let mut dx = vec![0.0; x.len()];
        matvec_t_acc(&self.weight.value, self.weight.rows, self.weight.cols, dy, &mut dx);
        dx
    }

    pub fn params_mut(&mut self) -> [&mut ParamTensor; 2] {
        [&mut self.weight, &mut self.bias]
    }
}
