use rand::Rng;

use super::{check_dim, matvec, matvec_t_acc, outer_acc, sigmoid, NeuralError, ParamTensor};

/// LSTM cell with stacked gate weights in (input, forget, cell, output) order.
///
/// `w` is `4h x d`, `u` is `4h x h`, `bias` is `4h`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub w: ParamTensor,
    pub u: ParamTensor,
    pub bias: ParamTensor,
}

/// Everything one step's backward pass needs.
#[derive(Debug, Clone)]
pub struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

/// One directional pass over a sequence. `steps` are in processing order.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    steps: Vec<StepCache>,
    reverse: bool,
}

impl LstmTrace {
    /// Hidden states indexed by input position.
    pub fn outputs(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = self.steps.iter().map(|s| s.h.clone()).collect();
        if self.reverse {
            out.reverse();
        }
        out
    }

    /// Hidden state after the last processed step.
    pub fn final_hidden(&self) -> &[f64] {
        &self.steps.last().expect("trace is never empty").h
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// One LSTM step: `(h, c)` from `(x, h_prev, c_prev)`.
pub fn lstm_cell_step(
    cell: &LstmCell,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), NeuralError> {
    let s = cell.step(x, h_prev, c_prev)?;
    Ok((s.h, s.c))
}

impl LstmCell {
    /// Uniform(-scale, scale) weights, zero biases except the forget gate at 1.0.
    pub fn new<R: Rng>(name: &str, input_dim: usize, hidden: usize, scale: f64, rng: &mut R) -> LstmCell {
        let w = ParamTensor::uniform(format!("{name}.w"), 4 * hidden, input_dim, scale, rng);
        let u = ParamTensor::uniform(format!("{name}.u"), 4 * hidden, hidden, scale, rng);
        let mut bias = ParamTensor::zeros(format!("{name}.bias"), 4 * hidden, 1);
        bias.value[hidden..2 * hidden].fill(1.0);
        LstmCell { w, u, bias }
    }

    pub fn zeros(name: &str, input_dim: usize, hidden: usize) -> LstmCell {
        LstmCell {
            w: ParamTensor::zeros(format!("{name}.w"), 4 * hidden, input_dim),
            u: ParamTensor::zeros(format!("{name}.u"), 4 * hidden, hidden),
            bias: ParamTensor::zeros(format!("{name}.bias"), 4 * hidden, 1),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols
    }

    pub fn hidden(&self) -> usize {
        self.u.cols
    }

    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<StepCache, NeuralError> {
        let h = self.hidden();
        check_dim("lstm input", self.input_dim(), x.len())?;
        check_dim("lstm hidden state", h, h_prev.len())?;
        check_dim("lstm cell state", h, c_prev.len())?;

        let mut z = self.bias.value.clone();
        matvec(&self.w.value, 4 * h, self.w.cols, x, &mut z);
        matvec(&self.u.value, 4 * h, h, h_prev, &mut z);

        let i: Vec<f64> = z[..h].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[2 * h..3 * h].iter().map(|&v| v.tanh()).collect();
        let o: Vec<f64> = z[3 * h..].iter().map(|&v| sigmoid(v)).collect();
        let c: Vec<f64> = (0..h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h_new: Vec<f64> = (0..h).map(|k| o[k] * tanh_c[k]).collect();

        Ok(StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            g,
            o,
            tanh_c,
            h: h_new,
            c,
        })
    }

    /// Runs over `xs` from zero state, right-to-left when `reverse`.
    pub fn run(&self, xs: &[Vec<f64>], reverse: bool) -> Result<LstmTrace, NeuralError> {
        if xs.is_empty() {
            return Err(NeuralError::EmptySequence);
        }
        let hidden = self.hidden();
        let mut steps: Vec<StepCache> = Vec::with_capacity(xs.len());
        let zeros = vec![0.0; hidden];
        for t in 0..xs.len() {
            let pos = if reverse { xs.len() - 1 - t } else { t };
            let (h_prev, c_prev) = match steps.last() {
                Some(s) => (s.h.as_slice(), s.c.as_slice()),
                None => (zeros.as_slice(), zeros.as_slice()),
            };
            let s = self.step(&xs[pos], h_prev, c_prev)?;
            steps.push(s);
        }
        Ok(LstmTrace { steps, reverse })
    }

    /// Backpropagation through time. `d_out` holds `dL/dh` per input
    /// position; returns `dL/dx` per input position and accumulates
    /// parameter gradients.
    pub fn backward(&mut self, trace: &LstmTrace, d_out: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let h = self.hidden();
        let n = trace.steps.len();
        let mut dx_all = vec![Vec::new(); n];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];

        for t in (0..n).rev() {
            let s = &trace.steps[t];
            let pos = if trace.reverse { n - 1 - t } else { t };
            for k in 0..h {
                let dh = d_out[pos][k] + dh_next[k];
                let d_o = dh * s.tanh_c[k];
                let dc = dh * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]) + dc_next[k];
                let d_i = dc * s.g[k];
                let d_g = dc * s.i[k];
                let d_f = dc * s.c_prev[k];
                dc_next[k] = dc * s.f[k];
                dz[k] = d_i * s.i[k] * (1.0 - s.i[k]);
                dz[h + k] = d_f * s.f[k] * (1.0 - s.f[k]);
                dz[2 * h + k] = d_g * (1.0 - s.g[k] * s.g[k]);
                dz[3 * h + k] = d_o * s.o[k] * (1.0 - s.o[k]);
            }
            outer_acc(&mut self.w.grad, &dz, &s.x);
            outer_acc(&mut self.u.grad, &dz, &s.h_prev);
            for (g, d) in self.bias.grad.iter_mut().zip(&dz) {
                *g += d;
            }
            let mut dx = vec![0.0; s.x.len()];
            matvec_t_acc(&self.w.value, 4 * h, self.w.cols, &dz, &mut dx);
            dh_next.fill(0.0);
            matvec_t_acc(&self.u.value, 4 * h, h, &dz, &mut dh_next);
            dx_all[pos] = dx;
        }
        dx_all
    }

    pub fn params_mut(&mut self) -> [&mut ParamTensor; 3] {
        [&mut self.w, &mut self.u, &mut self.bias]
    }

    pub fn params(&self) -> [&ParamTensor; 3] {
        [&self.w, &self.u, &self.bias]
    }
}

/// Stacked bidirectional LSTM. Layer `l + 1` consumes the `[fwd; bwd]`
/// outputs of layer `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmEncoder {
    pub layers: Vec<(LstmCell, LstmCell)>,
}

#[derive(Debug, Clone)]
pub struct BiLstmTrace {
    layers: Vec<(LstmTrace, LstmTrace)>,
    pub outputs: Vec<Vec<f64>>,
}

fn concat_directions(fwd: &LstmTrace, bwd: &LstmTrace) -> Vec<Vec<f64>> {
    fwd.outputs()
        .into_iter()
        .zip(bwd.outputs())
        .map(|(mut f, b)| {
            f.extend_from_slice(&b);
            f
        })
        .collect()
}

impl BiLstmEncoder {
    pub fn new<R: Rng>(input_dim: usize, hidden: usize, layers: usize, scale: f64, rng: &mut R) -> BiLstmEncoder {
        let mut stack = Vec::with_capacity(layers);
        let mut d = input_dim;
        for l in 0..layers {
            let fwd = LstmCell::new(&format!("encoder.{l}.fwd"), d, hidden, scale, rng);
            let bwd = LstmCell::new(&format!("encoder.{l}.bwd"), d, hidden, scale, rng);
            stack.push((fwd, bwd));
            d = 2 * hidden;
        }
        BiLstmEncoder { layers: stack }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].0.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.layers.last().map(|(f, _)| f.hidden()).unwrap_or(0)
    }

    pub fn encode(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NeuralError> {
        Ok(self.forward(inputs)?.outputs)
    }

    pub fn forward(&self, inputs: &[Vec<f64>]) -> Result<BiLstmTrace, NeuralError> {
        if inputs.is_empty() {
            return Err(NeuralError::EmptySequence);
        }
        let mut traces = Vec::with_capacity(self.layers.len());
        let mut current: Vec<Vec<f64>> = inputs.to_vec();
        for (fwd, bwd) in &self.layers {
            let tf = fwd.run(&current, false)?;
            let tb = bwd.run(&current, true)?;
            current = concat_directions(&tf, &tb);
            traces.push((tf, tb));
        }
        Ok(BiLstmTrace { layers: traces, outputs: current })
    }

    /// Returns `dL/d input` per position.
    pub fn backward(&mut self, trace: &BiLstmTrace, d_outputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut d_current = d_outputs.to_vec();
        for ((fwd, bwd), (tf, tb)) in self.layers.iter_mut().zip(&trace.layers).rev() {
            let h = fwd.hidden();
            let d_f: Vec<Vec<f64>> = d_current.iter().map(|d| d[..h].to_vec()).collect();
            let d_b: Vec<Vec<f64>> = d_current.iter().map(|d| d[h..].to_vec()).collect();
            let dx_f = fwd.backward(tf, &d_f);
            let dx_b = bwd.backward(tb, &d_b);
            d_current = dx_f
                .into_iter()
                .zip(dx_b)
                .map(|(a, b)| a.iter().zip(&b).map(|(x, y)| x + y).collect())
                .collect();
        }
        d_current
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.layers
            .iter_mut()
            .flat_map(|(f, b)| f.params_mut().into_iter().chain(b.params_mut()))
            .collect()
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        self.layers
            .iter()
            .flat_map(|(f, b)| f.params().into_iter().chain(b.params()))
            .collect()
    }
}
