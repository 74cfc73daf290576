//! Linear-chain CRF over tag sequences.
//!
//! A path `y` over emissions `e` (n x T) scores
//! `start[y0] + sum_i e[i][yi] + sum_i A[y(i-1)][yi] + end[y(n-1)]`.
//! Every chain computation runs in log space with max-shifted log-sum-exp.

use rand::Rng;
use thiserror::Error;

use crate::neural::ParamTensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrfError {
    #[error("empty emission sequence")]
    EmptySequence,
    #[error("position {position}: expected {expected} tag scores, found {found}")]
    WidthMismatch { position: usize, expected: usize, found: usize },
    #[error("path has length {found}, expected {expected}")]
    PathLength { expected: usize, found: usize },
    #[error("position {position}: tag ordinal {tag} out of range")]
    InvalidTag { position: usize, tag: usize },
}

/// Transition matrix `A[s][t]` (score of `s -> t`, row-major) plus start and
/// end vectors. All three are learnable.
#[derive(Debug, Clone, PartialEq)]
pub struct Transitions {
    pub matrix: ParamTensor,
    pub start: ParamTensor,
    pub end: ParamTensor,
}

impl Transitions {
    pub fn zeros(num_tags: usize) -> Transitions {
        Transitions {
            matrix: ParamTensor::zeros("crf.transitions", num_tags, num_tags),
            start: ParamTensor::zeros("crf.start", num_tags, 1),
            end: ParamTensor::zeros("crf.end", num_tags, 1),
        }
    }

    pub fn uniform<R: Rng>(num_tags: usize, scale: f64, rng: &mut R) -> Transitions {
        Transitions {
            matrix: ParamTensor::uniform("crf.transitions", num_tags, num_tags, scale, rng),
            start: ParamTensor::uniform("crf.start", num_tags, 1, scale, rng),
            end: ParamTensor::uniform("crf.end", num_tags, 1, scale, rng),
        }
    }

    pub fn num_tags(&self) -> usize {
        self.start.len()
    }

    #[inline]
    pub fn score(&self, from: usize, to: usize) -> f64 {
        self.matrix.value[from * self.num_tags() + to]
    }

    pub fn params_mut(&mut self) -> [&mut ParamTensor; 3] {
        [&mut self.matrix, &mut self.start, &mut self.end]
    }

    pub fn params(&self) -> [&ParamTensor; 3] {
        [&self.matrix, &self.start, &self.end]
    }
}

/// Gradients of the negative log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfGradients {
    pub loss: f64,
    pub emissions: Vec<Vec<f64>>,
    pub transitions: Vec<f64>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn validate(emissions: &[Vec<f64>], trans: &Transitions) -> Result<usize, CrfError> {
    if emissions.is_empty() {
        return Err(CrfError::EmptySequence);
    }
    let t = trans.num_tags();
    for (position, row) in emissions.iter().enumerate() {
        if row.len() != t {
            return Err(CrfError::WidthMismatch { position, expected: t, found: row.len() });
        }
    }
    Ok(t)
}

fn validate_path(emissions: &[Vec<f64>], num_tags: usize, path: &[usize]) -> Result<(), CrfError> {
    if path.len() != emissions.len() {
        return Err(CrfError::PathLength { expected: emissions.len(), found: path.len() });
    }
    if let Some((position, &tag)) = path.iter().enumerate().find(|(_, &y)| y >= num_tags) {
        return Err(CrfError::InvalidTag { position, tag });
    }
    Ok(())
}

pub fn score_path(emissions: &[Vec<f64>], trans: &Transitions, path: &[usize]) -> Result<f64, CrfError> {
    let t = validate(emissions, trans)?;
    validate_path(emissions, t, path)?;
    let mut score = trans.start.value[path[0]] + emissions[0][path[0]];
    for i in 1..path.len() {
        score += trans.score(path[i - 1], path[i]) + emissions[i][path[i]];
    }
    score += trans.end.value[path[path.len() - 1]];
    Ok(score)
}

/// Forward log-potentials `alpha[i][t]`: log-sum over prefixes ending in `t` at `i`.
fn forward(emissions: &[Vec<f64>], trans: &Transitions) -> Vec<Vec<f64>> {
    let t = trans.num_tags();
    let mut alpha = Vec::with_capacity(emissions.len());
    alpha.push((0..t).map(|y| trans.start.value[y] + emissions[0][y]).collect::<Vec<_>>());
    let mut buf = vec![0.0; t];
    for e in &emissions[1..] {
        let prev: &Vec<f64> = alpha.last().unwrap();
        let row: Vec<f64> = (0..t)
            .map(|y| {
                for (s, b) in buf.iter_mut().enumerate() {
                    *b = prev[s] + trans.score(s, y);
                }
                e[y] + log_sum_exp(&buf)
            })
            .collect();
        alpha.push(row);
    }
    alpha
}

/// Backward log-potentials `beta[i][t]`: log-sum over suffixes after `t` at `i`, including `end`.
fn backward(emissions: &[Vec<f64>], trans: &Transitions) -> Vec<Vec<f64>> {
    let n = emissions.len();
    let t = trans.num_tags();
    let mut beta = vec![vec![0.0; t]; n];
    beta[n - 1].copy_from_slice(&trans.end.value);
    let mut buf = vec![0.0; t];
    for i in (0..n - 1).rev() {
        for s in 0..t {
            for (y, b) in buf.iter_mut().enumerate() {
                *b = trans.score(s, y) + emissions[i + 1][y] + beta[i + 1][y];
            }
            beta[i][s] = log_sum_exp(&buf);
        }
    }
    beta
}

fn log_z_from_alpha(alpha: &[Vec<f64>], trans: &Transitions) -> f64 {
    let last = alpha.last().unwrap();
    let terms: Vec<f64> = last.iter().zip(&trans.end.value).map(|(a, e)| a + e).collect();
    log_sum_exp(&terms)
}

/// `log Z`, the log-sum-exp of all path scores.
pub fn log_partition(emissions: &[Vec<f64>], trans: &Transitions) -> Result<f64, CrfError> {
    validate(emissions, trans)?;
    Ok(log_z_from_alpha(&forward(emissions, trans), trans))
}

/// `log Z - score(gold)`; non-negative.
pub fn nll_loss(emissions: &[Vec<f64>], trans: &Transitions, gold: &[usize]) -> Result<f64, CrfError> {
    let gold_score = score_path(emissions, trans, gold)?;
    // The forward recursion and the direct sum round differently.
    Ok((log_partition(emissions, trans)? - gold_score).max(0.0))
}

/// `P(y_i = t | x)` for every position and tag.
pub fn posterior_marginals(emissions: &[Vec<f64>], trans: &Transitions) -> Result<Vec<Vec<f64>>, CrfError> {
    validate(emissions, trans)?;
    let alpha = forward(emissions, trans);
    let beta = backward(emissions, trans);
    let log_z = log_z_from_alpha(&alpha, trans);
    Ok(alpha
        .iter()
        .zip(&beta)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x + y - log_z).exp()).collect())
        .collect())
}

/// Loss and gradients: expected feature counts minus gold feature counts.
pub fn crf_gradients(emissions: &[Vec<f64>], trans: &Transitions, gold: &[usize]) -> Result<CrfGradients, CrfError> {
    let t = validate(emissions, trans)?;
    validate_path(emissions, t, gold)?;
    let n = emissions.len();
    let alpha = forward(emissions, trans);
    let beta = backward(emissions, trans);
    let log_z = log_z_from_alpha(&alpha, trans);

    let mut d_em: Vec<Vec<f64>> = alpha
        .iter()
        .zip(&beta)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x + y - log_z).exp()).collect())
        .collect();
    let mut d_start = d_em[0].clone();
    let mut d_end = d_em[n - 1].clone();
    let mut d_trans = vec![0.0; t * t];
    for i in 1..n {
        for s in 0..t {
            let base = alpha[i - 1][s] - log_z;
            for y in 0..t {
                d_trans[s * t + y] += (base + trans.score(s, y) + emissions[i][y] + beta[i][y]).exp();
            }
        }
    }

    for (i, &y) in gold.iter().enumerate() {
        d_em[i][y] -= 1.0;
        if i > 0 {
            d_trans[gold[i - 1] * t + y] -= 1.0;
        }
    }
    d_start[gold[0]] -= 1.0;
    d_end[gold[n - 1]] -= 1.0;

    let loss = (log_z - score_path(emissions, trans, gold)?).max(0.0);
    Ok(CrfGradients { loss, emissions: d_em, transitions: d_trans, start: d_start, end: d_end })
}

/// Highest-scoring path and its score. Ties go to the lowest tag ordinal,
/// both at each backpointer and at the final position.
pub fn viterbi_decode(emissions: &[Vec<f64>], trans: &Transitions) -> Result<(Vec<usize>, f64), CrfError> {
    let t = validate(emissions, trans)?;
    let n = emissions.len();
    let mut delta: Vec<f64> = (0..t).map(|y| trans.start.value[y] + emissions[0][y]).collect();
    let mut backptr: Vec<Vec<usize>> = Vec::with_capacity(n.saturating_sub(1));
    for e in &emissions[1..] {
        let mut next = vec![0.0; t];
        let mut bp = vec![0; t];
        for y in 0..t {
            let mut best = 0;
            let mut best_score = delta[0] + trans.score(0, y);
            for s in 1..t {
                let cand = delta[s] + trans.score(s, y);
                if cand > best_score {
                    best = s;
                    best_score = cand;
                }
            }
            next[y] = best_score + e[y];
            bp[y] = best;
        }
        delta = next;
        backptr.push(bp);
    }
    let mut last = 0;
    let mut best_final = delta[0] + trans.end.value[0];
    for y in 1..t {
        let cand = delta[y] + trans.end.value[y];
        if cand > best_final {
            last = y;
            best_final = cand;
        }
    }
    let mut path = vec![last; n];
    for i in (1..n).rev() {
        path[i - 1] = backptr[i - 1][path[i]];
    }
    let score = score_path(emissions, trans, &path)?;
    Ok((path, score))
}
