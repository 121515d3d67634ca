//! Linear-chain CRF over tag indices.
//!
//! A path `y` over `n` positions scores
//! `start[y0] + sum_t E[t][y_t] + sum_t T[y_{t-1}][y_t] + stop[y_{n-1}]`.
//! All arithmetic is f64 and every recursion runs in log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrfParams {
    pub num_tags: usize,
    /// Row-major `[prev][next]`.
    pub transitions: Vec<f64>,
    pub start: Vec<f64>,
    pub stop: Vec<f64>,
}

impl CrfParams {
    pub fn zeros(num_tags: usize) -> Self {
        CrfParams {
            num_tags,
            transitions: vec![0.0; num_tags * num_tags],
            start: vec![0.0; num_tags],
            stop: vec![0.0; num_tags],
        }
    }

    #[inline]
    pub fn trans(&self, prev: usize, next: usize) -> f64 {
        self.transitions[prev * self.num_tags + next]
    }
}

/// Per-token tag scores, `n x K` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Emissions {
    pub len: usize,
    pub num_tags: usize,
    pub data: Vec<f64>,
}

impl Emissions {
    pub fn new(len: usize, num_tags: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), len * num_tags, "emission buffer size");
        Emissions {
            len,
            num_tags,
            data,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let k = rows.first().map_or(0, Vec::len);
        Emissions::new(rows.len(), k, rows.concat())
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.num_tags..(t + 1) * self.num_tags]
    }
}

/// Gradients of the negative log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfGrad {
    pub emissions: Vec<f64>,
    pub transitions: Vec<f64>,
    pub start: Vec<f64>,
    pub stop: Vec<f64>,
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn check(e: &Emissions, crf: &CrfParams) {
    assert_eq!(e.num_tags, crf.num_tags, "emission width vs tag count");
    assert!(e.len >= 1, "empty emission matrix");
}

pub fn score_path(e: &Emissions, crf: &CrfParams, path: &[usize]) -> Result<f64> {
    if path.len() != e.len {
        return Err(Error::LengthMismatch {
            expected: e.len,
            found: path.len(),
        });
    }
    check(e, crf);
    let mut s = crf.start[path[0]] + e.row(0)[path[0]];
    for t in 1..e.len {
        s += crf.trans(path[t - 1], path[t]) + e.row(t)[path[t]];
    }
    Ok(s + crf.stop[path[e.len - 1]])
}

/// Forward log-potentials: `alpha[t][y]` is the log-sum of all prefixes ending in `y` at `t`.
fn forward(e: &Emissions, crf: &CrfParams) -> Vec<f64> {
    let (n, k) = (e.len, e.num_tags);
    let mut alpha = vec![0.0; n * k];
    for y in 0..k {
        alpha[y] = crf.start[y] + e.row(0)[y];
    }
    let mut buf = vec![0.0; k];
    for t in 1..n {
        for y in 0..k {
            for (p, b) in buf.iter_mut().enumerate() {
                *b = alpha[(t - 1) * k + p] + crf.trans(p, y);
            }
            alpha[t * k + y] = log_sum_exp(&buf) + e.row(t)[y];
        }
    }
    alpha
}

/// Backward log-potentials: `beta[t][y]` is the log-sum of all suffixes after `y` at `t`, incl. stop.
fn backward(e: &Emissions, crf: &CrfParams) -> Vec<f64> {
    let (n, k) = (e.len, e.num_tags);
    let mut beta = vec![0.0; n * k];
    beta[(n - 1) * k..].copy_from_slice(&crf.stop);
    let mut buf = vec![0.0; k];
    for t in (0..n - 1).rev() {
        for y in 0..k {
            for (nx, b) in buf.iter_mut().enumerate() {
                *b = crf.trans(y, nx) + e.row(t + 1)[nx] + beta[(t + 1) * k + nx];
            }
            beta[t * k + y] = log_sum_exp(&buf);
        }
    }
    beta
}

fn log_z_from_alpha(alpha: &[f64], e: &Emissions, crf: &CrfParams) -> f64 {
    let k = e.num_tags;
    let last = &alpha[(e.len - 1) * k..];
    let fin: Vec<f64> = last.iter().zip(&crf.stop).map(|(a, s)| a + s).collect();
    log_sum_exp(&fin)
}

/// Log partition function over all `K^n` paths.
pub fn forward_log_z(e: &Emissions, crf: &CrfParams) -> f64 {
    check(e, crf);
    log_z_from_alpha(&forward(e, crf), e, crf)
}

/// Best path and its score. Ties go to the lower tag index, both at each
/// backpointer and at the final position.
pub fn viterbi(e: &Emissions, crf: &CrfParams) -> (Vec<usize>, f64) {
    check(e, crf);
    let (n, k) = (e.len, e.num_tags);
    let mut delta: Vec<f64> = (0..k).map(|y| crf.start[y] + e.row(0)[y]).collect();
    let mut back = vec![0usize; n * k];
    let mut next = vec![0.0; k];
    for t in 1..n {
        for y in 0..k {
            let mut best = 0;
            let mut best_score = delta[0] + crf.trans(0, y);
            for (p, &d) in delta.iter().enumerate().skip(1) {
                let s = d + crf.trans(p, y);
                if s > best_score {
                    best = p;
                    best_score = s;
                }
            }
            back[t * k + y] = best;
            next[y] = best_score + e.row(t)[y];
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut last = 0;
    let mut best_score = delta[0] + crf.stop[0];
    for y in 1..k {
        let s = delta[y] + crf.stop[y];
        if s > best_score {
            last = y;
            best_score = s;
        }
    }
    let mut path = vec![0; n];
    path[n - 1] = last;
    for t in (1..n).rev() {
        path[t - 1] = back[t * k + path[t]];
    }
    (path, best_score)
}

/// `logZ - score(gold)` and its gradients (expected counts minus gold counts).
pub fn nll_and_grad(e: &Emissions, crf: &CrfParams, gold: &[usize]) -> Result<(f64, CrfGrad)> {
    let gold_score = score_path(e, crf, gold)?;
    let (n, k) = (e.len, e.num_tags);
    let alpha = forward(e, crf);
    let beta = backward(e, crf);
    let log_z = log_z_from_alpha(&alpha, e, crf);

    let mut grad = CrfGrad {
        emissions: vec![0.0; n * k],
        transitions: vec![0.0; k * k],
        start: vec![0.0; k],
        stop: vec![0.0; k],
    };
    for t in 0..n {
        for y in 0..k {
            let i = t * k + y;
            grad.emissions[i] = (alpha[i] + beta[i] - log_z).exp();
        }
    }
    grad.start.copy_from_slice(&grad.emissions[..k]);
    grad.stop.copy_from_slice(&grad.emissions[(n - 1) * k..]);
    for t in 1..n {
        for p in 0..k {
            let a = alpha[(t - 1) * k + p];
            for y in 0..k {
                let lp = a + crf.trans(p, y) + e.row(t)[y] + beta[t * k + y] - log_z;
                grad.transitions[p * k + y] += lp.exp();
            }
        }
    }

    grad.start[gold[0]] -= 1.0;
    grad.stop[gold[n - 1]] -= 1.0;
    for (t, &y) in gold.iter().enumerate() {
        grad.emissions[t * k + y] -= 1.0;
        if t > 0 {
            grad.transitions[gold[t - 1] * k + y] -= 1.0;
        }
    }
    // Rounding can push an exact-zero loss slightly negative.
    let loss = (log_z - gold_score).max(0.0);
    Ok((loss, grad))
}
