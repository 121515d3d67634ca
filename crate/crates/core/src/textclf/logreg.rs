use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::nn::{axpy, dot, sigmoid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Coefficient of `1/2 |w|^2` (the bias is not penalized).
    pub l2: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            learning_rate: 0.5,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub w: Vec<f64>,
    pub b: f64,
    /// Full-batch objective after each step.
    pub losses: Vec<f64>,
}

impl LogRegModel {
    pub fn zeros(dim: usize) -> Self {
        LogRegModel {
            w: vec![0.0; dim],
            b: 0.0,
            losses: Vec::new(),
        }
    }

    /// Positive-class probability.
    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.w.len() {
            return Err(Error::dim("logistic regression input", self.w.len(), x.len()));
        }
        Ok(sigmoid(dot(&self.w, x) + self.b))
    }

    /// Weighted binary cross-entropy of one example and its gradient
    /// `(dw, db)`. The weight multiplies the unweighted terms last.
    pub fn example_loss_grad(&self, x: &[f64], label: Label, weight: f64) -> (f64, Vec<f64>, f64) {
        let z = dot(&self.w, x) + self.b;
        let y = if label.is_positive() { 1.0 } else { 0.0 };
        // log(1 + e^z) - y z, stable for large |z|.
        let loss = z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
        let r = sigmoid(z) - y;
        let dw: Vec<f64> = x.iter().map(|&xi| r * xi).collect();
        (weight * loss, dw.into_iter().map(|g| weight * g).collect(), weight * r)
    }
}

/// Full-batch gradient descent on the mean weighted cross-entropy plus L2,
/// from zero weights.
pub fn train_logreg(xs: &[Vec<f64>], labels: &[Label], positive_weight: f64, config: &LogRegConfig) -> Result<LogRegModel> {
    let dim = super::check_xy(xs, labels)?;
    let n = xs.len() as f64;
    let mut m = LogRegModel::zeros(dim);
    for _ in 0..config.epochs {
        let mut gw = vec![0.0; dim];
        let mut gb = 0.0;
        let mut loss = 0.0;
        for (x, &l) in xs.iter().zip(labels) {
            let wt = if l.is_positive() { positive_weight } else { 1.0 };
            let (li, dw, db) = m.example_loss_grad(x, l, wt);
            loss += li;
            axpy(1.0, &dw, &mut gw);
            gb += db;
        }
        loss = loss / n + 0.5 * config.l2 * dot(&m.w, &m.w);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch: m.losses.len() + 1,
                batch: 0,
            });
        }
        m.losses.push(loss);
        for (w, g) in m.w.iter_mut().zip(&gw) {
            *w -= config.learning_rate * (g / n + config.l2 * *w);
        }
        m.b -= config.learning_rate * gb / n;
    }
    Ok(m)
}
