use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::nn::{axpy, fill_uniform, gemv_acc, gemv_t_acc};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NnConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub hidden: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for NnConfig {
    fn default() -> Self {
        NnConfig {
            learning_rate: 3e-5,
            batch_size: 16,
            epochs: 10,
            hidden: 256,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One ReLU hidden layer and a two-way softmax (index 1 is positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub input: usize,
    pub hidden: usize,
    /// `hidden x input`
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `2 x hidden`
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    /// Mean training loss per epoch.
    pub losses: Vec<f64>,
}

impl MlpModel {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        MlpModel {
            input,
            hidden,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; 2 * hidden],
            b2: vec![0.0; 2],
            losses: Vec::new(),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(input: usize, hidden: usize, seed: u64) -> Self {
        let mut m = MlpModel::zeros(input, hidden);
        let mut r = rng::stream(seed, 0);
        fill_uniform(&mut r, (6.0 / (input + hidden) as f64).sqrt(), &mut m.w1);
        fill_uniform(&mut r, (6.0 / (hidden + 2) as f64).sqrt(), &mut m.w2);
        m
    }

    pub fn tensors(&self) -> [(&'static str, &[f64]); 4] {
        [("w1", &self.w1), ("b1", &self.b1), ("w2", &self.w2), ("b2", &self.b2)]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    fn hidden_and_logits(&self, x: &[f64]) -> (Vec<f64>, [f64; 2]) {
        let mut h = self.b1.clone();
        gemv_acc(&self.w1, x, &mut h);
        h.iter_mut().for_each(|v| *v = v.max(0.0));
        let mut z = [self.b2[0], self.b2[1]];
        gemv_acc(&self.w2, &h, &mut z);
        (h, z)
    }

    /// Softmax probabilities `[negative, positive]`.
    pub fn probabilities(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.input {
            return Err(Error::dim("network input", self.input, x.len()));
        }
        Ok(softmax(self.hidden_and_logits(x).1))
    }

    /// Weighted cross-entropy of one example, accumulating its gradient into `grad`.
    pub fn example_loss_grad(&self, x: &[f64], label: Label, weight: f64, grad: &mut MlpModel) -> f64 {
        let (h, z) = self.hidden_and_logits(x);
        let p = softmax(z);
        let y = usize::from(label.is_positive());
        let m = z[0].max(z[1]);
        let log_norm = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
        let loss = weight * (log_norm - z[y]);
        let mut dz = [p[0], p[1]];
        dz[y] -= 1.0;
        let mut dh = vec![0.0; self.hidden];
        gemv_t_acc(&self.w2, &dz, &mut dh);
        for (d, &hv) in dh.iter_mut().zip(&h) {
            if hv <= 0.0 {
                *d = 0.0;
            }
        }
        // The weight multiplies each finished unweighted term.
        axpy(weight, &dz, &mut grad.b2);
        weighted_outer_acc(&mut grad.w2, weight, &dz, &h);
        axpy(weight, &dh, &mut grad.b1);
        weighted_outer_acc(&mut grad.w1, weight, &dh, x);
        loss
    }
}

/// `G += w (v x^T)`, with `w` applied after each product.
fn weighted_outer_acc(g: &mut [f64], w: f64, v: &[f64], x: &[f64]) {
    for (&s, row) in v.iter().zip(g.chunks_exact_mut(x.len())) {
        if s != 0.0 {
            for (gi, &xi) in row.iter_mut().zip(x) {
                *gi += w * (s * xi);
            }
        }
    }
}

fn softmax(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e = [(z[0] - m).exp(), (z[1] - m).exp()];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    fn new(model: &MlpModel) -> Self {
        let zeros: Vec<Vec<f64>> = model.tensors().iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        Adam {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, model: &mut MlpModel, grad: &MlpModel, c: &NnConfig) {
        self.t += 1;
        let bc1 = 1.0 - c.beta1.powi(self.t);
        let bc2 = 1.0 - c.beta2.powi(self.t);
        for (k, (p, (_, g))) in model.tensors_mut().into_iter().zip(grad.tensors()).enumerate() {
            for i in 0..p.len() {
                let m = &mut self.m[k][i];
                let v = &mut self.v[k][i];
                *m = c.beta1 * *m + (1.0 - c.beta1) * g[i];
                *v = c.beta2 * *v + (1.0 - c.beta2) * g[i] * g[i];
                p[i] -= c.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + c.epsilon);
            }
        }
    }
}

/// Minibatch Adam on the mean weighted cross-entropy per batch.
pub fn train_nn(xs: &[Vec<f64>], labels: &[Label], positive_weight: f64, config: &NnConfig, seed: u64) -> Result<MlpModel> {
    let dim = super::check_xy(xs, labels)?;
    if config.hidden == 0 || config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::Config("network hidden, batch_size and epochs must be positive".into()));
    }
    let mut model = MlpModel::init(dim, config.hidden, seed);
    let mut adam = Adam::new(&model);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    for epoch in 1..=config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(seed, epoch as u64));
        let mut total = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grad = MlpModel::zeros(dim, config.hidden);
            let mut loss = 0.0;
            for &i in batch {
                let w = if labels[i].is_positive() { positive_weight } else { 1.0 };
                loss += model.example_loss_grad(&xs[i], labels[i], w, &mut grad);
            }
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            total += loss;
            let scale = 1.0 / batch.len() as f64;
            for t in grad.tensors_mut() {
                t.iter_mut().for_each(|g| *g *= scale);
            }
            adam.step(&mut model, &grad, config);
        }
        model.losses.push(total / xs.len() as f64);
    }
    Ok(model)
}
