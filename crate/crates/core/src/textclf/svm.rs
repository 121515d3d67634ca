use std::borrow::Cow;

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::metrics::clf_prf;
use crate::rng;

/// Kernel matrices up to this many rows are precomputed; larger problems
/// compute rows on demand.
const DENSE_LIMIT: usize = 6000;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    /// RBF width; `None` means `1 / dim`.
    pub gamma: Option<f64>,
    /// Fixed C; `None` runs the grid search.
    pub c: Option<f64>,
    pub c_grid: Vec<f64>,
    pub cv_folds: usize,
    /// KKT tolerance.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            gamma: None,
            c: None,
            c_grid: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            cv_folds: 3,
            tolerance: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub coef: Vec<f64>,
    pub b: f64,
    pub gamma: f64,
    pub c: f64,
    pub c_pos: f64,
    pub c_neg: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl SvmModel {
    /// `f(x) = sum_i coef_i K(sv_i, x) + b`.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        let mut f = self.b;
        for (sv, &c) in self.support_vectors.iter().zip(&self.coef) {
            f += c * rbf_kernel(sv, x, self.gamma)?;
        }
        Ok(f)
    }
}

/// `exp(-gamma * |x - z|^2)`.
pub fn rbf_kernel(x: &[f64], z: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::dim("kernel input", x.len(), z.len()));
    }
    let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-gamma * d2).exp())
}

fn sq_dist(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum()
}

struct Kernel<'a> {
    xs: &'a [Vec<f64>],
    gamma: f64,
    dense: Option<Vec<f64>>,
}

impl<'a> Kernel<'a> {
    fn new(xs: &'a [Vec<f64>], gamma: f64) -> Self {
        let n = xs.len();
        let dense = (n <= DENSE_LIMIT).then(|| {
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                k[i * n + i] = 1.0;
                for j in 0..i {
                    let v = (-gamma * sq_dist(&xs[i], &xs[j])).exp();
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
            k
        });
        Kernel { xs, gamma, dense }
    }

    fn row(&self, i: usize) -> Cow<'_, [f64]> {
        let n = self.xs.len();
        match &self.dense {
            Some(k) => Cow::Borrowed(&k[i * n..(i + 1) * n]),
            None => Cow::Owned(
                self.xs
                    .iter()
                    .map(|x| (-self.gamma * sq_dist(&self.xs[i], x)).exp())
                    .collect(),
            ),
        }
    }
}

/// Solution of the weighted C-SVM dual, before support-vector extraction.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub b: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// SMO with second-order working-set selection on
/// `min 1/2 a'Qa - e'a` s.t. `y'a = 0`, `0 <= a_i <= c_i`.
pub fn solve_dual(xs: &[Vec<f64>], y: &[f64], c: &[f64], gamma: f64, tol: f64, max_iter: usize) -> DualSolution {
    let n = xs.len();
    let kernel = Kernel::new(xs, gamma);
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let up = |a: &[f64], t: usize| (y[t] > 0.0 && a[t] < c[t]) || (y[t] < 0.0 && a[t] > 0.0);
    let low = |a: &[f64], t: usize| (y[t] > 0.0 && a[t] > 0.0) || (y[t] < 0.0 && a[t] < c[t]);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if up(&alpha, t) && v > gmax {
                gmax = v;
                i = t;
            }
        }
        if i == usize::MAX {
            converged = true;
            break;
        }
        let ki = kernel.row(i);
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !low(&alpha, t) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            let diff = gmax - v;
            if diff > 0.0 {
                let quad = (1.0 + 1.0 - 2.0 * ki[t]).max(TAU);
                let obj = -diff * diff / quad;
                if obj < best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax - gmin < tol || j == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;
        let kj = kernel.row(j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let quad = (2.0 - 2.0 * ki[j]).max(TAU);
        let (ci, cj) = (c[i], c[j]);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
    }

    // Bias from the free variables, or the midpoint of the feasible range.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c[t];
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    DualSolution {
        alpha,
        b: -rho,
        converged,
        iterations,
    }
}

pub(crate) fn default_gamma(config: &SvmConfig, dim: usize) -> f64 {
    config.gamma.unwrap_or(1.0 / dim.max(1) as f64)
}

/// Train with a fixed `c`; positives get the box bound `c * positive_weight`.
pub fn train_svm(xs: &[Vec<f64>], labels: &[Label], c: f64, positive_weight: f64, config: &SvmConfig) -> Result<SvmModel> {
    let dim = super::check_xy(xs, labels)?;
    if !(c > 0.0 && positive_weight > 0.0) {
        return Err(Error::Config("C and the class weight must be positive".into()));
    }
    let gamma = default_gamma(config, dim);
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let (c_pos, c_neg) = (c * positive_weight, c);
    let bounds: Vec<f64> = labels.iter().map(|l| if l.is_positive() { c_pos } else { c_neg }).collect();
    let sol = solve_dual(xs, &y, &bounds, gamma, config.tolerance, config.max_iter);
    if !sol.converged {
        warn!("SMO stopped after {} iterations without meeting the KKT tolerance", sol.iterations);
    }
    let mut model = SvmModel {
        support_vectors: Vec::new(),
        coef: Vec::new(),
        b: sol.b,
        gamma,
        c,
        c_pos,
        c_neg,
        converged: sol.converged,
        iterations: sol.iterations,
    };
    for (t, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            model.support_vectors.push(xs[t].clone());
            model.coef.push(a * y[t]);
        }
    }
    Ok(model)
}

/// Fold assignment with the classes spread evenly: each class is shuffled
/// and dealt round-robin.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Vec<usize> {
    let mut fold = vec![0; labels.len()];
    let mut rng = rng::seeded(seed);
    for positive in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_positive() == positive).collect();
        idx.shuffle(&mut rng);
        for (r, i) in idx.into_iter().enumerate() {
            fold[i] = r % k;
        }
    }
    fold
}

/// Pick C by mean positive-class F1 over stratified cross-validation.
/// Ties go to the smaller C; folds whose training part holds one class are skipped.
#[allow(non_snake_case)]
pub fn grid_search_C(xs: &[Vec<f64>], labels: &[Label], positive_weight: f64, config: &SvmConfig, seed: u64) -> Result<f64> {
    super::check_xy(xs, labels)?;
    let mut grid = config.c_grid.clone();
    if grid.is_empty() {
        return Err(Error::Config("C grid is empty".into()));
    }
    grid.sort_by(f64::total_cmp);
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let k = config.cv_folds.max(2);
    let fold = stratified_folds(labels, k, seed);
    let mut best = (grid[0], f64::NEG_INFINITY);
    for &c in &grid {
        let mut scores = Vec::new();
        for f in 0..k {
            let (tr, va): (Vec<usize>, Vec<usize>) = (0..xs.len()).partition(|&i| fold[i] != f);
            let tr_x: Vec<Vec<f64>> = tr.iter().map(|&i| xs[i].clone()).collect();
            let tr_y: Vec<Label> = tr.iter().map(|&i| labels[i]).collect();
            let model = match train_svm(&tr_x, &tr_y, c, positive_weight, config) {
                Ok(m) => m,
                Err(Error::SingleClass | Error::Empty(_)) => {
                    warn!("C={c}: fold {f} has a single class, skipped");
                    continue;
                }
                Err(e) => return Err(e),
            };
            if va.is_empty() {
                warn!("C={c}: fold {f} is empty, skipped");
                continue;
            }
            let mut pred = Vec::with_capacity(va.len());
            for &i in &va {
                pred.push(Label::from_bool(model.decision(&xs[i])? > 0.0));
            }
            let gold: Vec<Label> = va.iter().map(|&i| labels[i]).collect();
            scores.push(clf_prf(&gold, &pred)?.micro.f1);
        }
        if scores.is_empty() {
            continue;
        }
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        if mean > best.1 {
            best = (c, mean);
        }
    }
    Ok(best.0)
}
