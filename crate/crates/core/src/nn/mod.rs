//! Dense-vector kernels and the LSTM used by the tagger.

mod lstm;

pub use lstm::{Lstm, LstmTrace};

use rand::Rng;

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out += W x` for row-major `W` with `x.len()` columns.
pub(crate) fn gemv_acc(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    debug_assert_eq!(w.len(), cols * out.len());
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += W^T v` for row-major `W` with `out.len()` columns.
pub(crate) fn gemv_t_acc(w: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = out.len();
    debug_assert_eq!(w.len(), cols * v.len());
    for (&s, row) in v.iter().zip(w.chunks_exact(cols)) {
        if s != 0.0 {
            axpy(s, row, out);
        }
    }
}

/// `G += v x^T`.
pub(crate) fn outer_acc(g: &mut [f64], v: &[f64], x: &[f64]) {
    let cols = x.len();
    debug_assert_eq!(g.len(), cols * v.len());
    for (&s, row) in v.iter().zip(g.chunks_exact_mut(cols)) {
        if s != 0.0 {
            axpy(s, x, row);
        }
    }
}

/// `y += a x`.
#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub(crate) fn fill_uniform(rng: &mut impl Rng, range: f64, out: &mut [f64]) {
    for v in out {
        *v = rng.random_range(-range..range);
    }
}

/// Round every value to the nearest f32 so the parameters survive
/// f32 serialization unchanged.
pub(crate) fn round_to_f32(xs: &mut [f64]) {
    for x in xs {
        *x = f64::from(*x as f32);
    }
}
