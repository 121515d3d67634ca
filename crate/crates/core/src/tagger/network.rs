//! Forward and backward passes for one sentence.

use crate::crf::Emissions;
use crate::lingfeat::FeatureIds;
use crate::nn::{axpy, gemv_acc, gemv_t_acc, outer_acc, LstmTrace};

use super::params::{CharEncoder, TaggerParams};

/// Where each part of the per-token input vector sits.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub provider_dim: usize,
    /// (offset, hidden) of the character encoder's slot.
    pub chars: Option<(usize, usize)>,
}

/// Model inputs for one sentence. `base` holds the frozen provider
/// vectors with the character slot zeroed.
#[derive(Debug, Clone)]
pub(crate) struct SentenceInput {
    pub base: Vec<Vec<f64>>,
    pub chars: Vec<Vec<usize>>,
    pub feats: Vec<FeatureIds>,
}

pub(crate) struct Activations {
    char_traces: Vec<(LstmTrace, LstmTrace)>,
    fwd: LstmTrace,
    bwd: LstmTrace,
    hidden: Vec<Vec<f64>>,
    pub emissions: Emissions,
}

fn row(table: &[f64], dim: usize, i: usize) -> &[f64] {
    &table[i * dim..(i + 1) * dim]
}

fn row_mut(table: &mut [f64], dim: usize, i: usize) -> &mut [f64] {
    &mut table[i * dim..(i + 1) * dim]
}

fn encode_chars(enc: &CharEncoder, ids: &[usize]) -> (LstmTrace, LstmTrace, Vec<f64>) {
    let xs: Vec<Vec<f64>> = ids.iter().map(|&c| row(&enc.table, enc.dim, c).to_vec()).collect();
    let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
    let f = enc.fwd.forward(xs);
    let b = enc.bwd.forward(rev);
    let mut out = f.hs.last().cloned().unwrap_or_else(|| vec![0.0; enc.fwd.hidden]);
    out.extend(b.hs.last().cloned().unwrap_or_else(|| vec![0.0; enc.bwd.hidden]));
    (f, b, out)
}

pub(crate) fn forward(p: &TaggerParams, layout: &Layout, input: &SentenceInput) -> Activations {
    let n = input.base.len();
    let mut char_traces = Vec::new();
    let mut xs = Vec::with_capacity(n);
    for t in 0..n {
        let mut x = input.base[t].clone();
        if let (Some((off, _)), Some(enc)) = (layout.chars, &p.chars) {
            let (f, b, out) = encode_chars(enc, &input.chars[t]);
            x[off..off + out.len()].copy_from_slice(&out);
            char_traces.push((f, b));
        }
        if let Some(ft) = &p.features {
            let ids = input.feats[t];
            x.extend_from_slice(row(&ft.pos, ft.dims.pos, ids.pos));
            x.extend_from_slice(row(&ft.shape, ft.dims.ortho, ids.shape));
            x.extend_from_slice(row(&ft.cap, ft.dims.cap, ids.cap));
        }
        xs.push(x);
    }

    let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
    let fwd = p.fwd.forward(xs);
    let bwd = p.bwd.forward(rev);
    let k = p.proj_b.len();
    let mut hidden = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * k);
    for t in 0..n {
        let mut h = fwd.hs[t].clone();
        h.extend_from_slice(&bwd.hs[n - 1 - t]);
        let mut e = p.proj_b.clone();
        gemv_acc(&p.proj_w, &h, &mut e);
        data.extend(e);
        hidden.push(h);
    }
    Activations {
        char_traces,
        fwd,
        bwd,
        hidden,
        emissions: Emissions::new(n, k, data),
    }
}

/// Accumulate parameter gradients into `grad` given `dL/dE`.
pub(crate) fn backward(
    p: &TaggerParams,
    layout: &Layout,
    input: &SentenceInput,
    acts: &Activations,
    d_emissions: &[f64],
    grad: &mut TaggerParams,
) {
    let n = input.base.len();
    let k = p.proj_b.len();
    let h = p.fwd.hidden;
    let mut dh_f = vec![vec![0.0; h]; n];
    let mut dh_b = vec![vec![0.0; h]; n];
    for t in 0..n {
        let de = &d_emissions[t * k..(t + 1) * k];
        axpy(1.0, de, &mut grad.proj_b);
        outer_acc(&mut grad.proj_w, de, &acts.hidden[t]);
        let mut dh = vec![0.0; 2 * h];
        gemv_t_acc(&p.proj_w, de, &mut dh);
        dh_f[t].copy_from_slice(&dh[..h]);
        dh_b[n - 1 - t].copy_from_slice(&dh[h..]);
    }

    let need_dx = p.chars.is_some() || p.features.is_some();
    let dx_f = p.fwd.backward(&acts.fwd, &dh_f, &mut grad.fwd, need_dx);
    let dx_b = p.bwd.backward(&acts.bwd, &dh_b, &mut grad.bwd, need_dx);
    if !need_dx {
        return;
    }

    for t in 0..n {
        let mut dx = dx_f[t].clone();
        axpy(1.0, &dx_b[n - 1 - t], &mut dx);

        if let (Some(ft), Some(gt)) = (&p.features, &mut grad.features) {
            let ids = input.feats[t];
            let d = ft.dims;
            let base = layout.provider_dim;
            axpy(1.0, &dx[base..base + d.pos], row_mut(&mut gt.pos, d.pos, ids.pos));
            let base = base + d.pos;
            axpy(1.0, &dx[base..base + d.ortho], row_mut(&mut gt.shape, d.ortho, ids.shape));
            let base = base + d.ortho;
            axpy(1.0, &dx[base..base + d.cap], row_mut(&mut gt.cap, d.cap, ids.cap));
        }

        if let (Some((off, ch)), Some(enc), Some(genc)) = (layout.chars, &p.chars, &mut grad.chars) {
            let (tf, tb) = &acts.char_traces[t];
            let ids = &input.chars[t];
            let m = ids.len();
            if m == 0 {
                continue;
            }
            let mut dhs = vec![vec![0.0; ch]; m];
            dhs[m - 1].copy_from_slice(&dx[off..off + ch]);
            let dcf = enc.fwd.backward(tf, &dhs, &mut genc.fwd, true);
            dhs[m - 1].copy_from_slice(&dx[off + ch..off + 2 * ch]);
            let dcb = enc.bwd.backward(tb, &dhs, &mut genc.bwd, true);
            for (j, &c) in ids.iter().enumerate() {
                let dst = row_mut(&mut genc.table, enc.dim, c);
                axpy(1.0, &dcf[j], dst);
                axpy(1.0, &dcb[m - 1 - j], dst);
            }
        }
    }
}
