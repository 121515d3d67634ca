use rand::Rng;

use super::{axpy, fill_uniform, gemv_acc, gemv_t_acc, outer_acc, sigmoid};

/// Single-direction LSTM. Gate blocks are stacked `[input, forget, cell, output]`,
/// each `hidden` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub input: usize,
    pub hidden: usize,
    /// `4H x input`
    pub w_ih: Vec<f64>,
    /// `4H x H`
    pub w_hh: Vec<f64>,
    /// `4H`
    pub bias: Vec<f64>,
}

/// Activations kept from the forward pass for backprop.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    xs: Vec<Vec<f64>>,
    /// Post-activation gates per step, `4H` each.
    gates: Vec<Vec<f64>>,
    cells: Vec<Vec<f64>>,
    tanh_cells: Vec<Vec<f64>>,
    pub hs: Vec<Vec<f64>>,
}

impl Lstm {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Lstm {
            input,
            hidden,
            w_ih: vec![0.0; 4 * hidden * input],
            w_hh: vec![0.0; 4 * hidden * hidden],
            bias: vec![0.0; 4 * hidden],
        }
    }

    pub fn init(input: usize, hidden: usize, range: f64, forget_bias: f64, rng: &mut impl Rng) -> Self {
        let mut l = Lstm::zeros(input, hidden);
        fill_uniform(rng, range, &mut l.w_ih);
        fill_uniform(rng, range, &mut l.w_hh);
        fill_uniform(rng, range, &mut l.bias);
        for b in &mut l.bias[hidden..2 * hidden] {
            *b += forget_bias;
        }
        l
    }

    /// Run over `xs` from zero initial state.
    pub fn forward(&self, xs: Vec<Vec<f64>>) -> LstmTrace {
        let h = self.hidden;
        let n = xs.len();
        let mut trace = LstmTrace {
            gates: Vec::with_capacity(n),
            cells: Vec::with_capacity(n),
            tanh_cells: Vec::with_capacity(n),
            hs: Vec::with_capacity(n),
            xs,
        };
        let zeros = vec![0.0; h];
        for t in 0..n {
            let h_prev = if t == 0 { &zeros } else { &trace.hs[t - 1] };
            let c_prev = if t == 0 { &zeros } else { &trace.cells[t - 1] };
            let mut z = self.bias.clone();
            gemv_acc(&self.w_ih, &trace.xs[t], &mut z);
            gemv_acc(&self.w_hh, h_prev, &mut z);
            for v in &mut z[..2 * h] {
                *v = sigmoid(*v);
            }
            for v in &mut z[2 * h..3 * h] {
                *v = v.tanh();
            }
            for v in &mut z[3 * h..] {
                *v = sigmoid(*v);
            }
            let mut c = vec![0.0; h];
            let mut tc = vec![0.0; h];
            let mut hv = vec![0.0; h];
            for j in 0..h {
                c[j] = z[h + j] * c_prev[j] + z[j] * z[2 * h + j];
                tc[j] = c[j].tanh();
                hv[j] = z[3 * h + j] * tc[j];
            }
            trace.gates.push(z);
            trace.cells.push(c);
            trace.tanh_cells.push(tc);
            trace.hs.push(hv);
        }
        trace
    }

    /// Backprop `dhs[t] = dL/dh_t` through the whole sequence. Parameter
    /// gradients are added to `grad`; input gradients are returned.
    pub fn backward(&self, trace: &LstmTrace, dhs: &[Vec<f64>], grad: &mut Lstm, want_dx: bool) -> Vec<Vec<f64>> {
        let h = self.hidden;
        let n = trace.hs.len();
        let mut dxs = if want_dx {
            vec![vec![0.0; self.input]; n]
        } else {
            Vec::new()
        };
        let zeros = vec![0.0; h];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        for t in (0..n).rev() {
            let g = &trace.gates[t];
            let c_prev = if t == 0 { &zeros } else { &trace.cells[t - 1] };
            let h_prev = if t == 0 { &zeros } else { &trace.hs[t - 1] };
            for j in 0..h {
                let (i, f, cand, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let tc = trace.tanh_cells[t][j];
                let dh = dhs[t][j] + dh_next[j];
                let dc = dc_next[j] + dh * o * (1.0 - tc * tc);
                dz[j] = dc * cand * i * (1.0 - i);
                dz[h + j] = dc * c_prev[j] * f * (1.0 - f);
                dz[2 * h + j] = dc * i * (1.0 - cand * cand);
                dz[3 * h + j] = dh * tc * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            outer_acc(&mut grad.w_ih, &dz, &trace.xs[t]);
            outer_acc(&mut grad.w_hh, &dz, h_prev);
            axpy(1.0, &dz, &mut grad.bias);
            if want_dx {
                gemv_t_acc(&self.w_ih, &dz, &mut dxs[t]);
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            gemv_t_acc(&self.w_hh, &dz, &mut dh_next);
        }
        dxs
    }
}
