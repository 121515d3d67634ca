use crate::crf::CrfParams;
use crate::lingfeat::{CapClass, FeatureDims};
use crate::nn::{fill_uniform, round_to_f32, Lstm};
use crate::rng::SeededRng;

use super::TaggerConfig;

/// Trainable character BiLSTM: embedding table plus one LSTM per direction.
#[derive(Debug, Clone, PartialEq)]
pub struct CharEncoder {
    pub dim: usize,
    /// `vocab x dim`, row 0 is UNK.
    pub table: Vec<f64>,
    pub fwd: Lstm,
    pub bwd: Lstm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTables {
    pub dims: FeatureDims,
    pub pos: Vec<f64>,
    pub shape: Vec<f64>,
    pub cap: Vec<f64>,
}

/// Vocabulary sizes that fix the parameter shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSizes {
    pub chars: usize,
    pub pos: usize,
    pub shapes: usize,
    pub tags: usize,
}

/// Every trainable array of the tagger.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerParams {
    pub chars: Option<CharEncoder>,
    pub features: Option<FeatureTables>,
    pub fwd: Lstm,
    pub bwd: Lstm,
    /// `K x 2H`
    pub proj_w: Vec<f64>,
    pub proj_b: Vec<f64>,
    pub crf: CrfParams,
}

impl TaggerParams {
    pub fn zeros(config: &TaggerConfig, sizes: ParamSizes) -> Self {
        let chars = config.stack.char_provider().map(|(dim, hidden)| CharEncoder {
            dim,
            table: vec![0.0; sizes.chars * dim],
            fwd: Lstm::zeros(dim, hidden),
            bwd: Lstm::zeros(dim, hidden),
        });
        let features = config.stack.features.then(|| FeatureTables {
            dims: config.features,
            pos: vec![0.0; sizes.pos * config.features.pos],
            shape: vec![0.0; sizes.shapes * config.features.ortho],
            cap: vec![0.0; CapClass::COUNT * config.features.cap],
        });
        let input = config.input_dim();
        let h = config.hidden;
        TaggerParams {
            chars,
            features,
            fwd: Lstm::zeros(input, h),
            bwd: Lstm::zeros(input, h),
            proj_w: vec![0.0; sizes.tags * 2 * h],
            proj_b: vec![0.0; sizes.tags],
            crf: CrfParams::zeros(sizes.tags),
        }
    }

    /// Uniform(-r, r) everywhere, then the forget-gate bias offset on every LSTM.
    pub fn init(config: &TaggerConfig, sizes: ParamSizes, rng: &mut SeededRng) -> Self {
        let mut p = TaggerParams::zeros(config, sizes);
        for t in p.tensors_mut() {
            fill_uniform(rng, config.init_range, t);
        }
        let mut lstms: Vec<&mut Lstm> = vec![&mut p.fwd, &mut p.bwd];
        if let Some(c) = &mut p.chars {
            lstms.push(&mut c.fwd);
            lstms.push(&mut c.bwd);
        }
        for l in lstms {
            let h = l.hidden;
            for b in &mut l.bias[h..2 * h] {
                *b += config.forget_bias;
            }
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    /// Named tensors in the fixed serialization order.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        let mut v: Vec<(&'static str, &[f64])> = Vec::new();
        if let Some(c) = &self.chars {
            v.extend([
                ("char.table", &c.table[..]),
                ("char.fwd.w_ih", &c.fwd.w_ih[..]),
                ("char.fwd.w_hh", &c.fwd.w_hh[..]),
                ("char.fwd.bias", &c.fwd.bias[..]),
                ("char.bwd.w_ih", &c.bwd.w_ih[..]),
                ("char.bwd.w_hh", &c.bwd.w_hh[..]),
                ("char.bwd.bias", &c.bwd.bias[..]),
            ]);
        }
        if let Some(f) = &self.features {
            v.extend([
                ("feat.pos", &f.pos[..]),
                ("feat.shape", &f.shape[..]),
                ("feat.cap", &f.cap[..]),
            ]);
        }
        v.extend([
            ("fwd.w_ih", &self.fwd.w_ih[..]),
            ("fwd.w_hh", &self.fwd.w_hh[..]),
            ("fwd.bias", &self.fwd.bias[..]),
            ("bwd.w_ih", &self.bwd.w_ih[..]),
            ("bwd.w_hh", &self.bwd.w_hh[..]),
            ("bwd.bias", &self.bwd.bias[..]),
            ("proj.w", &self.proj_w[..]),
            ("proj.b", &self.proj_b[..]),
            ("crf.transitions", &self.crf.transitions[..]),
            ("crf.start", &self.crf.start[..]),
            ("crf.stop", &self.crf.stop[..]),
        ]);
        v
    }

    /// Same order as [`TaggerParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::new();
        if let Some(c) = &mut self.chars {
            v.extend([
                &mut c.table[..],
                &mut c.fwd.w_ih[..],
                &mut c.fwd.w_hh[..],
                &mut c.fwd.bias[..],
                &mut c.bwd.w_ih[..],
                &mut c.bwd.w_hh[..],
                &mut c.bwd.bias[..],
            ]);
        }
        if let Some(f) = &mut self.features {
            v.extend([&mut f.pos[..], &mut f.shape[..], &mut f.cap[..]]);
        }
        v.extend([
            &mut self.fwd.w_ih[..],
            &mut self.fwd.w_hh[..],
            &mut self.fwd.bias[..],
            &mut self.bwd.w_ih[..],
            &mut self.bwd.w_hh[..],
            &mut self.bwd.bias[..],
            &mut self.proj_w[..],
            &mut self.proj_b[..],
            &mut self.crf.transitions[..],
            &mut self.crf.start[..],
            &mut self.crf.stop[..],
        ]);
        v
    }

    pub fn num_values(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// `self += a * other` (same shapes).
    pub fn add_scaled(&mut self, a: f64, other: &TaggerParams) {
        for (dst, (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            crate::nn::axpy(a, src, dst);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn round_to_f32(&mut self) {
        for t in self.tensors_mut() {
            round_to_f32(t);
        }
    }
}
