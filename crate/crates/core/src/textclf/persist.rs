use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio::read_checked;
use crate::error::{Error, Result};
use crate::modeldir::{
    check_manifest, create_dir, read_meta, read_static, read_weights, weights_bytes, write_file, write_meta,
    TensorEntry, MODEL_FORMAT_VERSION, STATIC_FILE, WEIGHTS_FILE,
};
use crate::nn::round_to_f32;
use crate::rng::PRNG_NAME;

use super::{ClfConfig, ClfFamily, ClfModel, Classifier, LogRegModel, MlpModel, SvmModel};

#[derive(Debug, Serialize, Deserialize)]
struct ClfMeta {
    format_version: u32,
    kind: String,
    family: ClfFamily,
    config: ClfConfig,
    dim: usize,
    /// Support-vector count (SVM only).
    #[serde(default)]
    support_vectors: usize,
    scalars: BTreeMap<String, f64>,
    losses: Vec<f64>,
    converged: Option<bool>,
    tensors: Vec<TensorEntry>,
    checksums: BTreeMap<String, String>,
    prng: String,
}

fn arrays_mut(model: &mut ClfModel) -> Vec<&mut [f64]> {
    match model {
        ClfModel::Svm(m) => {
            let mut v: Vec<&mut [f64]> = m.support_vectors.iter_mut().map(|r| &mut r[..]).collect();
            v.push(&mut m.coef);
            v
        }
        ClfModel::Logreg(m) => vec![&mut m.w],
        ClfModel::Nn(m) => m.tensors_mut().into_iter().collect(),
    }
}

/// Name and contents of the arrays written to `weights.bin`.
fn arrays(model: &ClfModel) -> Vec<(&'static str, Vec<f64>)> {
    match model {
        ClfModel::Svm(m) => vec![("svm.support_vectors", m.support_vectors.concat()), ("svm.coef", m.coef.clone())],
        ClfModel::Logreg(m) => vec![("logreg.w", m.w.clone())],
        ClfModel::Nn(m) => m.tensors().iter().map(|(n, t)| (*n, t.to_vec())).collect(),
    }
}

pub(crate) fn round_params(model: &mut ClfModel) {
    for a in arrays_mut(model) {
        round_to_f32(a);
    }
}

impl Classifier {
    pub fn save(&self, dir: &Path) -> Result<()> {
        create_dir(dir)?;
        let mut sums = BTreeMap::new();
        let arrays = arrays(&self.model);
        write_file(dir, WEIGHTS_FILE, &weights_bytes(arrays.iter().map(|(_, a)| &a[..])), &mut sums)?;
        if let Some(t) = &self.static_vecs {
            write_file(dir, STATIC_FILE, t.to_text().as_bytes(), &mut sums)?;
        }
        let mut scalars = BTreeMap::new();
        let (mut losses, mut converged, mut support_vectors) = (Vec::new(), None, 0);
        match &self.model {
            ClfModel::Svm(m) => {
                scalars.extend([
                    ("b".to_string(), m.b),
                    ("gamma".into(), m.gamma),
                    ("c".into(), m.c),
                    ("c_pos".into(), m.c_pos),
                    ("c_neg".into(), m.c_neg),
                    ("iterations".into(), m.iterations as f64),
                ]);
                converged = Some(m.converged);
                support_vectors = m.coef.len();
            }
            ClfModel::Logreg(m) => {
                scalars.insert("b".into(), m.b);
                losses = m.losses.clone();
            }
            ClfModel::Nn(m) => {
                scalars.insert("hidden".into(), m.hidden as f64);
                losses = m.losses.clone();
            }
        }
        let meta = ClfMeta {
            format_version: MODEL_FORMAT_VERSION,
            kind: "classifier".into(),
            family: self.model.family(),
            config: self.config.clone(),
            dim: self.dim,
            support_vectors,
            scalars,
            losses,
            converged,
            tensors: arrays
                .iter()
                .map(|(n, a)| TensorEntry {
                    name: n.to_string(),
                    len: a.len(),
                })
                .collect(),
            checksums: sums,
            prng: PRNG_NAME.into(),
        };
        write_meta(dir, &meta)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: ClfMeta = read_meta(dir)?;
        if meta.kind != "classifier" {
            return Err(Error::Format(format!("model kind `{}` is not a classifier", meta.kind)));
        }
        let sum = meta
            .checksums
            .get(WEIGHTS_FILE)
            .ok_or_else(|| Error::Format("meta.json lists no checksum for weights.bin".into()))?;
        let weights = read_checked(dir, WEIGHTS_FILE, sum)?;
        let static_vecs = read_static(dir, &meta.checksums)?;
        meta.config.validate()?;
        let scalar = |k: &str| {
            meta.scalars
                .get(k)
                .copied()
                .ok_or_else(|| Error::Format(format!("meta.json lacks `{k}`")))
        };
        let dim = meta.dim;
        let mut model = match meta.family {
            ClfFamily::Svm => ClfModel::Svm(SvmModel {
                support_vectors: vec![vec![0.0; dim]; meta.support_vectors],
                coef: vec![0.0; meta.support_vectors],
                b: scalar("b")?,
                gamma: scalar("gamma")?,
                c: scalar("c")?,
                c_pos: scalar("c_pos")?,
                c_neg: scalar("c_neg")?,
                converged: meta.converged.unwrap_or(true),
                iterations: scalar("iterations")? as usize,
            }),
            ClfFamily::Logreg => ClfModel::Logreg(LogRegModel {
                w: vec![0.0; dim],
                b: scalar("b")?,
                losses: meta.losses.clone(),
            }),
            ClfFamily::Nn => {
                let mut m = MlpModel::zeros(dim, scalar("hidden")? as usize);
                m.losses = meta.losses.clone();
                ClfModel::Nn(m)
            }
        };
        let expected: Vec<(&str, usize)> = arrays(&model).iter().map(|(n, a)| (*n, a.len())).collect();
        check_manifest(&meta.tensors, &expected)?;
        read_weights(&weights, arrays_mut(&mut model))?;
        Ok(Classifier {
            config: meta.config,
            dim,
            static_vecs,
            model,
        })
    }
}
