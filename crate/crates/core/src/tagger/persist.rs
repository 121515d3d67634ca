use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio::read_checked;
use crate::corpus::TagScheme;
use crate::embeddings::BpeModel;
use crate::error::{Error, Result};
use crate::lingfeat::FeatureVocab;
use crate::modeldir::{
    check_manifest, create_dir, read_meta, read_static, read_weights, weights_bytes, write_file, write_meta,
    TensorEntry, MODEL_FORMAT_VERSION, STATIC_FILE, WEIGHTS_FILE,
};
use crate::rng::PRNG_NAME;

use super::{CharVocab, Providers, Tagger, TaggerConfig, TaggerParams};

const BPE_MERGES_FILE: &str = "bpe.merges";
const BPE_VECTORS_FILE: &str = "bpe.vec";

const STAND_INS: &[&str] = &["gradient_clip", "best_dev_checkpoint", "no_dropout", "init_uniform_0.1_forget_bias_1"];

#[derive(Debug, Serialize, Deserialize)]
struct TaggerMeta {
    format_version: u32,
    kind: String,
    config: TaggerConfig,
    scheme: TagScheme,
    feature_vocab: FeatureVocab,
    char_vocab: CharVocab,
    tensors: Vec<TensorEntry>,
    /// SHA-256 of every file in the directory except this one.
    checksums: BTreeMap<String, String>,
    prng: String,
    stand_ins: Vec<String>,
}

impl Tagger {
    /// Write `meta.json`, `weights.bin` and any frozen vector tables into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        create_dir(dir)?;
        let mut sums = BTreeMap::new();
        let tensors = self.params.tensors();
        write_file(dir, WEIGHTS_FILE, &weights_bytes(tensors.iter().map(|(_, t)| *t)), &mut sums)?;
        if let Some(t) = &self.providers.static_vecs {
            write_file(dir, STATIC_FILE, t.to_text().as_bytes(), &mut sums)?;
        }
        if let Some(b) = &self.providers.bpe {
            write_file(dir, BPE_MERGES_FILE, b.merges_text().as_bytes(), &mut sums)?;
            write_file(dir, BPE_VECTORS_FILE, b.vectors().to_text().as_bytes(), &mut sums)?;
        }
        let meta = TaggerMeta {
            format_version: MODEL_FORMAT_VERSION,
            kind: "tagger".into(),
            config: self.config.clone(),
            scheme: self.scheme.clone(),
            feature_vocab: self.feature_vocab.clone(),
            char_vocab: self.char_vocab.clone(),
            tensors: tensors
                .iter()
                .map(|(n, t)| TensorEntry {
                    name: n.to_string(),
                    len: t.len(),
                })
                .collect(),
            checksums: sums,
            prng: PRNG_NAME.into(),
            stand_ins: STAND_INS.iter().map(|s| s.to_string()).collect(),
        };
        write_meta(dir, &meta)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: TaggerMeta = read_meta(dir)?;
        if meta.kind != "tagger" {
            return Err(Error::Format(format!("model kind `{}` is not a tagger", meta.kind)));
        }
        let sum = |name: &str| {
            meta.checksums
                .get(name)
                .ok_or_else(|| Error::Format(format!("meta.json lists no checksum for {name}")))
        };
        let weights = read_checked(dir, WEIGHTS_FILE, sum(WEIGHTS_FILE)?)?;

        let mut providers = Providers {
            static_vecs: read_static(dir, &meta.checksums)?,
            bpe: None,
        };
        if meta.checksums.contains_key(BPE_MERGES_FILE) {
            let merges = read_checked(dir, BPE_MERGES_FILE, sum(BPE_MERGES_FILE)?)?;
            let vectors = read_checked(dir, BPE_VECTORS_FILE, sum(BPE_VECTORS_FILE)?)?;
            providers.bpe = Some(BpeModel::load(
                &String::from_utf8_lossy(&merges),
                &String::from_utf8_lossy(&vectors),
            )?);
        }

        meta.config.validate()?;
        let sizes = super::ParamSizes {
            chars: meta.char_vocab.size(),
            pos: meta.feature_vocab.pos_size(),
            shapes: meta.feature_vocab.shape_size(),
            tags: meta.scheme.len(),
        };
        let mut tagger = Tagger {
            params: TaggerParams::zeros(&meta.config, sizes),
            config: meta.config,
            scheme: meta.scheme,
            feature_vocab: meta.feature_vocab,
            char_vocab: meta.char_vocab,
            providers,
        };
        let expected: Vec<(&str, usize)> = tagger.params.tensors().iter().map(|(n, t)| (*n, t.len())).collect();
        check_manifest(&meta.tensors, &expected)?;
        tagger.providers.check(&tagger.config.stack)?;
        read_weights(&weights, tagger.params.tensors_mut())?;
        Ok(tagger)
    }
}
