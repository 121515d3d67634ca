//! Per-token embedding providers and their concatenation.
//!
//! Static word vectors, byte-pair subword vectors and contextual vectors
//! are frozen inputs. The character encoder is trainable and lives in the
//! tagger's parameters; here it only contributes its output width.

mod bpe;
mod ctx;
mod static_vecs;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bpe::{BpeModel, END_OF_WORD, UNK_SUBWORD};
pub use ctx::{read_ctx_file, write_ctx_file, CtxEmbeddingFile};
pub use static_vecs::{load_static_vecs, StaticVecTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provider {
    Static { dim: usize },
    Bpe { dim: usize },
    /// Character BiLSTM; contributes `2 * hidden` values per token.
    Char { char_dim: usize, hidden: usize },
    Ctx { dim: usize },
}

impl Provider {
    pub fn dim(&self) -> usize {
        match *self {
            Provider::Static { dim } | Provider::Bpe { dim } | Provider::Ctx { dim } => dim,
            Provider::Char { hidden, .. } => 2 * hidden,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Provider::Static { .. } => "static",
            Provider::Bpe { .. } => "bpe",
            Provider::Char { .. } => "char",
            Provider::Ctx { .. } => "ctx",
        }
    }

    /// Character encoder with 25-dim character embeddings and 25 hidden units per direction.
    pub fn default_char() -> Self {
        Provider::Char {
            char_dim: 25,
            hidden: 25,
        }
    }
}

/// Ordered providers whose vectors are concatenated per token, plus
/// whether the linguistic feature embeddings are appended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingStackSpec {
    pub providers: Vec<Provider>,
    pub features: bool,
}

impl EmbeddingStackSpec {
    pub fn validate(&self) -> Result<()> {
        if self.providers.is_empty() {
            return Err(Error::Config("embedding stack has no providers".into()));
        }
        for (i, p) in self.providers.iter().enumerate() {
            if p.dim() == 0 {
                return Err(Error::Config(format!("provider `{}` has zero width", p.name())));
            }
            if let Provider::Char { char_dim: 0, .. } = p {
                return Err(Error::Config("character embedding width is zero".into()));
            }
            if self.providers[..i].iter().any(|q| q.name() == p.name()) {
                return Err(Error::Config(format!("provider `{}` listed twice", p.name())));
            }
        }
        Ok(())
    }

    /// Width of the provider concatenation (features excluded).
    pub fn total_dim(&self) -> usize {
        self.providers.iter().map(Provider::dim).sum()
    }

    pub fn char_provider(&self) -> Option<(usize, usize)> {
        self.providers.iter().find_map(|p| match *p {
            Provider::Char { char_dim, hidden } => Some((char_dim, hidden)),
            _ => None,
        })
    }

    /// Offset of a provider's slice inside the stacked vector.
    pub fn offset_of(&self, name: &str) -> Option<usize> {
        let mut off = 0;
        for p in &self.providers {
            if p.name() == name {
                return Some(off);
            }
            off += p.dim();
        }
        None
    }
}

/// Concatenate one token's provider outputs in stack order.
pub fn stack(spec: &EmbeddingStackSpec, outputs: &[&[f64]]) -> Result<Vec<f64>> {
    if outputs.len() != spec.providers.len() {
        return Err(Error::LengthMismatch {
            expected: spec.providers.len(),
            found: outputs.len(),
        });
    }
    let mut out = Vec::with_capacity(spec.total_dim());
    for (p, v) in spec.providers.iter().zip(outputs) {
        if v.len() != p.dim() {
            return Err(Error::dim(format!("provider `{}`", p.name()), p.dim(), v.len()));
        }
        out.extend_from_slice(v);
    }
    Ok(out)
}
