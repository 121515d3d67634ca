use crate::binio::{put_f32s, put_u32, to_u32, Reader};
use crate::corpus::Sentence;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CTXE";
const VERSION: u32 = 1;

/// Precomputed contextual vectors: one block per sentence, one vector per token.
///
/// Layout (little-endian): `CTXE`, u32 version = 1, u32 dim, u32 sentence
/// count, then per sentence a u32 token count and `count * dim` f32 values.
#[derive(Debug, Clone, PartialEq)]
pub struct CtxEmbeddingFile {
    dim: usize,
    blocks: Vec<Vec<f32>>,
}

impl CtxEmbeddingFile {
    pub fn new(dim: usize, blocks: Vec<Vec<f32>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Format("contextual dimension is zero".into()));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.len() % dim != 0 {
                return Err(Error::Format(format!(
                    "block {i} holds {} values, not a multiple of {dim}",
                    b.len()
                )));
            }
        }
        Ok(CtxEmbeddingFile { dim, blocks })
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4, "magic")? != MAGIC {
            return Err(Error::Format("not a CTXE file (bad magic)".into()));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::Version {
                found: version,
                expected: VERSION,
            });
        }
        let dim = r.u32("dim")? as usize;
        let count = r.u32("sentence count")? as usize;
        let mut blocks = Vec::with_capacity(count.min(1 << 20));
        for i in 0..count {
            let n = r.u32(&format!("token count of sentence {i}"))? as usize;
            let total = n
                .checked_mul(dim)
                .ok_or_else(|| Error::Format(format!("sentence {i}: size overflow")))?;
            blocks.push(r.f32s(total, &format!("vectors of sentence {i}"))?);
        }
        r.expect_end()?;
        CtxEmbeddingFile::new(dim, blocks)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, to_u32(self.dim, "dim")?);
        put_u32(&mut out, to_u32(self.blocks.len(), "sentence count")?);
        for b in &self.blocks {
            put_u32(&mut out, to_u32(b.len() / self.dim, "token count")?);
            put_f32s(&mut out, b);
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sentence_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn token_count(&self, sentence: usize) -> usize {
        self.blocks[sentence].len() / self.dim
    }

    pub fn vector(&self, sentence: usize, token: usize) -> &[f32] {
        &self.blocks[sentence][token * self.dim..(token + 1) * self.dim]
    }

    /// Verify block count and per-block token counts against sentence lengths.
    pub fn check_alignment(&self, lengths: &[usize]) -> Result<()> {
        for (i, &len) in lengths.iter().enumerate() {
            let Some(_) = self.blocks.get(i) else {
                return Err(Error::Alignment {
                    sentence: i,
                    expected: len,
                    found: 0,
                });
            };
            if self.token_count(i) != len {
                return Err(Error::Alignment {
                    sentence: i,
                    expected: len,
                    found: self.token_count(i),
                });
            }
        }
        if self.blocks.len() != lengths.len() {
            return Err(Error::Format(format!(
                "file has {} sentence blocks, corpus has {}",
                self.blocks.len(),
                lengths.len()
            )));
        }
        Ok(())
    }

    /// Blocks reordered/selected by sentence index.
    pub fn select(&self, indices: &[usize]) -> Self {
        CtxEmbeddingFile {
            dim: self.dim,
            blocks: indices.iter().map(|&i| self.blocks[i].clone()).collect(),
        }
    }

    /// Append the blocks of `other` (same dim).
    pub fn concat(&self, other: &CtxEmbeddingFile) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::dim("contextual file", self.dim, other.dim));
        }
        let mut blocks = self.blocks.clone();
        blocks.extend(other.blocks.iter().cloned());
        Ok(CtxEmbeddingFile {
            dim: self.dim,
            blocks,
        })
    }
}

/// Parse a CTXE file and check it against the corpus it was exported for.
pub fn read_ctx_file(bytes: &[u8], corpus: &[Sentence]) -> Result<CtxEmbeddingFile> {
    let file = CtxEmbeddingFile::parse(bytes)?;
    let lengths: Vec<usize> = corpus.iter().map(Sentence::len).collect();
    file.check_alignment(&lengths)?;
    Ok(file)
}

pub fn write_ctx_file(file: &CtxEmbeddingFile) -> Result<Vec<u8>> {
    file.to_bytes()
}
