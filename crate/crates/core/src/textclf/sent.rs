use serde::{Deserialize, Serialize};

use crate::binio::{put_f32s, put_u32, to_u32, Reader};
use crate::corpus::LabeledText;
use crate::embeddings::StaticVecTable;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SENT";
const VERSION: u32 = 1;

/// Where a text's sentence vector comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SentEmbKind {
    /// Mean of static word vectors.
    StaticMean,
    /// Contextual encoder's sequence-start vector, precomputed.
    CtxCls,
    /// Mean of contextual token vectors, precomputed.
    CtxTokenMean,
}

impl SentEmbKind {
    fn file_code(self) -> Option<u8> {
        match self {
            SentEmbKind::StaticMean => None,
            SentEmbKind::CtxCls => Some(0),
            SentEmbKind::CtxTokenMean => Some(1),
        }
    }
}

/// Precomputed sentence vectors, one row per text.
///
/// Layout (little-endian): `SENT`, u32 version = 1, u32 dim, u32 count,
/// u8 kind (0 = cls, 1 = token-mean), then `count * dim` f32 values.
#[derive(Debug, Clone, PartialEq)]
pub struct SentEmbeddingFile {
    kind: SentEmbKind,
    dim: usize,
    rows: Vec<f32>,
}

impl SentEmbeddingFile {
    pub fn new(kind: SentEmbKind, dim: usize, rows: Vec<f32>) -> Result<Self> {
        if kind.file_code().is_none() {
            return Err(Error::Format("sentence-embedding files hold contextual vectors only".into()));
        }
        if dim == 0 || rows.len() % dim != 0 {
            return Err(Error::Format(format!("{} values do not form rows of width {dim}", rows.len())));
        }
        Ok(SentEmbeddingFile { kind, dim, rows })
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4, "magic")? != MAGIC {
            return Err(Error::Format("not a SENT file (bad magic)".into()));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::Version {
                found: version,
                expected: VERSION,
            });
        }
        let dim = r.u32("dim")? as usize;
        let count = r.u32("count")? as usize;
        let kind = match r.u8("kind")? {
            0 => SentEmbKind::CtxCls,
            1 => SentEmbKind::CtxTokenMean,
            k => return Err(Error::Format(format!("unknown sentence-embedding kind {k}"))),
        };
        let total = count
            .checked_mul(dim)
            .ok_or_else(|| Error::Format("size overflow".into()))?;
        let rows = r.f32s(total, "vectors")?;
        r.expect_end()?;
        SentEmbeddingFile::new(kind, dim, rows)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(17 + 4 * self.rows.len());
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, to_u32(self.dim, "dim")?);
        put_u32(&mut out, to_u32(self.len(), "count")?);
        out.push(self.kind.file_code().expect("checked in new"));
        put_f32s(&mut out, &self.rows);
        Ok(out)
    }

    pub fn kind(&self) -> SentEmbKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// One row per text. The error names the first text (or row) without a partner.
    pub fn check_alignment(&self, texts: usize) -> Result<()> {
        let rows = self.len();
        match rows.cmp(&texts) {
            std::cmp::Ordering::Equal => Ok(()),
            std::cmp::Ordering::Less => Err(Error::Alignment {
                sentence: rows,
                expected: 1,
                found: 0,
            }),
            std::cmp::Ordering::Greater => Err(Error::Alignment {
                sentence: texts,
                expected: 0,
                found: 1,
            }),
        }
    }

    /// Rows of `self` followed by rows of `other` (same kind and dim).
    pub fn concat(&self, other: &SentEmbeddingFile) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::dim("sentence-embedding file", self.dim, other.dim));
        }
        if other.kind != self.kind {
            return Err(Error::Format("sentence-embedding files of different kinds".into()));
        }
        let mut rows = self.rows.clone();
        rows.extend_from_slice(&other.rows);
        Ok(SentEmbeddingFile {
            kind: self.kind,
            dim: self.dim,
            rows,
        })
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        SentEmbeddingFile {
            kind: self.kind,
            dim: self.dim,
            rows: indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
        }
    }
}

/// Parse a SENT file and check it against the texts it was exported for.
pub fn read_sent_file(bytes: &[u8], texts: &[LabeledText]) -> Result<SentEmbeddingFile> {
    let file = SentEmbeddingFile::parse(bytes)?;
    file.check_alignment(texts.len())?;
    Ok(file)
}

pub fn write_sent_file(file: &SentEmbeddingFile) -> Result<Vec<u8>> {
    file.to_bytes()
}

/// Mean of the token vectors, zeros for unknown tokens.
pub fn sent_embed_static<'a>(table: &StaticVecTable, tokens: impl IntoIterator<Item = &'a str>) -> Result<Vec<f64>> {
    let mut out = vec![0.0; table.dim()];
    let mut n = 0usize;
    for tok in tokens {
        for (o, &v) in out.iter_mut().zip(table.lookup(tok)) {
            *o += f64::from(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty("text has no tokens".into()));
    }
    out.iter_mut().for_each(|o| *o /= n as f64);
    Ok(out)
}
