use std::collections::HashMap;

use crate::error::{Error, Result};

/// Word vectors in the textual `count dim` format, looked up with a
/// lowercase fallback and a zero vector for unknown words.
#[derive(Debug, Clone)]
pub struct StaticVecTable {
    dim: usize,
    index: HashMap<String, usize>,
    data: Vec<f32>,
    zeros: Vec<f32>,
    pub lowercase_fallback: bool,
}

pub fn load_static_vecs(text: &str) -> Result<StaticVecTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Empty("vector file is empty".into()))?;
    let mut head = header.split_whitespace().map(str::parse::<usize>);
    let (Some(Ok(count)), Some(Ok(dim)), None) = (head.next(), head.next(), head.next()) else {
        return Err(Error::Format(format!("bad vector file header `{header}`")));
    };
    if dim == 0 {
        return Err(Error::Format("vector dimension is zero".into()));
    }

    let mut table = StaticVecTable {
        dim,
        index: HashMap::with_capacity(count),
        data: Vec::with_capacity(count * dim),
        zeros: vec![0.0; dim],
        lowercase_fallback: true,
    };
    for (lineno, line) in lines {
        let mut cols = line.split_whitespace();
        let token = cols.next().expect("non-blank line");
        let start = table.data.len();
        for c in cols {
            let v: f32 = c.parse().map_err(|_| {
                Error::Format(format!("line {}: bad number `{c}`", lineno + 1))
            })?;
            table.data.push(v);
        }
        let found = table.data.len() - start;
        if found != dim {
            return Err(Error::dim(format!("line {}", lineno + 1), dim, found));
        }
        if table.index.insert(token.to_string(), table.index.len()).is_some() {
            return Err(Error::DuplicateToken {
                line: lineno + 1,
                token: token.to_string(),
            });
        }
    }
    if table.index.len() != count {
        return Err(Error::Format(format!(
            "header declares {count} vectors, file has {}",
            table.index.len()
        )));
    }
    Ok(table)
}

impl StaticVecTable {
    pub fn from_entries<S: Into<String>>(
        dim: usize,
        entries: impl IntoIterator<Item = (S, Vec<f32>)>,
    ) -> Result<Self> {
        let mut table = StaticVecTable {
            dim,
            index: HashMap::new(),
            data: Vec::new(),
            zeros: vec![0.0; dim],
            lowercase_fallback: true,
        };
        for (i, (tok, v)) in entries.into_iter().enumerate() {
            if v.len() != dim {
                return Err(Error::dim(format!("entry {i}"), dim, v.len()));
            }
            let tok = tok.into();
            if table.index.insert(tok.clone(), table.index.len()).is_some() {
                return Err(Error::DuplicateToken { line: i + 1, token: tok });
            }
            table.data.extend(v);
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index
            .get(token)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// Exact match, then lowercase match (if enabled), then zeros.
    pub fn lookup(&self, surface: &str) -> &[f32] {
        self.get(surface)
            .or_else(|| {
                self.lowercase_fallback
                    .then(|| self.get(&surface.to_lowercase()))
                    .flatten()
            })
            .unwrap_or(&self.zeros)
    }

    /// Serialize in the textual format, entries in insertion order.
    pub fn to_text(&self) -> String {
        let mut rows: Vec<(&String, usize)> = self.index.iter().map(|(k, &v)| (k, v)).collect();
        rows.sort_by_key(|&(_, i)| i);
        let mut out = format!("{} {}\n", rows.len(), self.dim);
        for (tok, i) in rows {
            out.push_str(tok);
            for v in &self.data[i * self.dim..(i + 1) * self.dim] {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}
