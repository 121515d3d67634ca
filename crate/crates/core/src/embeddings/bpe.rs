use std::collections::HashMap;

use super::static_vecs::{load_static_vecs, StaticVecTable};
use crate::error::{Error, Result};

/// End-of-word symbol appended to every token before merging. A lone
/// marker left over after merging is dropped from the segmentation.
pub const END_OF_WORD: &str = "</w>";

/// Vector-file entry used for subwords missing from the vocabulary.
pub const UNK_SUBWORD: &str = "<unk>";

/// Byte-pair merge rules plus subword vectors.
#[derive(Debug, Clone)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), usize>,
    vectors: StaticVecTable,
    unk: Vec<f32>,
}

impl BpeModel {
    pub fn new(merges: Vec<(String, String)>, mut vectors: StaticVecTable) -> Self {
        vectors.lowercase_fallback = false;
        let mut ranks = HashMap::with_capacity(merges.len());
        for (rank, pair) in merges.iter().enumerate() {
            ranks.entry(pair.clone()).or_insert(rank);
        }
        let unk = vectors
            .get(UNK_SUBWORD)
            .map(<[f32]>::to_vec)
            .unwrap_or_else(|| vec![0.0; vectors.dim()]);
        BpeModel {
            merges,
            ranks,
            vectors,
            unk,
        }
    }

    /// Merge file: one `left right` pair per line, highest priority first.
    /// Lines starting with `#` are skipped.
    pub fn load(merges_text: &str, vectors_text: &str) -> Result<Self> {
        let mut merges = Vec::new();
        for (lineno, line) in merges_text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(Error::MalformedLine {
                    line: lineno + 1,
                    expected: 2,
                    found: cols.len(),
                });
            }
            merges.push((cols[0].to_string(), cols[1].to_string()));
        }
        Ok(BpeModel::new(merges, load_static_vecs(vectors_text)?))
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn vectors(&self) -> &StaticVecTable {
        &self.vectors
    }

    /// Merge rules in the format read by [`BpeModel::load`].
    pub fn merges_text(&self) -> String {
        self.merges.iter().map(|(a, b)| format!("{a} {b}\n")).collect()
    }

    pub fn unk(&self) -> &[f32] {
        &self.unk
    }

    /// Apply merges greedily by priority: repeatedly merge every occurrence
    /// of the best-ranked adjacent pair until none applies.
    pub fn segment(&self, surface: &str) -> Vec<String> {
        if surface.is_empty() {
            return Vec::new();
        }
        let mut symbols: Vec<String> = surface.chars().map(String::from).collect();
        symbols.push(END_OF_WORD.to_string());

        loop {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())))
                .min()
                .copied();
            let Some(rank) = best else { break };
            let (left, right) = &self.merges[rank];
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && &symbols[i] == left && &symbols[i + 1] == right {
                    merged.push(format!("{left}{right}"));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = merged;
        }

        if symbols.last().is_some_and(|s| s == END_OF_WORD) {
            symbols.pop();
        }
        symbols
    }

    /// Mean of the subword vectors; the UNK vector stands in for misses.
    pub fn embed(&self, surface: &str) -> Vec<f64> {
        let pieces = self.segment(surface);
        let found: Vec<Option<&[f32]>> = pieces.iter().map(|p| self.vectors.get(p)).collect();
        if found.iter().all(Option::is_none) {
            return self.unk.iter().map(|&v| f64::from(v)).collect();
        }
        let mut out = vec![0.0f64; self.dim()];
        for v in &found {
            for (o, &x) in out.iter_mut().zip(v.unwrap_or(&self.unk)) {
                *o += f64::from(x);
            }
        }
        let n = found.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }
}
