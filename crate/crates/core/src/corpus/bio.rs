use serde::{Deserialize, Serialize};

use super::Tag;
use crate::error::{Error, Result};

/// A typed entity over token positions `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub etype: String,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, etype: impl Into<String>) -> Self {
        EntitySpan {
            start,
            end,
            etype: etype.into(),
        }
    }
}

/// Maximal `B-t (I-t)*` runs become spans. An `I-t` that does not continue
/// an entity of type `t` starts a new one.
pub fn decode_bio(tags: &[Tag]) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            Tag::Outside => {
                if let Some((s, t)) = open.take() {
                    spans.push(EntitySpan::new(s, i, t));
                }
            }
            Tag::Inside(t) if open.is_some_and(|(_, cur)| cur == t) => {}
            Tag::Begin(t) | Tag::Inside(t) => {
                if let Some((s, cur)) = open.take() {
                    spans.push(EntitySpan::new(s, i, cur));
                }
                open = Some((i, t));
            }
        }
    }
    if let Some((s, t)) = open {
        spans.push(EntitySpan::new(s, tags.len(), t));
    }
    spans
}

pub fn encode_bio(spans: &[EntitySpan], len: usize) -> Result<Vec<Tag>> {
    let mut sorted: Vec<&EntitySpan> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    for s in &sorted {
        if s.start >= s.end || s.end > len {
            return Err(Error::InvalidSpan {
                start: s.start,
                end: s.end,
                len,
            });
        }
    }
    for w in sorted.windows(2) {
        if w[1].start < w[0].end {
            return Err(Error::OverlappingSpans(w[0].start, w[0].end, w[1].start, w[1].end));
        }
    }
    let mut tags = vec![Tag::Outside; len];
    for s in sorted {
        tags[s.start] = Tag::Begin(s.etype.clone());
        for t in &mut tags[s.start + 1..s.end] {
            *t = Tag::Inside(s.etype.clone());
        }
    }
    Ok(tags)
}
