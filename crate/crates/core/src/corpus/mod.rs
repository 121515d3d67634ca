//! Corpus types and file formats.
//!
//! NER corpora use a column format: one token per line, columns
//! `surface [POS] TAG`, blank line between sentences. Columns are split on
//! any whitespace when reading and written with single tabs.
//! Classification corpora are `id<TAB>label<TAB>text` with label 0 or 1.

mod bio;
mod folds;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bio::{decode_bio, encode_bio, EntitySpan};
pub use folds::{make_folds, Fold, FoldPlan};

/// A BIO tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Tag {
    Outside,
    Begin(String),
    Inside(String),
}

impl Tag {
    pub fn entity_type(&self) -> Option<&str> {
        match self {
            Tag::Outside => None,
            Tag::Begin(t) | Tag::Inside(t) => Some(t),
        }
    }

    pub fn is_inside(&self) -> bool {
        matches!(self, Tag::Inside(_))
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Outside => f.write_str("O"),
            Tag::Begin(t) => write!(f, "B-{t}"),
            Tag::Inside(t) => write!(f, "I-{t}"),
        }
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(Tag::Outside);
        }
        match s.split_at_checked(2) {
            Some(("B-", t)) if !t.is_empty() => Ok(Tag::Begin(t.to_string())),
            Some(("I-", t)) if !t.is_empty() => Ok(Tag::Inside(t.to_string())),
            _ => Err(Error::Format(format!("not a BIO tag: `{s}`"))),
        }
    }
}

impl TryFrom<String> for Tag {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Tag> for String {
    fn from(t: Tag) -> String {
        t.to_string()
    }
}

/// The BIO label inventory: `O`, then `B-t`, `I-t` for every entity type in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemeRepr", into = "SchemeRepr")]
pub struct TagScheme {
    entity_types: Vec<String>,
    tags: Vec<Tag>,
    index: HashMap<Tag, usize>,
}

#[derive(Serialize, Deserialize)]
struct SchemeRepr {
    entity_types: Vec<String>,
}

impl TryFrom<SchemeRepr> for TagScheme {
    type Error = Error;

    fn try_from(r: SchemeRepr) -> Result<Self> {
        TagScheme::new(r.entity_types)
    }
}

impl From<TagScheme> for SchemeRepr {
    fn from(s: TagScheme) -> Self {
        SchemeRepr {
            entity_types: s.entity_types,
        }
    }
}

impl TagScheme {
    pub fn new<S: Into<String>>(entity_types: impl IntoIterator<Item = S>) -> Result<Self> {
        let entity_types: Vec<String> = entity_types.into_iter().map(Into::into).collect();
        let mut tags = vec![Tag::Outside];
        for t in &entity_types {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!("invalid entity type name `{t}`")));
            }
            tags.push(Tag::Begin(t.clone()));
            tags.push(Tag::Inside(t.clone()));
        }
        let mut index = HashMap::with_capacity(tags.len());
        for (i, tag) in tags.iter().enumerate() {
            if index.insert(tag.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate entity type in {tag}")));
            }
        }
        Ok(TagScheme {
            entity_types,
            tags,
            index,
        })
    }

    /// Collect entity types from the tag column of a column-format corpus,
    /// in order of first appearance.
    pub fn infer_from_conll(text: &str, has_pos: bool) -> Result<Self> {
        let expected = if has_pos { 3 } else { 2 };
        let mut types: Vec<String> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.is_empty() {
                continue;
            }
            if cols.len() != expected {
                return Err(Error::MalformedLine {
                    line: lineno + 1,
                    expected,
                    found: cols.len(),
                });
            }
            let tag: Tag = cols[expected - 1].parse().map_err(|_| Error::UnknownTag {
                line: lineno + 1,
                tag: cols[expected - 1].to_string(),
            })?;
            if let Some(t) = tag.entity_type() {
                if !types.iter().any(|x| x == t) {
                    types.push(t.to_string());
                }
            }
        }
        TagScheme::new(types)
    }

    pub fn entity_types(&self) -> &[String] {
        &self.entity_types
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn index_of(&self, tag: &Tag) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn tag(&self, index: usize) -> &Tag {
        &self.tags[index]
    }

    pub fn contains(&self, tag: &Tag) -> bool {
        self.index.contains_key(tag)
    }

    pub fn indices(&self, tags: &[Tag]) -> Result<Vec<usize>> {
        tags.iter()
            .map(|t| {
                self.index_of(t).ok_or_else(|| Error::UnknownTag {
                    line: 0,
                    tag: t.to_string(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub pos: Option<String>,
}

impl Token {
    pub fn new(surface: impl Into<String>) -> Self {
        Token {
            surface: surface.into(),
            pos: None,
        }
    }

    pub fn with_pos(surface: impl Into<String>, pos: impl Into<String>) -> Self {
        Token {
            surface: surface.into(),
            pos: Some(pos.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    /// Ordinal within the corpus.
    pub id: usize,
    pub tokens: Vec<Token>,
    pub gold_tags: Option<Vec<Tag>>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn gold_spans(&self) -> Vec<EntitySpan> {
        self.gold_tags.as_deref().map(decode_bio).unwrap_or_default()
    }
}

/// Parse a tagged column-format corpus.
pub fn parse_conll(text: &str, scheme: &TagScheme, has_pos: bool) -> Result<Vec<Sentence>> {
    read_columns(text, has_pos, Some(scheme))
}

/// Parse a column-format corpus without a tag column.
pub fn parse_conll_untagged(text: &str, has_pos: bool) -> Result<Vec<Sentence>> {
    read_columns(text, has_pos, None)
}

fn read_columns(text: &str, has_pos: bool, scheme: Option<&TagScheme>) -> Result<Vec<Sentence>> {
    let expected = 1 + usize::from(has_pos) + usize::from(scheme.is_some());
    let mut sentences = Vec::new();
    let mut tokens = Vec::new();
    let mut tags = Vec::new();

    let flush = |tokens: &mut Vec<Token>, tags: &mut Vec<Tag>, out: &mut Vec<Sentence>| {
        if !tokens.is_empty() {
            out.push(Sentence {
                id: out.len(),
                tokens: std::mem::take(tokens),
                gold_tags: scheme.map(|_| std::mem::take(tags)),
            });
        }
    };

    for (lineno, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            flush(&mut tokens, &mut tags, &mut sentences);
            continue;
        }
        if cols.len() != expected {
            return Err(Error::MalformedLine {
                line: lineno + 1,
                expected,
                found: cols.len(),
            });
        }
        tokens.push(Token {
            surface: cols[0].to_string(),
            pos: has_pos.then(|| cols[1].to_string()),
        });
        if let Some(scheme) = scheme {
            let raw = cols[expected - 1];
            let tag = raw
                .parse::<Tag>()
                .ok()
                .filter(|t| scheme.contains(t))
                .ok_or_else(|| Error::UnknownTag {
                    line: lineno + 1,
                    tag: raw.to_string(),
                })?;
            tags.push(tag);
        }
    }
    flush(&mut tokens, &mut tags, &mut sentences);

    if sentences.is_empty() {
        return Err(Error::Empty("corpus has no sentences".into()));
    }
    Ok(sentences)
}

/// Serialize sentences in the column format. `tags` overrides the gold
/// column (prediction files); with `None` the gold tags are written if present.
pub fn write_conll(sentences: &[Sentence], tags: Option<&[Vec<Tag>]>) -> Result<String> {
    if let Some(tags) = tags {
        if tags.len() != sentences.len() {
            return Err(Error::LengthMismatch {
                expected: sentences.len(),
                found: tags.len(),
            });
        }
    }
    let mut out = String::new();
    for (i, s) in sentences.iter().enumerate() {
        let column = match tags {
            Some(t) => Some(&t[i]),
            None => s.gold_tags.as_ref(),
        };
        if let Some(col) = column {
            if col.len() != s.len() {
                return Err(Error::Alignment {
                    sentence: i,
                    expected: s.len(),
                    found: col.len(),
                });
            }
        }
        for (j, tok) in s.tokens.iter().enumerate() {
            out.push_str(&tok.surface);
            if let Some(pos) = &tok.pos {
                out.push('\t');
                out.push_str(pos);
            }
            if let Some(col) = column {
                out.push('\t');
                out.push_str(&col[j].to_string());
            }
            out.push('\n');
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    /// +1 / -1 encoding used by the SVM.
    pub fn sign(self) -> f64 {
        if self.is_positive() {
            1.0
        } else {
            -1.0
        }
    }

    pub fn as_digit(self) -> char {
        if self.is_positive() {
            '1'
        } else {
            '0'
        }
    }

    fn parse_digit(s: &str, line: usize) -> Result<Self> {
        match s {
            "0" => Ok(Label::Negative),
            "1" => Ok(Label::Positive),
            other => Err(Error::NonBinaryLabel {
                line,
                found: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledText {
    pub id: String,
    pub label: Label,
    pub text: String,
}

impl LabeledText {
    /// Whitespace tokenization; classification inputs are not preprocessed.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.text.split_whitespace()
    }
}

/// Parse `id<TAB>label<TAB>text` lines. Blank lines are skipped.
pub fn parse_clf_tsv(text: &str) -> Result<Vec<LabeledText>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.splitn(3, '\t');
        let (Some(id), Some(label), Some(body)) = (cols.next(), cols.next(), cols.next()) else {
            return Err(Error::MissingColumn { line: lineno + 1 });
        };
        out.push(LabeledText {
            id: id.to_string(),
            label: Label::parse_digit(label, lineno + 1)?,
            text: body.to_string(),
        });
    }
    if out.is_empty() {
        return Err(Error::Empty("classification file has no rows".into()));
    }
    Ok(out)
}

pub fn write_clf_tsv(items: &[LabeledText]) -> String {
    let mut out = String::new();
    for it in items {
        out.push_str(&format!("{}\t{}\t{}\n", it.id, it.label.as_digit(), it.text));
    }
    out
}

/// Classification prediction file: `id<TAB>label` per line.
pub fn write_label_tsv(ids: &[String], labels: &[Label]) -> Result<String> {
    if ids.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: ids.len(),
            found: labels.len(),
        });
    }
    let mut out = String::new();
    for (id, l) in ids.iter().zip(labels) {
        out.push_str(&format!("{id}\t{}\n", l.as_digit()));
    }
    Ok(out)
}

pub fn parse_label_tsv(text: &str) -> Result<Vec<(String, Label)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.splitn(3, '\t');
        let (Some(id), Some(label)) = (cols.next(), cols.next()) else {
            return Err(Error::MissingColumn { line: lineno + 1 });
        };
        out.push((id.to_string(), Label::parse_digit(label.trim(), lineno + 1)?));
    }
    Ok(out)
}
