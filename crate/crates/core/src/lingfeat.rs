//! Discrete linguistic features: POS tag, orthographic shape and a
//! capitalization class, each mapped to an id for an embedding table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;

/// Reserved id for unseen POS tags and shapes.
pub const UNK_ID: usize = 0;

/// Map upper → `X`, lower → `x`, digit → `d`, anything else to itself,
/// then collapse runs of the same symbol.
pub fn ortho_shape(surface: &str) -> String {
    let mut out = String::new();
    let mut last = None;
    for c in surface.chars() {
        let m = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_numeric() {
            'd'
        } else {
            c
        };
        if last != Some(m) {
            out.push(m);
            last = Some(m);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapClass {
    AllLower,
    AllUpper,
    InitCap,
    Mixed,
    NoLetters,
}

impl CapClass {
    pub const COUNT: usize = 5;

    pub fn id(self) -> usize {
        self as usize
    }
}

/// `AllLower`/`AllUpper` require every character to be a letter of that
/// case; `InitCap` is one uppercase letter followed only by lowercase
/// letters. Anything else containing a letter is `Mixed`.
pub fn cap_class(surface: &str) -> CapClass {
    let mut chars = surface.chars();
    if !surface.chars().any(char::is_alphabetic) {
        return CapClass::NoLetters;
    }
    if surface.chars().all(char::is_lowercase) {
        return CapClass::AllLower;
    }
    if surface.chars().all(char::is_uppercase) {
        return CapClass::AllUpper;
    }
    match chars.next() {
        Some(c) if c.is_uppercase() && chars.all(char::is_lowercase) => CapClass::InitCap,
        _ => CapClass::Mixed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDims {
    pub pos: usize,
    pub ortho: usize,
    pub cap: usize,
}

impl Default for FeatureDims {
    fn default() -> Self {
        FeatureDims {
            pos: 50,
            ortho: 50,
            cap: 5,
        }
    }
}

impl FeatureDims {
    pub fn total(&self) -> usize {
        self.pos + self.ortho + self.cap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureIds {
    pub pos: usize,
    pub shape: usize,
    pub cap: usize,
}

/// POS and shape indices over the training vocabulary, with id 0 for UNK.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVocab {
    pub pos_index: BTreeMap<String, usize>,
    pub shape_index: BTreeMap<String, usize>,
}

impl FeatureVocab {
    /// Build from the training split. Ids follow first appearance.
    pub fn build(sentences: &[Sentence]) -> Self {
        let mut v = FeatureVocab::default();
        for tok in sentences.iter().flat_map(|s| &s.tokens) {
            if let Some(pos) = &tok.pos {
                let next = v.pos_index.len() + 1;
                v.pos_index.entry(pos.clone()).or_insert(next);
            }
            let next = v.shape_index.len() + 1;
            v.shape_index.entry(ortho_shape(&tok.surface)).or_insert(next);
        }
        v
    }

    pub fn pos_size(&self) -> usize {
        self.pos_index.len() + 1
    }

    pub fn shape_size(&self) -> usize {
        self.shape_index.len() + 1
    }

    pub fn featurize(&self, sentence: &Sentence) -> Vec<FeatureIds> {
        sentence
            .tokens
            .iter()
            .map(|tok| FeatureIds {
                pos: tok
                    .pos
                    .as_ref()
                    .and_then(|p| self.pos_index.get(p).copied())
                    .unwrap_or(UNK_ID),
                shape: self
                    .shape_index
                    .get(&ortho_shape(&tok.surface))
                    .copied()
                    .unwrap_or(UNK_ID),
                cap: cap_class(&tok.surface).id(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;
    use proptest::prelude::*;

    fn collapse(s: &str) -> String {
        let mut out = String::new();
        for c in s.chars() {
            if !out.ends_with(c) {
                out.push(c);
            }
        }
        out
    }

    #[test]
    fn shapes() {
        assert_eq!(ortho_shape("Paracetamol"), "Xx");
        assert_eq!(ortho_shape("COVID-19"), "X-d");
        assert_eq!(ortho_shape("aspirin"), "x");
        assert_eq!(ortho_shape("2mg"), "dx");
    }

    #[test]
    fn cap_classes() {
        assert_eq!(cap_class("NSAID"), CapClass::AllUpper);
        assert_eq!(cap_class("Ibuprofen"), CapClass::InitCap);
        assert_eq!(cap_class("2mg"), CapClass::Mixed);
        assert_eq!(cap_class("aspirin"), CapClass::AllLower);
        assert_eq!(cap_class("123"), CapClass::NoLetters);
        assert_eq!(cap_class("iPhone"), CapClass::Mixed);
        assert_eq!(cap_class("A"), CapClass::AllUpper);
    }

    #[test]
    fn featurize_with_unknowns() {
        let train = vec![Sentence {
            id: 0,
            tokens: vec![Token::with_pos("pain", "NN"), Token::with_pos("Bad", "JJ")],
            gold_tags: None,
        }];
        let vocab = FeatureVocab::build(&train);
        assert_eq!(vocab.pos_index["NN"], 1);
        let test = Sentence {
            id: 0,
            tokens: vec![Token::with_pos("x", "NN"), Token::with_pos("y", "XYZ"), Token::new("9")],
            gold_tags: None,
        };
        let ids = vocab.featurize(&test);
        assert_eq!(ids.len(), 3);
        assert_eq!(ids[0].pos, 1);
        assert_eq!(ids[1].pos, UNK_ID);
        assert_eq!(ids[2].pos, UNK_ID);
        assert_eq!(ids[2].shape, UNK_ID);
        assert_eq!(ids[0].shape, vocab.shape_index["x"]);
    }

    proptest! {
        #[test]
        fn shape_collapse_is_idempotent(s in "\\PC{1,24}") {
            let shape = ortho_shape(&s);
            prop_assert_eq!(collapse(&shape), shape.clone());
        }

        #[test]
        fn featurize_ids_in_range(words in prop::collection::vec("[A-Za-z0-9-]{1,8}", 1..10)) {
            let sent = Sentence {
                id: 0,
                tokens: words.iter().map(|w| Token::with_pos(w.as_str(), "NN")).collect(),
                gold_tags: None,
            };
            let vocab = FeatureVocab::build(std::slice::from_ref(&sent));
            let ids = vocab.featurize(&sent);
            prop_assert_eq!(ids.len(), words.len());
            for f in ids {
                prop_assert!(f.pos < vocab.pos_size());
                prop_assert!(f.shape < vocab.shape_size());
                prop_assert!(f.cap < CapClass::COUNT);
            }
        }
    }
}
