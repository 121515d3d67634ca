//! Bagging over the fold plan and majority voting of member predictions.

use std::collections::HashMap;

use log::info;

use crate::corpus::{Fold, FoldPlan, Label, Tag};
use crate::error::{Error, Result};

/// Strict-majority tag, or `confident` when no tag has a majority.
pub fn vote_token(tags: &[Tag], confident: &Tag) -> Tag {
    let mut counts: HashMap<&Tag, usize> = HashMap::new();
    for t in tags {
        *counts.entry(t).or_default() += 1;
    }
    counts
        .into_iter()
        .find(|&(_, c)| 2 * c > tags.len())
        .map_or_else(|| confident.clone(), |(t, _)| t.clone())
}

/// Turn every `I-t` that does not continue an entity of type `t` into `B-t`.
pub fn repair_bio(tags: &[Tag]) -> Vec<Tag> {
    let mut out: Vec<Tag> = Vec::with_capacity(tags.len());
    for tag in tags {
        let fixed = match tag {
            Tag::Inside(t) => {
                let continues = out.last().and_then(Tag::entity_type) == Some(t.as_str());
                if continues {
                    tag.clone()
                } else {
                    Tag::Begin(t.clone())
                }
            }
            _ => tag.clone(),
        };
        out.push(fixed);
    }
    out
}

/// Majority label; a tie (even member count) goes to negative.
pub fn vote_label(labels: &[Label]) -> Label {
    let pos = labels.iter().filter(|l| l.is_positive()).count();
    Label::from_bool(2 * pos > labels.len())
}

/// Token-level vote over aligned model outputs, then BIO repair.
pub fn combine_ner(models: &[Vec<Vec<Tag>>], confident: usize) -> Result<Vec<Vec<Tag>>> {
    let first = models.first().ok_or_else(|| Error::Empty("no model predictions to combine".into()))?;
    if confident >= models.len() {
        return Err(Error::Config(format!("confident model {confident} out of range")));
    }
    for m in models {
        if m.len() != first.len() {
            return Err(Error::LengthMismatch {
                expected: first.len(),
                found: m.len(),
            });
        }
        for (s, (a, b)) in first.iter().zip(m).enumerate() {
            if a.len() != b.len() {
                return Err(Error::Alignment {
                    sentence: s,
                    expected: a.len(),
                    found: b.len(),
                });
            }
        }
    }
    Ok((0..first.len())
        .map(|s| {
            let voted: Vec<Tag> = (0..first[s].len())
                .map(|t| {
                    let column: Vec<Tag> = models.iter().map(|m| m[s][t].clone()).collect();
                    vote_token(&column, &models[confident][s][t])
                })
                .collect();
            repair_bio(&voted)
        })
        .collect())
}

pub fn combine_clf(models: &[Vec<Label>]) -> Result<Vec<Label>> {
    let first = models.first().ok_or_else(|| Error::Empty("no model predictions to combine".into()))?;
    if let Some(m) = models.iter().find(|m| m.len() != first.len()) {
        return Err(Error::LengthMismatch {
            expected: first.len(),
            found: m.len(),
        });
    }
    Ok((0..first.len())
        .map(|i| vote_label(&models.iter().map(|m| m[i]).collect::<Vec<_>>()))
        .collect())
}

/// One member's predictions on the shared test set.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Ner(Vec<Vec<Tag>>),
    Clf(Vec<Label>),
}

#[derive(Debug, Clone)]
pub struct BaggingOutcome<R> {
    pub combined: Predictions,
    pub members: Vec<Predictions>,
    pub reports: Vec<R>,
}

/// Train one model per fold with `train`, which also predicts the test
/// set, then vote. The plan's confident fold breaks NER ties.
pub fn run_bagging<R>(
    plan: &FoldPlan,
    mut train: impl FnMut(usize, &Fold) -> Result<(Predictions, R)>,
) -> Result<BaggingOutcome<R>> {
    plan.validate()?;
    let mut members = Vec::with_capacity(plan.folds.len());
    let mut reports = Vec::with_capacity(plan.folds.len());
    for (i, fold) in plan.folds.iter().enumerate() {
        info!("training fold {i} ({} train, {} dev)", fold.train.len(), fold.dev.len());
        let (pred, report) = train(i, fold).map_err(|e| Error::Fold {
            fold: i,
            source: Box::new(e),
        })?;
        members.push(pred);
        reports.push(report);
    }
    let combined = combine(&members, plan.confident)?;
    Ok(BaggingOutcome {
        combined,
        members,
        reports,
    })
}

/// Vote over member predictions of one task.
pub fn combine(members: &[Predictions], confident: usize) -> Result<Predictions> {
    match members.first() {
        None => Err(Error::Empty("no model predictions to combine".into())),
        Some(Predictions::Ner(_)) => {
            let ner: Option<Vec<Vec<Vec<Tag>>>> = members
                .iter()
                .map(|p| match p {
                    Predictions::Ner(v) => Some(v.clone()),
                    Predictions::Clf(_) => None,
                })
                .collect();
            let ner = ner.ok_or_else(|| Error::Config("members mix tagging and classification output".into()))?;
            combine_ner(&ner, confident).map(Predictions::Ner)
        }
        Some(Predictions::Clf(_)) => {
            let clf: Option<Vec<Vec<Label>>> = members
                .iter()
                .map(|p| match p {
                    Predictions::Clf(v) => Some(v.clone()),
                    Predictions::Ner(_) => None,
                })
                .collect();
            let clf = clf.ok_or_else(|| Error::Config("members mix tagging and classification output".into()))?;
            combine_clf(&clf).map(Predictions::Clf)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{decode_bio, encode_bio};
    use proptest::prelude::*;

    fn tags(s: &str) -> Vec<Tag> {
        s.split_whitespace().map(|t| t.parse().unwrap()).collect()
    }

    #[test]
    fn voting_examples() {
        let t = tags("B-ADE B-ADE O");
        assert_eq!(vote_token(&t, &t[0]), tags("B-ADE")[0]);
        let t = tags("B-ADE I-ADE O");
        assert_eq!(vote_token(&t, &t[0]), tags("B-ADE")[0]);
        let t = tags("O O O");
        assert_eq!(vote_token(&t, &t[2]), Tag::Outside);
        use Label::*;
        assert_eq!(vote_label(&[Positive, Positive, Negative]), Positive);
        assert_eq!(vote_label(&[Negative, Negative, Negative]), Negative);
        assert_eq!(vote_label(&[Positive, Negative, Negative]), Negative);
    }

    #[test]
    fn repair_examples() {
        assert_eq!(repair_bio(&tags("I-ADE I-ADE")), tags("B-ADE I-ADE"));
        assert_eq!(repair_bio(&tags("B-X I-Y")), tags("B-X B-Y"));
        let ok = tags("O B-X I-X B-Y O");
        assert_eq!(repair_bio(&ok), ok);
    }

    fn tag_strategy() -> impl Strategy<Value = Tag> {
        prop_oneof![
            Just(Tag::Outside),
            Just(Tag::Begin("A".into())),
            Just(Tag::Inside("A".into())),
            Just(Tag::Begin("B".into())),
            Just(Tag::Inside("B".into())),
        ]
    }

    proptest! {
        #[test]
        fn repair_is_idempotent_and_only_changes_inside(seq in prop::collection::vec(tag_strategy(), 0..10)) {
            let once = repair_bio(&seq);
            prop_assert_eq!(repair_bio(&once), once.clone());
            for (a, b) in seq.iter().zip(&once) {
                prop_assert_eq!(a.entity_type(), b.entity_type());
                if a != b {
                    prop_assert!(a.is_inside() && matches!(b, Tag::Begin(_)));
                }
            }
            prop_assert_eq!(encode_bio(&decode_bio(&once), once.len()).unwrap(), once);
        }

        #[test]
        fn vote_is_permutation_invariant(a in tag_strategy(), b in tag_strategy(), c in tag_strategy(), k in tag_strategy()) {
            let v = vote_token(&[a.clone(), b.clone(), c.clone()], &k);
            prop_assert_eq!(&vote_token(&[c.clone(), a.clone(), b.clone()], &k), &v);
            prop_assert_eq!(&vote_token(&[b, c, a], &k), &v);
        }
    }

    #[test]
    fn mismatched_members_rejected() {
        let a = vec![tags("O B-X")];
        let b = vec![tags("O")];
        assert!(matches!(combine_ner(&[a.clone(), b], 0), Err(Error::Alignment { sentence: 0, .. })));
        assert!(combine_ner(&[a.clone(), vec![]], 0).is_err());
        assert!(combine(&[Predictions::Ner(a), Predictions::Clf(vec![])], 0).is_err());
    }
}
