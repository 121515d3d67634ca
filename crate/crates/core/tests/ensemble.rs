use stackner::corpus::{make_folds, Label, Tag};
use stackner::ensemble::{combine_clf, run_bagging, vote_label, Predictions};
use stackner::Error;

fn plan() -> stackner::corpus::FoldPlan {
    let train: Vec<String> = (0..6).map(|i| format!("train:{i}")).collect();
    let dev: Vec<String> = (0..2).map(|i| format!("dev:{i}")).collect();
    make_folds(&train, &dev, 1).unwrap()
}

#[test]
fn sentence_majority_on_all_combinations() {
    for code in 0..8u8 {
        let labels: Vec<Label> = (0..3).map(|b| Label::from_bool(code >> b & 1 == 1)).collect();
        let expected = Label::from_bool(code.count_ones() >= 2);
        assert_eq!(vote_label(&labels), expected, "{labels:?}");
    }
}

#[test]
fn bagging_votes_and_reports_per_fold() {
    let out = run_bagging(&plan(), |i, fold| {
        let mut labels = vec![Label::Positive, Label::Negative];
        if i == 2 {
            labels[0] = Label::Negative;
        }
        Ok((Predictions::Clf(labels), fold.train.len()))
    })
    .unwrap();
    assert_eq!(out.combined, Predictions::Clf(vec![Label::Positive, Label::Negative]));
    assert_eq!(out.reports, vec![6, 5, 5]);
    assert_eq!(out.members.len(), 3);
}

#[test]
fn unanimous_members_pass_through() {
    let tags: Vec<Vec<Tag>> = vec![vec![Tag::Begin("X".into()), Tag::Inside("X".into()), Tag::Outside]];
    let out = run_bagging(&plan(), |_, _| Ok((Predictions::Ner(tags.clone()), ()))).unwrap();
    assert_eq!(out.combined, Predictions::Ner(tags));
    let same = vec![vec![Label::Positive, Label::Negative]; 3];
    assert_eq!(combine_clf(&same).unwrap(), same[0]);
}

#[test]
fn failing_fold_is_named() {
    let r = run_bagging(&plan(), |i, _| {
        if i == 1 {
            Err(Error::SingleClass)
        } else {
            Ok((Predictions::Clf(vec![Label::Positive]), ()))
        }
    });
    match r {
        Err(Error::Fold { fold, source }) => {
            assert_eq!(fold, 1);
            assert!(matches!(*source, Error::SingleClass));
        }
        other => panic!("expected fold error, got {other:?}"),
    }
}
