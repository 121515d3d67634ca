use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub dev: Vec<String>,
}

/// Three train/dev splits over one id universe. Fold `confident` is the
/// original split; its model breaks voting ties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    pub confident: usize,
}

/// Build the bagging plan: fold 0 is the given split, folds 1 and 2 each
/// move one half of the (shuffled) training ids into dev.
pub fn make_folds(train_ids: &[String], dev_ids: &[String], seed: u64) -> Result<FoldPlan> {
    if dev_ids.is_empty() {
        return Err(Error::Empty("dev split has no ids".into()));
    }
    if train_ids.len() < 2 {
        return Err(Error::Config(format!(
            "need at least 2 training ids, got {}",
            train_ids.len()
        )));
    }
    let mut seen = HashSet::new();
    for id in train_ids.iter().chain(dev_ids) {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }

    let mut shuffled: Vec<&String> = train_ids.iter().collect();
    shuffled.shuffle(&mut rng::seeded(seed));
    let cut = shuffled.len().div_ceil(2);
    let halves: [HashSet<&str>; 2] = [
        shuffled[..cut].iter().map(|s| s.as_str()).collect(),
        shuffled[cut..].iter().map(|s| s.as_str()).collect(),
    ];

    let universe: Vec<&String> = train_ids.iter().chain(dev_ids).collect();
    let mut folds = vec![Fold {
        train: train_ids.to_vec(),
        dev: dev_ids.to_vec(),
    }];
    for half in &halves {
        let (dev, train): (Vec<&String>, Vec<&String>) =
            universe.iter().partition(|id| half.contains(id.as_str()));
        folds.push(Fold {
            train: train.into_iter().cloned().collect(),
            dev: dev.into_iter().cloned().collect(),
        });
    }
    Ok(FoldPlan {
        folds,
        confident: 0,
    })
}

impl FoldPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fold plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: FoldPlan = serde_json::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    /// The id universe in fold-0 order.
    pub fn universe(&self) -> Vec<&str> {
        let f = &self.folds[0];
        f.train.iter().chain(&f.dev).map(String::as_str).collect()
    }

    /// Check every plan invariant.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Format(format!("fold plan: {m}")));
        if self.folds.len() != 3 {
            return bad(format!("expected 3 folds, found {}", self.folds.len()));
        }
        if self.confident != 0 {
            return bad("confident fold must be 0".into());
        }
        let universe: HashSet<&str> = self.universe().into_iter().collect();
        let mut in_dev = HashSet::new();
        let mut in_train = HashSet::new();
        for (k, f) in self.folds.iter().enumerate() {
            let train: HashSet<&str> = f.train.iter().map(String::as_str).collect();
            let dev: HashSet<&str> = f.dev.iter().map(String::as_str).collect();
            if train.len() != f.train.len() || dev.len() != f.dev.len() {
                return bad(format!("fold {k} repeats an id"));
            }
            if !train.is_disjoint(&dev) {
                return bad(format!("fold {k}: train and dev overlap"));
            }
            if train.len() + dev.len() != universe.len()
                || !train.iter().chain(&dev).all(|id| universe.contains(id))
            {
                return bad(format!("fold {k} does not cover the id universe"));
            }
            in_dev.extend(dev);
            in_train.extend(train);
        }
        if in_dev.len() != universe.len() || in_train.len() != universe.len() {
            return bad("some id never appears in dev or never in train".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn four_train_two_dev() {
        let plan = make_folds(&ids("a b c d"), &ids("e f"), 7).unwrap();
        plan.validate().unwrap();
        assert_eq!(plan.folds[0].train, ids("a b c d"));
        assert_eq!(plan.folds[0].dev, ids("e f"));
        for f in &plan.folds[1..] {
            assert_eq!(f.dev.len(), 2);
            assert!(f.dev.iter().all(|d| "abcd".contains(d.as_str())));
            assert!(f.train.contains(&"e".to_string()) && f.train.contains(&"f".to_string()));
        }
    }

    #[test]
    fn two_train_one_dev() {
        let plan = make_folds(&ids("a b"), &ids("c"), 3).unwrap();
        plan.validate().unwrap();
        let mut devs: Vec<&str> = plan.folds[1..]
            .iter()
            .map(|f| {
                assert_eq!(f.dev.len(), 1);
                f.dev[0].as_str()
            })
            .collect();
        devs.sort();
        assert_eq!(devs, ["a", "b"]);
    }

    #[test]
    fn deterministic_and_errors() {
        let a = make_folds(&ids("a b c d e"), &ids("f"), 11).unwrap();
        let b = make_folds(&ids("a b c d e"), &ids("f"), 11).unwrap();
        assert_eq!(a, b);
        assert!(matches!(make_folds(&ids("a b"), &[], 0), Err(Error::Empty(_))));
        assert!(make_folds(&ids("a"), &ids("b"), 0).is_err());
        assert!(matches!(
            make_folds(&ids("a b"), &ids("a"), 0),
            Err(Error::DuplicateId(_))
        ));
    }

    #[test]
    fn json_shape() {
        let plan = make_folds(&ids("a b"), &ids("c"), 1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&plan.to_json()).unwrap();
        assert_eq!(v["confident"], 0);
        assert_eq!(v["folds"].as_array().unwrap().len(), 3);
        assert_eq!(v["folds"][0]["dev"][0], "c");
        assert_eq!(FoldPlan::from_json(&plan.to_json()).unwrap(), plan);
    }
}
