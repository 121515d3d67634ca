//! Strict entity-level and positive-class precision/recall/F1.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{EntitySpan, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }

    fn add(&mut self, tp: usize, fp: usize, fn_: usize) {
        *self = Prf::from_counts(self.tp + tp, self.fp + fp, self.fn_ + fn_);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro: Prf,
    pub per_type: BTreeMap<String, Prf>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text table, one row per type then the micro average.
    pub fn to_table(&self) -> String {
        let width = self
            .per_type
            .keys()
            .map(String::len)
            .chain([5])
            .max()
            .unwrap_or(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}",
            "type", "P", "R", "F1", "TP", "FP", "FN"
        );
        let rows = self
            .per_type
            .iter()
            .map(|(k, v)| (k.as_str(), v))
            .chain([("micro", &self.micro)]);
        for (name, p) in rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>6.4}  {:>6.4}  {:>6.4}  {:>6}  {:>6}  {:>6}",
                name, p.precision, p.recall, p.f1, p.tp, p.fp, p.fn_
            );
        }
        out
    }
}

/// Strict span matching: a prediction counts only if `(start, end, type)`
/// equals a gold span of the same sentence. With `include_types`, spans of
/// other types are dropped from both sides first.
pub fn ner_prf(
    gold: &[Vec<EntitySpan>],
    pred: &[Vec<EntitySpan>],
    include_types: Option<&BTreeSet<String>>,
) -> Result<EvalReport> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch {
            expected: gold.len(),
            found: pred.len(),
        });
    }
    let keep = |s: &&EntitySpan| include_types.is_none_or(|set| set.contains(&s.etype));
    let mut report = EvalReport::default();
    let mut counts: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for (g, p) in gold.iter().zip(pred) {
        let g: HashSet<&EntitySpan> = g.iter().filter(keep).collect();
        let p: HashSet<&EntitySpan> = p.iter().filter(keep).collect();
        for s in &p {
            let c = counts.entry(&s.etype).or_default();
            if g.contains(s) {
                c.0 += 1;
            } else {
                c.1 += 1;
            }
        }
        for s in g.difference(&p) {
            counts.entry(&s.etype).or_default().2 += 1;
        }
    }
    for (etype, (tp, fp, fn_)) in counts {
        report.micro.add(tp, fp, fn_);
        report
            .per_type
            .insert(etype.to_string(), Prf::from_counts(tp, fp, fn_));
    }
    Ok(report)
}

/// Precision, recall and F1 of the positive class.
pub fn clf_prf(gold: &[Label], pred: &[Label]) -> Result<EvalReport> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch {
            expected: gold.len(),
            found: pred.len(),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        match (g.is_positive(), p.is_positive()) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(EvalReport {
        micro: Prf::from_counts(tp, fp, fn_),
        per_type: BTreeMap::new(),
    })
}
