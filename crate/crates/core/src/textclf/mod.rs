//! Binary text classifiers over sentence embeddings: RBF-kernel SVM,
//! logistic regression and a one-hidden-layer network.

mod logreg;
mod mlp;
mod persist;
mod sent;
mod svm;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, LabeledText};
use crate::embeddings::StaticVecTable;
use crate::error::{Error, Result};

pub use logreg::{train_logreg, LogRegConfig, LogRegModel};
pub use mlp::{train_nn, MlpModel, NnConfig};
pub use sent::{read_sent_file, sent_embed_static, write_sent_file, SentEmbKind, SentEmbeddingFile};
pub use svm::{grid_search_C, rbf_kernel, solve_dual, stratified_folds, train_svm, DualSolution, SvmConfig, SvmModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClfFamily {
    Svm,
    Logreg,
    Nn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClfConfig {
    pub family: ClfFamily,
    pub embedding: SentEmbKind,
    /// Loss or box-constraint multiplier for the positive class.
    pub positive_class_weight: f64,
    pub seed: u64,
    pub svm: SvmConfig,
    pub logreg: LogRegConfig,
    pub nn: NnConfig,
}

impl Default for ClfConfig {
    fn default() -> Self {
        ClfConfig {
            family: ClfFamily::Nn,
            embedding: SentEmbKind::CtxCls,
            positive_class_weight: 10.0,
            seed: 0,
            svm: SvmConfig::default(),
            logreg: LogRegConfig::default(),
            nn: NnConfig::default(),
        }
    }
}

impl ClfConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if !(self.positive_class_weight > 0.0 && self.positive_class_weight.is_finite()) {
            return bad("positive_class_weight must be positive");
        }
        if self.svm.c_grid.is_empty() || self.svm.c_grid.iter().any(|&c| !(c > 0.0)) {
            return bad("C grid must be non-empty and positive");
        }
        if matches!(self.svm.c, Some(c) if !(c > 0.0)) || matches!(self.svm.gamma, Some(g) if !(g > 0.0)) {
            return bad("C and gamma must be positive");
        }
        if !(self.svm.tolerance > 0.0) || self.svm.cv_folds < 2 {
            return bad("svm tolerance must be positive and cv_folds at least 2");
        }
        if !(self.logreg.learning_rate > 0.0) || self.logreg.l2 < 0.0 {
            return bad("logreg learning_rate must be positive and l2 non-negative");
        }
        let nn = &self.nn;
        if !(nn.learning_rate > 0.0) || nn.hidden == 0 || nn.batch_size == 0 || nn.epochs == 0 {
            return bad("network learning_rate, hidden, batch_size and epochs must be positive");
        }
        if !(0.0..1.0).contains(&nn.beta1) || !(0.0..1.0).contains(&nn.beta2) || !(nn.epsilon > 0.0) {
            return bad("Adam constants out of range");
        }
        Ok(())
    }
}

pub(crate) fn check_xy(xs: &[Vec<f64>], labels: &[Label]) -> Result<usize> {
    if xs.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            found: labels.len(),
        });
    }
    if xs.is_empty() {
        return Err(Error::Empty("no training examples".into()));
    }
    if labels.iter().all(|l| l.is_positive()) || labels.iter().all(|l| !l.is_positive()) {
        return Err(Error::SingleClass);
    }
    let dim = xs[0].len();
    if let Some(x) = xs.iter().find(|x| x.len() != dim) {
        return Err(Error::dim("feature vector", dim, x.len()));
    }
    Ok(dim)
}

/// A trained model of one family.
#[derive(Debug, Clone, PartialEq)]
pub enum ClfModel {
    Svm(SvmModel),
    Logreg(LogRegModel),
    Nn(MlpModel),
}

impl ClfModel {
    pub fn family(&self) -> ClfFamily {
        match self {
            ClfModel::Svm(_) => ClfFamily::Svm,
            ClfModel::Logreg(_) => ClfFamily::Logreg,
            ClfModel::Nn(_) => ClfFamily::Nn,
        }
    }
}

/// Decision and score: the SVM margin, or the positive-class probability.
pub fn predict_label(model: &ClfModel, x: &[f64]) -> Result<(Label, f64)> {
    match model {
        ClfModel::Svm(m) => {
            if let Some(sv) = m.support_vectors.first() {
                if sv.len() != x.len() {
                    return Err(Error::dim("svm input", sv.len(), x.len()));
                }
            }
            let f = m.decision(x)?;
            Ok((Label::from_bool(f > 0.0), f))
        }
        ClfModel::Logreg(m) => {
            let p = m.probability(x)?;
            Ok((Label::from_bool(p >= 0.5), p))
        }
        ClfModel::Nn(m) => {
            let p = m.probabilities(x)?;
            Ok((Label::from_bool(p[1] > p[0]), p[1]))
        }
    }
}

/// A classifier together with the frozen inputs needed to embed texts.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub config: ClfConfig,
    pub dim: usize,
    pub static_vecs: Option<StaticVecTable>,
    pub model: ClfModel,
}

/// Sentence vectors for `texts` from the configured source.
pub fn embed_texts(
    kind: SentEmbKind,
    texts: &[LabeledText],
    static_vecs: Option<&StaticVecTable>,
    sent: Option<&SentEmbeddingFile>,
) -> Result<Vec<Vec<f64>>> {
    match kind {
        SentEmbKind::StaticMean => {
            let table =
                static_vecs.ok_or_else(|| Error::Config("static-mean embeddings need a vector file".into()))?;
            texts
                .iter()
                .map(|t| sent_embed_static(table, t.tokens()).map_err(|e| Error::Format(format!("text `{}`: {e}", t.id))))
                .collect()
        }
        SentEmbKind::CtxCls | SentEmbKind::CtxTokenMean => {
            let file = sent.ok_or_else(|| Error::Config("contextual embeddings need a sentence-embedding file".into()))?;
            if file.kind() != kind {
                return Err(Error::Config(format!(
                    "sentence-embedding file holds {:?} vectors, configuration asks for {kind:?}",
                    file.kind()
                )));
            }
            file.check_alignment(texts.len())?;
            Ok((0..texts.len())
                .map(|i| file.row(i).iter().map(|&v| f64::from(v)).collect())
                .collect())
        }
    }
}

impl Classifier {
    pub fn features(&self, texts: &[LabeledText], sent: Option<&SentEmbeddingFile>) -> Result<Vec<Vec<f64>>> {
        let xs = embed_texts(self.config.embedding, texts, self.static_vecs.as_ref(), sent)?;
        if let Some(x) = xs.iter().find(|x| x.len() != self.dim) {
            return Err(Error::dim("sentence embedding", self.dim, x.len()));
        }
        Ok(xs)
    }

    pub fn predict(&self, texts: &[LabeledText], sent: Option<&SentEmbeddingFile>) -> Result<Vec<(Label, f64)>> {
        self.features(texts, sent)?
            .iter()
            .map(|x| predict_label(&self.model, x))
            .collect()
    }
}

/// Embed `texts` and fit the configured family. Parameters are rounded to
/// f32 so a saved model predicts exactly like this one.
pub fn train_classifier(
    config: &ClfConfig,
    texts: &[LabeledText],
    static_vecs: Option<StaticVecTable>,
    sent: Option<&SentEmbeddingFile>,
) -> Result<Classifier> {
    config.validate()?;
    let xs = embed_texts(config.embedding, texts, static_vecs.as_ref(), sent)?;
    let labels: Vec<Label> = texts.iter().map(|t| t.label).collect();
    let dim = check_xy(&xs, &labels)?;
    let w = config.positive_class_weight;
    let mut model = match config.family {
        ClfFamily::Svm => {
            let c = match config.svm.c {
                Some(c) => c,
                None => grid_search_C(&xs, &labels, w, &config.svm, config.seed)?,
            };
            ClfModel::Svm(train_svm(&xs, &labels, c, w, &config.svm)?)
        }
        ClfFamily::Logreg => ClfModel::Logreg(train_logreg(&xs, &labels, w, &config.logreg)?),
        ClfFamily::Nn => ClfModel::Nn(train_nn(&xs, &labels, w, &config.nn, config.seed)?),
    };
    persist::round_params(&mut model);
    Ok(Classifier {
        config: config.clone(),
        dim,
        static_vecs: if config.embedding == SentEmbKind::StaticMean { static_vecs } else { None },
        model,
    })
}
