//! Python bindings: BIO decoding, metrics, fold plans, CRF inference,
//! voting, the CTXE/SENT embedding files and saved-model prediction.

use std::collections::BTreeSet;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use stackner::corpus::{self, EntitySpan, Label, LabeledText, Sentence, Tag, Token};
use stackner::crf::{self, CrfParams, Emissions};
use stackner::embeddings::CtxEmbeddingFile;
use stackner::ensemble;
use stackner::metrics::{self, EvalReport};
use stackner::textclf::{self, SentEmbKind, SentEmbeddingFile};
use stackner::{tagger, Error, ErrorKind};

create_exception!(stackner_py, StacknerError, PyException);
create_exception!(stackner_py, ConfigError, StacknerError);
create_exception!(stackner_py, DataError, StacknerError);

fn py_err(e: Error) -> PyErr {
    match e.kind() {
        ErrorKind::Config => ConfigError::new_err(e.to_string()),
        ErrorKind::Data => DataError::new_err(e.to_string()),
        ErrorKind::Runtime => StacknerError::new_err(e.to_string()),
    }
}

type PyRes<T> = PyResult<T>;

fn parse_tags(tags: &[String]) -> PyRes<Vec<Tag>> {
    tags.iter()
        .map(|t| t.parse::<Tag>().map_err(py_err))
        .collect()
}

fn spans_out(spans: Vec<EntitySpan>) -> Vec<(usize, usize, String)> {
    spans.into_iter().map(|s| (s.start, s.end, s.etype)).collect()
}

fn spans_in(spans: Vec<(usize, usize, String)>) -> Vec<EntitySpan> {
    spans.into_iter().map(|(s, e, t)| EntitySpan::new(s, e, t)).collect()
}

/// Entity spans `(start, end, type)` of a BIO tag sequence; `end` is exclusive.
#[pyfunction]
fn decode_bio(tags: Vec<String>) -> PyRes<Vec<(usize, usize, String)>> {
    Ok(spans_out(corpus::decode_bio(&parse_tags(&tags)?)))
}

#[pyfunction]
fn encode_bio(spans: Vec<(usize, usize, String)>, length: usize) -> PyRes<Vec<String>> {
    let tags = corpus::encode_bio(&spans_in(spans), length).map_err(py_err)?;
    Ok(tags.iter().map(Tag::to_string).collect())
}

fn report_dict<'py>(py: Python<'py>, report: &EvalReport) -> PyRes<Bound<'py, PyDict>> {
    let prf = |p: &metrics::Prf| -> PyRes<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        d.set_item("precision", p.precision)?;
        d.set_item("recall", p.recall)?;
        d.set_item("f1", p.f1)?;
        d.set_item("tp", p.tp)?;
        d.set_item("fp", p.fp)?;
        d.set_item("fn", p.fn_)?;
        Ok(d)
    };
    let out = PyDict::new(py);
    out.set_item("micro", prf(&report.micro)?)?;
    let per = PyDict::new(py);
    for (k, v) in &report.per_type {
        per.set_item(k, prf(v)?)?;
    }
    out.set_item("per_type", per)?;
    Ok(out)
}

/// Strict entity-level scores over per-sentence span lists.
#[pyfunction]
#[pyo3(signature = (gold, pred, include_types = None))]
fn ner_prf<'py>(
    py: Python<'py>,
    gold: Vec<Vec<(usize, usize, String)>>,
    pred: Vec<Vec<(usize, usize, String)>>,
    include_types: Option<Vec<String>>,
) -> PyRes<Bound<'py, PyDict>> {
    let gold: Vec<_> = gold.into_iter().map(spans_in).collect();
    let pred: Vec<_> = pred.into_iter().map(spans_in).collect();
    let filter: Option<BTreeSet<String>> = include_types.map(|v| v.into_iter().collect());
    let report = metrics::ner_prf(&gold, &pred, filter.as_ref()).map_err(py_err)?;
    report_dict(py, &report)
}

/// Positive-class scores over binary labels.
#[pyfunction]
fn clf_prf<'py>(py: Python<'py>, gold: Vec<bool>, pred: Vec<bool>) -> PyRes<Bound<'py, PyDict>> {
    let conv = |v: Vec<bool>| v.into_iter().map(Label::from_bool).collect::<Vec<_>>();
    let report = metrics::clf_prf(&conv(gold), &conv(pred)).map_err(py_err)?;
    report_dict(py, &report)
}

/// Three-fold bagging plan as JSON.
#[pyfunction]
fn make_folds(train_ids: Vec<String>, dev_ids: Vec<String>, seed: u64) -> PyRes<String> {
    Ok(corpus::make_folds(&train_ids, &dev_ids, seed).map_err(py_err)?.to_json())
}

fn crf_inputs(
    emissions: Vec<Vec<f64>>,
    transitions: Vec<Vec<f64>>,
    start: Vec<f64>,
    stop: Vec<f64>,
) -> PyRes<(Emissions, CrfParams)> {
    let k = start.len();
    let bad = |what: &str| DataError::new_err(format!("{what} must have {k} columns"));
    if stop.len() != k {
        return Err(bad("stop"));
    }
    if transitions.len() != k || transitions.iter().any(|r| r.len() != k) {
        return Err(bad("transitions"));
    }
    if emissions.is_empty() {
        return Err(DataError::new_err("empty emission matrix"));
    }
    if emissions.iter().any(|r| r.len() != k) {
        return Err(bad("emissions"));
    }
    let params = CrfParams {
        num_tags: k,
        transitions: transitions.concat(),
        start,
        stop,
    };
    Ok((Emissions::from_rows(&emissions), params))
}

/// Log partition function of a linear-chain CRF.
#[pyfunction]
fn crf_log_z(emissions: Vec<Vec<f64>>, transitions: Vec<Vec<f64>>, start: Vec<f64>, stop: Vec<f64>) -> PyRes<f64> {
    let (e, p) = crf_inputs(emissions, transitions, start, stop)?;
    Ok(crf::forward_log_z(&e, &p))
}

/// Best tag-index path and its score.
#[pyfunction]
fn crf_viterbi(
    emissions: Vec<Vec<f64>>,
    transitions: Vec<Vec<f64>>,
    start: Vec<f64>,
    stop: Vec<f64>,
) -> PyRes<(Vec<usize>, f64)> {
    let (e, p) = crf_inputs(emissions, transitions, start, stop)?;
    Ok(crf::viterbi(&e, &p))
}

/// Token-level majority vote over member tag sequences, then BIO repair.
#[pyfunction]
#[pyo3(signature = (members, confident = 0))]
fn vote_ner(members: Vec<Vec<Vec<String>>>, confident: usize) -> PyRes<Vec<Vec<String>>> {
    let parsed = members
        .iter()
        .map(|m| m.iter().map(|s| parse_tags(s)).collect::<PyRes<Vec<_>>>())
        .collect::<PyRes<Vec<_>>>()?;
    let voted = ensemble::combine_ner(&parsed, confident).map_err(py_err)?;
    Ok(voted
        .iter()
        .map(|s| s.iter().map(Tag::to_string).collect())
        .collect())
}

/// Per-sentence token vectors in the CTXE binary format.
#[pyfunction]
fn write_ctx(path: PathBuf, dim: usize, blocks: Vec<Vec<f32>>) -> PyRes<()> {
    let file = CtxEmbeddingFile::new(dim, blocks).map_err(py_err)?;
    let bytes = file.to_bytes().map_err(py_err)?;
    std::fs::write(&path, bytes).map_err(|e| py_err(Error::from(e).in_file(path)))
}

/// `(dim, blocks)` of a CTXE file; each block is a flat token-major list.
#[pyfunction]
fn read_ctx(path: PathBuf) -> PyRes<(usize, Vec<Vec<f32>>)> {
    let bytes = std::fs::read(&path).map_err(|e| py_err(Error::from(e).in_file(&path)))?;
    let f = CtxEmbeddingFile::parse(&bytes).map_err(|e| py_err(e.in_file(&path)))?;
    let blocks = (0..f.sentence_count())
        .map(|s| (0..f.token_count(s)).flat_map(|t| f.vector(s, t).to_vec()).collect())
        .collect();
    Ok((f.dim(), blocks))
}

fn sent_kind(kind: &str) -> PyRes<SentEmbKind> {
    match kind {
        "ctx-cls" => Ok(SentEmbKind::CtxCls),
        "ctx-token-mean" => Ok(SentEmbKind::CtxTokenMean),
        other => Err(ConfigError::new_err(format!(
            "kind must be `ctx-cls` or `ctx-token-mean`, got `{other}`"
        ))),
    }
}

/// Sentence vectors in the SENT binary format; `rows` is one list per text.
#[pyfunction]
fn write_sent(path: PathBuf, kind: &str, rows: Vec<Vec<f32>>) -> PyRes<()> {
    let dim = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(DataError::new_err("rows differ in length"));
    }
    let file = SentEmbeddingFile::new(sent_kind(kind)?, dim, rows.concat()).map_err(py_err)?;
    let bytes = file.to_bytes().map_err(py_err)?;
    std::fs::write(&path, bytes).map_err(|e| py_err(Error::from(e).in_file(path)))
}

/// `(kind, rows)` of a SENT file.
#[pyfunction]
fn read_sent(path: PathBuf) -> PyRes<(String, Vec<Vec<f32>>)> {
    let bytes = std::fs::read(&path).map_err(|e| py_err(Error::from(e).in_file(&path)))?;
    let f = SentEmbeddingFile::parse(&bytes).map_err(|e| py_err(e.in_file(&path)))?;
    let kind = match f.kind() {
        SentEmbKind::CtxCls => "ctx-cls",
        SentEmbKind::CtxTokenMean => "ctx-token-mean",
        SentEmbKind::StaticMean => "static-mean",
    };
    Ok((kind.to_string(), (0..f.len()).map(|i| f.row(i).to_vec()).collect()))
}

/// A trained BiLSTM-CRF tagger loaded from a model directory.
#[pyclass(module = "stackner_py", frozen)]
struct Tagger {
    inner: tagger::Tagger,
}

#[pymethods]
impl Tagger {
    #[staticmethod]
    fn load(model_dir: PathBuf) -> PyRes<Self> {
        Ok(Tagger {
            inner: tagger::Tagger::load(&model_dir).map_err(py_err)?,
        })
    }

    #[getter]
    fn entity_types(&self) -> Vec<String> {
        self.inner.scheme.entity_types().to_vec()
    }

    /// Tag tokenized sentences; `pos` and `ctx_file` are needed when the
    /// model was trained with POS features or contextual vectors.
    #[pyo3(signature = (sentences, pos = None, ctx_file = None))]
    fn predict(
        &self,
        sentences: Vec<Vec<String>>,
        pos: Option<Vec<Vec<String>>>,
        ctx_file: Option<PathBuf>,
    ) -> PyRes<Vec<Vec<String>>> {
        if let Some(p) = &pos {
            if p.len() != sentences.len() || p.iter().zip(&sentences).any(|(a, b)| a.len() != b.len()) {
                return Err(DataError::new_err("pos tags must align with the sentences"));
            }
        }
        let sents: Vec<Sentence> = sentences
            .into_iter()
            .enumerate()
            .map(|(i, words)| Sentence {
                id: i,
                tokens: words
                    .into_iter()
                    .enumerate()
                    .map(|(j, w)| match &pos {
                        Some(p) => Token::with_pos(w, p[i][j].clone()),
                        None => Token::new(w),
                    })
                    .collect(),
                gold_tags: None,
            })
            .collect();
        let ctx = match ctx_file {
            Some(path) => {
                let bytes = std::fs::read(&path).map_err(|e| py_err(Error::from(e).in_file(&path)))?;
                Some(stackner::embeddings::read_ctx_file(&bytes, &sents).map_err(|e| py_err(e.in_file(&path)))?)
            }
            None => None,
        };
        let tags = self.inner.predict(&sents, ctx.as_ref()).map_err(py_err)?;
        Ok(tags.iter().map(|s| s.iter().map(Tag::to_string).collect()).collect())
    }
}

/// A trained sentence classifier loaded from a model directory.
#[pyclass(module = "stackner_py", frozen)]
struct Classifier {
    inner: textclf::Classifier,
}

#[pymethods]
impl Classifier {
    #[staticmethod]
    fn load(model_dir: PathBuf) -> PyRes<Self> {
        Ok(Classifier {
            inner: textclf::Classifier::load(&model_dir).map_err(py_err)?,
        })
    }

    #[getter]
    fn family(&self) -> String {
        format!("{:?}", self.inner.model.family()).to_lowercase()
    }

    /// `(label, score)` per text; contextual classifiers need `sent_file`.
    #[pyo3(signature = (texts, sent_file = None))]
    fn predict(&self, texts: Vec<String>, sent_file: Option<PathBuf>) -> PyRes<Vec<(bool, f64)>> {
        let items: Vec<LabeledText> = texts
            .into_iter()
            .enumerate()
            .map(|(i, text)| LabeledText {
                id: i.to_string(),
                label: Label::Negative,
                text,
            })
            .collect();
        let sent = match sent_file {
            Some(path) => {
                let bytes = std::fs::read(&path).map_err(|e| py_err(Error::from(e).in_file(&path)))?;
                Some(textclf::read_sent_file(&bytes, &items).map_err(|e| py_err(e.in_file(&path)))?)
            }
            None => None,
        };
        let preds = self.inner.predict(&items, sent.as_ref()).map_err(py_err)?;
        Ok(preds.into_iter().map(|(l, s)| (l.is_positive(), s)).collect())
    }
}

#[pymodule]
fn stackner_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("StacknerError", py.get_type::<StacknerError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("DataError", py.get_type::<DataError>())?;
    m.add_function(wrap_pyfunction!(decode_bio, m)?)?;
    m.add_function(wrap_pyfunction!(encode_bio, m)?)?;
    m.add_function(wrap_pyfunction!(ner_prf, m)?)?;
    m.add_function(wrap_pyfunction!(clf_prf, m)?)?;
    m.add_function(wrap_pyfunction!(make_folds, m)?)?;
    m.add_function(wrap_pyfunction!(crf_log_z, m)?)?;
    m.add_function(wrap_pyfunction!(crf_viterbi, m)?)?;
    m.add_function(wrap_pyfunction!(vote_ner, m)?)?;
    m.add_function(wrap_pyfunction!(write_ctx, m)?)?;
    m.add_function(wrap_pyfunction!(read_ctx, m)?)?;
    m.add_function(wrap_pyfunction!(write_sent, m)?)?;
    m.add_function(wrap_pyfunction!(read_sent, m)?)?;
    m.add_class::<Tagger>()?;
    m.add_class::<Classifier>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
