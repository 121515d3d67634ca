use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;
use serde_json::json;
use stackner::corpus::{
    decode_bio, make_folds, parse_clf_tsv, parse_conll, parse_conll_untagged, parse_label_tsv, write_conll,
    write_label_tsv, Fold, FoldPlan, Label, LabeledText, Sentence, Tag, TagScheme,
};
use stackner::embeddings::{load_static_vecs, read_ctx_file, BpeModel, CtxEmbeddingFile, StaticVecTable};
use stackner::ensemble::{run_bagging, Predictions};
use stackner::metrics::{clf_prf, ner_prf, EvalReport};
use stackner::rng::PRNG_NAME;
use stackner::tagger::{self, Providers, Tagger, TrainReport};
use stackner::textclf::{read_sent_file, train_classifier, Classifier, SentEmbKind, SentEmbeddingFile};
use stackner::{Error, Result};

use crate::config::{RunConfig, Task};

pub const RUNS_FILE: &str = "runs.jsonl";

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::from(e).in_file(path))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::from(e).in_file(parent))?;
    }
    fs::write(path, bytes).map_err(|e| Error::from(e).in_file(path))
}

/// Write to `out`, or stdout when absent.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_bytes(p, text.as_bytes()),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Append a reproducibility record to `dir/runs.jsonl`.
fn record_run(dir: &Path, command: &str, config_hash: &str, seed: u64) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
    let path = dir.join(RUNS_FILE);
    let line = json!({
        "command": command,
        "config_sha256": config_hash,
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
        "prng": PRNG_NAME,
    });
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| Error::from(e).in_file(&path))?;
    writeln!(f, "{line}").map_err(|e| Error::from(e).in_file(&path))
}

// ---- corpora -------------------------------------------------------------

fn scheme_for(config: &RunConfig) -> Result<TagScheme> {
    if let Some(types) = &config.entity_types {
        return TagScheme::new(types.iter().cloned());
    }
    let mut text = read_text(config.require(&config.train, "train")?)?;
    if let Some(dev) = &config.dev {
        text.push_str("\n\n");
        text.push_str(&read_text(dev)?);
    }
    TagScheme::infer_from_conll(&text, config.has_pos)
}

fn read_tagged(path: &Path, scheme: &TagScheme, has_pos: bool) -> Result<Vec<Sentence>> {
    parse_conll(&read_text(path)?, scheme, has_pos).map_err(|e| e.in_file(path))
}

/// Read a column corpus with or without a tag column (decided by the first token line).
pub fn read_ner_any(path: &Path, has_pos: bool) -> Result<Vec<Sentence>> {
    let text = read_text(path)?;
    let untagged = 1 + usize::from(has_pos);
    let cols = text
        .lines()
        .map(|l| l.split_whitespace().count())
        .find(|&n| n > 0)
        .unwrap_or(untagged);
    let parsed = if cols == untagged {
        parse_conll_untagged(&text, has_pos)
    } else {
        TagScheme::infer_from_conll(&text, has_pos).and_then(|s| parse_conll(&text, &s, has_pos))
    };
    parsed.map_err(|e| e.in_file(path))
}

fn read_clf(path: &Path) -> Result<Vec<LabeledText>> {
    parse_clf_tsv(&read_text(path)?).map_err(|e| e.in_file(path))
}

/// Classification input with or without the label column (`id<TAB>text`).
fn read_clf_any(path: &Path) -> Result<Vec<LabeledText>> {
    let text = read_text(path)?;
    let unlabeled = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .all(|l| l.split('\t').count() == 2);
    if !unlabeled {
        return parse_clf_tsv(&text).map_err(|e| e.in_file(path));
    }
    let items: Vec<LabeledText> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (id, body) = l.split_once('\t').expect("two columns");
            LabeledText {
                id: id.to_string(),
                label: Label::Negative,
                text: body.trim_end_matches('\r').to_string(),
            }
        })
        .collect();
    if items.is_empty() {
        return Err(Error::Empty("classification file has no rows".into()).in_file(path));
    }
    Ok(items)
}

fn read_ctx(path: &Path, corpus: &[Sentence]) -> Result<CtxEmbeddingFile> {
    read_ctx_file(&read_bytes(path)?, corpus).map_err(|e| e.in_file(path))
}

fn read_sent(path: &Path, texts: &[LabeledText]) -> Result<SentEmbeddingFile> {
    read_sent_file(&read_bytes(path)?, texts).map_err(|e| e.in_file(path))
}

fn read_static(config: &RunConfig) -> Result<Option<StaticVecTable>> {
    config
        .static_vectors
        .as_deref()
        .map(|p| load_static_vecs(&read_text(p)?).map_err(|e| e.in_file(p)))
        .transpose()
}

fn providers(config: &RunConfig) -> Result<Providers> {
    let bpe = match (&config.bpe_merges, &config.bpe_vectors) {
        (Some(m), Some(v)) => Some(BpeModel::load(&read_text(m)?, &read_text(v)?).map_err(|e| e.in_file(m))?),
        _ => None,
    };
    Ok(Providers {
        static_vecs: read_static(config)?,
        bpe,
    })
}

fn ner_ids(train: usize, dev: usize) -> (Vec<String>, Vec<String>) {
    (
        (0..train).map(|i| format!("train:{i}")).collect(),
        (0..dev).map(|i| format!("dev:{i}")).collect(),
    )
}

fn load_plan(path: &Path) -> Result<FoldPlan> {
    FoldPlan::from_json(&read_text(path)?).map_err(|e| e.in_file(path))
}

/// Positions of `ids` in the id universe.
fn positions(universe: &[String], ids: &[String]) -> Result<Vec<usize>> {
    let index: std::collections::HashMap<&str, usize> =
        universe.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    ids.iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::Config(format!("fold plan id `{id}` is not in the corpora")))
        })
        .collect()
}

/// Train and dev sentences concatenated, with their ids and contextual vectors.
struct NerUniverse {
    scheme: TagScheme,
    ids: Vec<String>,
    train_len: usize,
    sentences: Vec<Sentence>,
    ctx: Option<CtxEmbeddingFile>,
}

impl NerUniverse {
    fn load(config: &RunConfig, ctx_train_override: Option<&Path>) -> Result<Self> {
        let scheme = scheme_for(config)?;
        let train = read_tagged(config.require(&config.train, "train")?, &scheme, config.has_pos)?;
        let dev = read_tagged(config.require(&config.dev, "dev")?, &scheme, config.has_pos)?;
        let ctx_train_path = ctx_train_override.or(config.ctx_train.as_deref());
        let ctx = match (ctx_train_path, &config.ctx_dev) {
            (Some(t), Some(d)) => Some(read_ctx(t, &train)?.concat(&read_ctx(d, &dev)?)?),
            (None, None) => None,
            _ => return Err(Error::Config("contextual files are needed for both train and dev".into())),
        };
        let (mut ids, dev_ids) = ner_ids(train.len(), dev.len());
        ids.extend(dev_ids);
        let train_len = train.len();
        let mut sentences = train;
        sentences.extend(dev);
        Ok(NerUniverse {
            scheme,
            ids,
            train_len,
            sentences,
            ctx,
        })
    }

    fn default_fold(&self) -> Fold {
        Fold {
            train: self.ids[..self.train_len].to_vec(),
            dev: self.ids[self.train_len..].to_vec(),
        }
    }

    fn split(&self, idx: &[usize]) -> (Vec<Sentence>, Option<CtxEmbeddingFile>) {
        let sents = idx.iter().map(|&i| self.sentences[i].clone()).collect();
        (sents, self.ctx.as_ref().map(|c| c.select(idx)))
    }

    fn train_fold(&self, config: &RunConfig, fold: &Fold) -> Result<(Tagger, TrainReport)> {
        let (train, ctx_train) = self.split(&positions(&self.ids, &fold.train)?);
        let (dev, ctx_dev) = self.split(&positions(&self.ids, &fold.dev)?);
        tagger::train(
            &config.tagger,
            &self.scheme,
            &train,
            &dev,
            providers(config)?,
            ctx_train.as_ref(),
            ctx_dev.as_ref(),
        )
    }
}

struct ClfUniverse {
    ids: Vec<String>,
    train_len: usize,
    texts: Vec<LabeledText>,
    sent: Option<SentEmbeddingFile>,
}

impl ClfUniverse {
    fn load(config: &RunConfig, sent_train_override: Option<&Path>) -> Result<Self> {
        let train = read_clf(config.require(&config.train, "train")?)?;
        let dev = match &config.dev {
            Some(p) => read_clf(p)?,
            None => Vec::new(),
        };
        let sent_train_path = sent_train_override.or(config.sent_train.as_deref());
        let sent = match (sent_train_path, &config.sent_dev) {
            (Some(t), Some(d)) => Some(read_sent(t, &train)?.concat(&read_sent(d, &dev)?)?),
            (Some(t), None) if dev.is_empty() => Some(read_sent(t, &train)?),
            (None, None) => None,
            _ => return Err(Error::Config("sentence-embedding files are needed for both train and dev".into())),
        };
        let train_len = train.len();
        let mut texts = train;
        texts.extend(dev);
        Ok(ClfUniverse {
            ids: texts.iter().map(|t| t.id.clone()).collect(),
            train_len,
            texts,
            sent,
        })
    }

    /// Classifiers fit on the training ids of a fold; the dev part is unused.
    fn train_fold(&self, config: &RunConfig, fold: &Fold) -> Result<Classifier> {
        let idx = positions(&self.ids, &fold.train)?;
        let texts: Vec<LabeledText> = idx.iter().map(|&i| self.texts[i].clone()).collect();
        let sent = self.sent.as_ref().map(|s| s.select(&idx));
        train_classifier(&config.classifier, &texts, read_static(config)?, sent.as_ref())
    }
}

fn model_dir(config: &RunConfig, flag: Option<&Path>) -> Result<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| config.model_dir.clone())
        .ok_or_else(|| Error::Config("no model directory given (--model-dir or `model_dir`)".into()))
}

/// Fold `k` of the given plan, or of the plan derived from the seed.
fn fold_of(plan: Option<FoldPlan>, fold: Option<usize>, ids: &[String], train_len: usize, seed: u64) -> Result<Option<Fold>> {
    let Some(k) = fold else { return Ok(None) };
    let plan = match plan {
        Some(p) => p,
        None => make_folds(&ids[..train_len], &ids[train_len..], seed)?,
    };
    plan.folds
        .get(k)
        .cloned()
        .map(Some)
        .ok_or_else(|| Error::Config(format!("fold {k} not in plan of {} folds", plan.folds.len())))
}

// ---- commands --------------------------------------------------------------

pub fn split_folds(config: &RunConfig, out: Option<&Path>) -> Result<FoldPlan> {
    let (train_ids, dev_ids) = match config.task {
        Task::Ner => {
            let train = read_ner_any(config.require(&config.train, "train")?, config.has_pos)?;
            let dev = read_ner_any(config.require(&config.dev, "dev")?, config.has_pos)?;
            ner_ids(train.len(), dev.len())
        }
        Task::Clf => {
            let ids = |p: &Path| -> Result<Vec<String>> { Ok(read_clf_any(p)?.into_iter().map(|t| t.id).collect()) };
            (
                ids(config.require(&config.train, "train")?)?,
                ids(config.require(&config.dev, "dev")?)?,
            )
        }
    };
    let plan = make_folds(&train_ids, &dev_ids, config.seed)?;
    for (i, f) in plan.folds.iter().enumerate() {
        println!("fold {i}: train {}, dev {}", f.train.len(), f.dev.len());
    }
    let out = out.map(Path::to_path_buf).or_else(|| config.folds.clone());
    match out {
        Some(p) => write_bytes(&p, plan.to_json().as_bytes())?,
        None => println!("{}", plan.to_json()),
    }
    Ok(plan)
}

pub struct TrainArgs<'a> {
    pub model_dir: Option<&'a Path>,
    pub folds: Option<&'a Path>,
    pub fold: Option<usize>,
    /// Embedding file for the training split, overriding the config.
    pub embedding_file: Option<&'a Path>,
}

fn plan_from(config: &RunConfig, flag: Option<&Path>) -> Result<Option<FoldPlan>> {
    flag.or(config.folds.as_deref()).map(load_plan).transpose()
}

pub fn train_ner(config: &RunConfig, args: &TrainArgs) -> Result<TrainReport> {
    let dir = model_dir(config, args.model_dir)?;
    let universe = NerUniverse::load(config, args.embedding_file)?;
    let plan = plan_from(config, args.folds)?;
    let fold = match fold_of(plan, args.fold, &universe.ids, universe.train_len, config.seed)? {
        Some(f) => f,
        None => universe.default_fold(),
    };
    let (tagger, mut report) = universe.train_fold(config, &fold)?;
    tagger.save(&dir)?;
    report.model_path = Some(dir.clone());
    write_bytes(&dir.join("train_report.json"), to_json(&report).as_bytes())?;
    record_run(&dir, "train-ner", &config.hash(), config.seed)?;
    info!("best dev F1 {:.4} at epoch {}", report.best_dev_f1, report.best_epoch);
    println!("best dev F1 {:.4} at epoch {}; model in {}", report.best_dev_f1, report.best_epoch, dir.display());
    Ok(report)
}

pub fn train_clf(config: &RunConfig, args: &TrainArgs) -> Result<()> {
    let dir = model_dir(config, args.model_dir)?;
    let universe = ClfUniverse::load(config, args.embedding_file)?;
    let plan = plan_from(config, args.folds)?;
    let fold = match fold_of(plan, args.fold, &universe.ids, universe.train_len, config.seed)? {
        Some(f) => f,
        None => Fold {
            train: universe.ids[..universe.train_len].to_vec(),
            dev: universe.ids[universe.train_len..].to_vec(),
        },
    };
    let clf = universe.train_fold(config, &fold)?;
    clf.save(&dir)?;
    if !fold.dev.is_empty() {
        let idx = positions(&universe.ids, &fold.dev)?;
        let texts: Vec<LabeledText> = idx.iter().map(|&i| universe.texts[i].clone()).collect();
        let sent = universe.sent.as_ref().map(|s| s.select(&idx));
        let pred: Vec<Label> = clf.predict(&texts, sent.as_ref())?.into_iter().map(|p| p.0).collect();
        let gold: Vec<Label> = texts.iter().map(|t| t.label).collect();
        let report = clf_prf(&gold, &pred)?;
        write_bytes(&dir.join("dev_report.json"), report.to_json().as_bytes())?;
        println!("dev positive-class F1 {:.4}", report.micro.f1);
    }
    record_run(&dir, "train-clf", &config.hash(), config.seed)?;
    println!("model in {}", dir.display());
    Ok(())
}

/// A model directory of either kind.
pub enum Model {
    Tagger(Box<Tagger>),
    Classifier(Box<Classifier>),
}

pub fn load_model(dir: &Path) -> Result<Model> {
    let meta_path = dir.join(tagger::META_FILE);
    let meta: serde_json::Value =
        serde_json::from_str(&read_text(&meta_path)?).map_err(|e| Error::from(e).in_file(&meta_path))?;
    match meta.get("kind").and_then(|k| k.as_str()) {
        Some("tagger") => Ok(Model::Tagger(Box::new(Tagger::load(dir)?))),
        Some("classifier") => Ok(Model::Classifier(Box::new(Classifier::load(dir)?))),
        other => Err(Error::Format(format!("unknown model kind {other:?}")).in_file(meta_path)),
    }
}

pub struct PredictArgs<'a> {
    pub model_dir: &'a Path,
    pub input: &'a Path,
    pub ctx_file: Option<&'a Path>,
    pub sent_file: Option<&'a Path>,
    pub has_pos: bool,
    pub out: Option<&'a Path>,
}

/// Run one model over an input file and render the prediction file.
fn predict_text(model: &Model, args: &PredictArgs) -> Result<(String, Predictions)> {
    match model {
        Model::Tagger(t) => {
            let sentences = read_ner_any(args.input, args.has_pos)?;
            let ctx = args.ctx_file.map(|p| read_ctx(p, &sentences)).transpose()?;
            let tags = t.predict(&sentences, ctx.as_ref())?;
            Ok((write_conll(&sentences, Some(&tags))?, Predictions::Ner(tags)))
        }
        Model::Classifier(c) => {
            let texts = read_clf_any(args.input)?;
            let sent = match c.config.embedding {
                SentEmbKind::StaticMean => None,
                _ => Some(read_sent(
                    args.sent_file
                        .ok_or_else(|| Error::Config("this classifier needs --sent-file".into()))?,
                    &texts,
                )?),
            };
            let labels: Vec<Label> = c.predict(&texts, sent.as_ref())?.into_iter().map(|p| p.0).collect();
            let ids: Vec<String> = texts.iter().map(|t| t.id.clone()).collect();
            Ok((write_label_tsv(&ids, &labels)?, Predictions::Clf(labels)))
        }
    }
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    let model = load_model(args.model_dir)?;
    let (text, _) = predict_text(&model, args)?;
    emit(args.out, &text)?;
    let seed = match &model {
        Model::Tagger(t) => t.config.seed,
        Model::Classifier(c) => c.config.seed,
    };
    record_run(args.model_dir, "predict", &inputs_hash(args), seed)
}

/// Predict runs have no config file; hash the inputs instead.
fn inputs_hash(args: &PredictArgs) -> String {
    use sha2::{Digest, Sha256};
    let desc = format!("{}|{:?}|{:?}|{}", args.input.display(), args.ctx_file, args.sent_file, args.has_pos);
    Sha256::digest(desc.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct EvalArgs<'a> {
    pub task: Task,
    pub gold: &'a Path,
    pub pred: &'a Path,
    pub include_types: Option<BTreeSet<String>>,
    pub has_pos: bool,
    pub out: Option<&'a Path>,
}

fn eval_ner(gold: &[Sentence], pred: &[Vec<Tag>], include: Option<&BTreeSet<String>>) -> Result<EvalReport> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch {
            expected: gold.len(),
            found: pred.len(),
        });
    }
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::Alignment {
                sentence: i,
                expected: g.len(),
                found: p.len(),
            });
        }
    }
    let g: Vec<_> = gold.iter().map(Sentence::gold_spans).collect();
    let p: Vec<_> = pred.iter().map(|t| decode_bio(t)).collect();
    ner_prf(&g, &p, include)
}

fn eval_clf(gold: &[LabeledText], pred: &[(String, Label)]) -> Result<EvalReport> {
    let by_id: std::collections::HashMap<&str, Label> = pred.iter().map(|(id, l)| (id.as_str(), *l)).collect();
    let mut p = Vec::with_capacity(gold.len());
    for t in gold {
        p.push(
            *by_id
                .get(t.id.as_str())
                .ok_or_else(|| Error::Format(format!("no prediction for id `{}`", t.id)))?,
        );
    }
    clf_prf(&gold.iter().map(|t| t.label).collect::<Vec<_>>(), &p)
}

pub fn evaluate(args: &EvalArgs) -> Result<EvalReport> {
    let report = match args.task {
        Task::Ner => {
            let gold = read_ner_any(args.gold, args.has_pos)?;
            if gold.iter().any(|s| s.gold_tags.is_none()) {
                return Err(Error::Format("gold file has no tag column".into()).in_file(args.gold));
            }
            let pred = read_ner_any(args.pred, args.has_pos)?;
            let tags: Vec<Vec<Tag>> = pred
                .into_iter()
                .map(|s| s.gold_tags.ok_or_else(|| Error::Format("prediction file has no tag column".into())))
                .collect::<Result<_>>()
                .map_err(|e| e.in_file(args.pred))?;
            eval_ner(&gold, &tags, args.include_types.as_ref())?
        }
        Task::Clf => {
            let gold = read_clf(args.gold)?;
            let pred = parse_label_tsv(&read_text(args.pred)?).map_err(|e| e.in_file(args.pred))?;
            eval_clf(&gold, &pred)?
        }
    };
    print!("{}", report.to_table());
    if let Some(out) = args.out {
        write_bytes(out, report.to_json().as_bytes())?;
    }
    Ok(report)
}

pub struct EnsembleArgs<'a> {
    pub model_dirs: &'a [PathBuf],
    pub folds: Option<&'a Path>,
    pub ctx_file: Option<&'a Path>,
    pub sent_file: Option<&'a Path>,
    pub include_types: Option<BTreeSet<String>>,
    pub out: Option<&'a Path>,
}

#[derive(Serialize)]
struct EnsembleReport {
    members: Vec<String>,
    confident: usize,
    fold_reports: Vec<serde_json::Value>,
    test: Option<EvalReport>,
}

/// Vote the members' test predictions. With two or more `--model-dir`s the
/// models are loaded; otherwise one model per fold is trained under the
/// single model directory (`fold0`, `fold1`, ...).
pub fn ensemble(config: &RunConfig, args: &EnsembleArgs) -> Result<Predictions> {
    let test_path = config.require(&config.test, "test")?.to_path_buf();
    let ctx_test = args.ctx_file.map(Path::to_path_buf).or_else(|| config.ctx_test.clone());
    let sent_test = args.sent_file.map(Path::to_path_buf).or_else(|| config.sent_test.clone());
    let test_args = PredictArgs {
        model_dir: Path::new(""),
        input: &test_path,
        ctx_file: ctx_test.as_deref(),
        sent_file: sent_test.as_deref(),
        has_pos: config.has_pos,
        out: None,
    };

    let (base, members, combined, fold_reports, confident) = if args.model_dirs.len() >= 2 {
        let mut members = Vec::new();
        for dir in args.model_dirs {
            members.push(predict_text(&load_model(dir)?, &test_args)?.1);
        }
        let combined = stackner::ensemble::combine(&members, 0)?;
        let names = args.model_dirs.iter().map(|d| d.display().to_string()).collect();
        (None, names, combined, Vec::new(), 0)
    } else {
        let base = model_dir(config, args.model_dirs.first().map(PathBuf::as_path))?;
        let plan = match plan_from(config, args.folds)? {
            Some(p) => p,
            None => {
                let (train, dev) = match config.task {
                    Task::Ner => {
                        let u = NerUniverse::load(config, None)?;
                        (u.ids[..u.train_len].to_vec(), u.ids[u.train_len..].to_vec())
                    }
                    Task::Clf => {
                        let u = ClfUniverse::load(config, None)?;
                        (u.ids[..u.train_len].to_vec(), u.ids[u.train_len..].to_vec())
                    }
                };
                make_folds(&train, &dev, config.seed)?
            }
        };
        write_bytes(&base.join("folds.json"), plan.to_json().as_bytes())?;
        let ner = match config.task {
            Task::Ner => Some(NerUniverse::load(config, None)?),
            Task::Clf => None,
        };
        let clf = match config.task {
            Task::Clf => Some(ClfUniverse::load(config, None)?),
            Task::Ner => None,
        };
        let mut names = Vec::new();
        let outcome = run_bagging(&plan, |k, fold| {
            let dir = base.join(format!("fold{k}"));
            let report = match (&ner, &clf) {
                (Some(u), _) => {
                    let (t, mut r) = u.train_fold(config, fold)?;
                    t.save(&dir)?;
                    r.model_path = Some(dir.clone());
                    serde_json::to_value(&r)?
                }
                (_, Some(u)) => {
                    u.train_fold(config, fold)?.save(&dir)?;
                    json!({ "model_path": dir })
                }
                _ => unreachable!("one universe is loaded"),
            };
            record_run(&dir, "ensemble", &config.hash(), config.seed)?;
            let (_, pred) = predict_text(&load_model(&dir)?, &test_args)?;
            names.push(dir.display().to_string());
            Ok((pred, report))
        })?;
        (Some(base), names, outcome.combined, outcome.reports, plan.confident)
    };

    // Render the voted predictions in the interchange format of the task.
    let (text, test_report) = match &combined {
        Predictions::Ner(tags) => {
            let sentences = read_ner_any(&test_path, config.has_pos)?;
            let text = write_conll(&sentences, Some(tags))?;
            let report = if sentences.iter().all(|s| s.gold_tags.is_some()) {
                Some(eval_ner(&sentences, tags, args.include_types.as_ref())?)
            } else {
                None
            };
            (text, report)
        }
        Predictions::Clf(labels) => {
            let texts = read_clf_any(&test_path)?;
            let ids: Vec<String> = texts.iter().map(|t| t.id.clone()).collect();
            let text = write_label_tsv(&ids, labels)?;
            let labeled = read_clf(&test_path).is_ok();
            let report = if labeled {
                Some(clf_prf(&texts.iter().map(|t| t.label).collect::<Vec<_>>(), labels)?)
            } else {
                None
            };
            (text, report)
        }
    };
    emit(args.out, &text)?;
    if let Some(r) = &test_report {
        print!("{}", r.to_table());
    }
    if let Some(base) = base {
        let report = EnsembleReport {
            members,
            confident,
            fold_reports,
            test: test_report,
        };
        write_bytes(&base.join("ensemble_report.json"), to_json(&report).as_bytes())?;
        record_run(&base, "ensemble", &config.hash(), config.seed)?;
    }
    Ok(combined)
}
