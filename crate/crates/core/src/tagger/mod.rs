//! BiLSTM-CRF tagger over stacked embeddings and linguistic features.

mod network;
mod params;
mod persist;
mod train;

use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, Tag, TagScheme};
use crate::crf::{self, Emissions};
use crate::embeddings::{BpeModel, CtxEmbeddingFile, EmbeddingStackSpec, Provider, StaticVecTable};
use crate::error::{Error, Result};
use crate::lingfeat::{FeatureDims, FeatureVocab};
use crate::rng;

use network::{Layout, SentenceInput};

pub use params::{CharEncoder, FeatureTables, ParamSizes, TaggerParams};
pub use crate::modeldir::{META_FILE, MODEL_FORMAT_VERSION, WEIGHTS_FILE};
pub use train::{train, EpochRecord, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaggerConfig {
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// LSTM units per direction.
    pub hidden: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub features: FeatureDims,
    pub stack: EmbeddingStackSpec,
    pub seed: u64,
    /// Per-sentence global-norm clip; `None` disables clipping.
    pub gradient_clip: Option<f64>,
    /// Reserved. Only 0.0 is accepted.
    pub dropout: f64,
    pub init_range: f64,
    pub forget_bias: f64,
    /// Stop after this many epochs without a dev F1 improvement.
    pub patience: Option<usize>,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            learning_rate: 0.1,
            optimizer: Optimizer::Sgd,
            hidden: 256,
            batch_size: 32,
            epochs: 150,
            features: FeatureDims::default(),
            stack: EmbeddingStackSpec {
                providers: vec![Provider::default_char()],
                features: true,
            },
            seed: 0,
            gradient_clip: Some(5.0),
            dropout: 0.0,
            init_range: 0.1,
            forget_bias: 1.0,
            patience: None,
        }
    }
}

impl TaggerConfig {
    /// Very small dimensions for tests.
    pub fn tiny() -> Self {
        TaggerConfig {
            hidden: 3,
            features: FeatureDims { pos: 2, ortho: 2, cap: 2 },
            stack: EmbeddingStackSpec {
                providers: vec![Provider::Char { char_dim: 2, hidden: 2 }],
                features: true,
            },
            ..TaggerConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.hidden == 0 || self.batch_size == 0 {
            return bad("hidden and batch_size must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.stack.features && (self.features.pos == 0 || self.features.ortho == 0 || self.features.cap == 0) {
            return bad("feature dims must be positive");
        }
        if matches!(self.gradient_clip, Some(c) if !(c > 0.0)) {
            return bad("gradient_clip must be positive");
        }
        if self.dropout != 0.0 {
            return bad("dropout is not supported");
        }
        if !(self.init_range > 0.0) {
            return bad("init_range must be positive");
        }
        if self.patience == Some(0) {
            return bad("patience must be at least 1");
        }
        self.stack.validate()
    }

    /// Width of the BiLSTM input.
    pub fn input_dim(&self) -> usize {
        self.stack.total_dim() + if self.stack.features { self.features.total() } else { 0 }
    }

    fn layout(&self) -> Layout {
        Layout {
            provider_dim: self.stack.total_dim(),
            chars: self
                .stack
                .char_provider()
                .map(|(_, h)| (self.stack.offset_of("char").unwrap_or(0), h)),
        }
    }
}

/// Character inventory of the training split. Id 0 is UNK.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharVocab {
    chars: Vec<char>,
}

impl CharVocab {
    pub fn build(sentences: &[Sentence]) -> Self {
        let mut chars = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for c in sentences.iter().flat_map(|s| &s.tokens).flat_map(|t| t.surface.chars()) {
            if seen.insert(c) {
                chars.push(c);
            }
        }
        CharVocab { chars }
    }

    /// Number of ids including UNK.
    pub fn size(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn ids(&self, surface: &str) -> Vec<usize> {
        surface
            .chars()
            .map(|c| self.chars.iter().position(|&k| k == c).map_or(0, |i| i + 1))
            .collect()
    }
}

/// Frozen word-level providers. Contextual vectors are per corpus and are
/// passed separately.
#[derive(Debug, Clone, Default)]
pub struct Providers {
    pub static_vecs: Option<StaticVecTable>,
    pub bpe: Option<BpeModel>,
}

impl Providers {
    fn check(&self, stack: &EmbeddingStackSpec) -> Result<()> {
        for p in &stack.providers {
            match *p {
                Provider::Static { dim } => {
                    let t = self
                        .static_vecs
                        .as_ref()
                        .ok_or_else(|| Error::Config("stack uses static vectors but none were given".into()))?;
                    if t.dim() != dim {
                        return Err(Error::dim("static vectors", dim, t.dim()));
                    }
                }
                Provider::Bpe { dim } => {
                    let b = self
                        .bpe
                        .as_ref()
                        .ok_or_else(|| Error::Config("stack uses byte-pair vectors but none were given".into()))?;
                    if b.dim() != dim {
                        return Err(Error::dim("byte-pair vectors", dim, b.dim()));
                    }
                }
                Provider::Char { .. } | Provider::Ctx { .. } => {}
            }
        }
        Ok(())
    }
}

/// A tagger with its vocabularies and frozen providers.
#[derive(Debug, Clone)]
pub struct Tagger {
    pub config: TaggerConfig,
    pub scheme: TagScheme,
    pub feature_vocab: FeatureVocab,
    pub char_vocab: CharVocab,
    pub providers: Providers,
    pub params: TaggerParams,
}

fn ctx_dim(stack: &EmbeddingStackSpec) -> Option<usize> {
    stack.providers.iter().find_map(|p| match *p {
        Provider::Ctx { dim } => Some(dim),
        _ => None,
    })
}

impl Tagger {
    /// Build vocabularies from `train` and draw initial parameters.
    pub fn new(config: TaggerConfig, scheme: TagScheme, train: &[Sentence], providers: Providers) -> Result<Self> {
        config.validate()?;
        providers.check(&config.stack)?;
        let feature_vocab = FeatureVocab::build(train);
        let char_vocab = CharVocab::build(train);
        let sizes = ParamSizes {
            chars: char_vocab.size(),
            pos: feature_vocab.pos_size(),
            shapes: feature_vocab.shape_size(),
            tags: scheme.len(),
        };
        let params = TaggerParams::init(&config, sizes, &mut rng::stream(config.seed, 0));
        Ok(Tagger {
            config,
            scheme,
            feature_vocab,
            char_vocab,
            providers,
            params,
        })
    }

    pub fn sizes(&self) -> ParamSizes {
        ParamSizes {
            chars: self.char_vocab.size(),
            pos: self.feature_vocab.pos_size(),
            shapes: self.feature_vocab.shape_size(),
            tags: self.scheme.len(),
        }
    }

    /// Check that contextual vectors match the stack and the corpus.
    pub fn check_ctx(&self, corpus: &[Sentence], ctx: Option<&CtxEmbeddingFile>) -> Result<()> {
        match (ctx_dim(&self.config.stack), ctx) {
            (None, _) => Ok(()),
            (Some(_), None) => Err(Error::Config("stack uses contextual vectors but no file was given".into())),
            (Some(dim), Some(f)) => {
                if f.dim() != dim {
                    return Err(Error::dim("contextual vectors", dim, f.dim()));
                }
                f.check_alignment(&corpus.iter().map(Sentence::len).collect::<Vec<_>>())
            }
        }
    }

    /// `ctx` is the contextual file of the corpus and this sentence's index in it.
    fn input(&self, sentence: &Sentence, ctx: Option<(&CtxEmbeddingFile, usize)>) -> Result<SentenceInput> {
        let n = sentence.len();
        let mut base = Vec::with_capacity(n);
        for (t, tok) in sentence.tokens.iter().enumerate() {
            let mut x = Vec::with_capacity(self.config.input_dim());
            for p in &self.config.stack.providers {
                match *p {
                    Provider::Static { .. } => {
                        let table = self.providers.static_vecs.as_ref().expect("checked at construction");
                        x.extend(table.lookup(&tok.surface).iter().map(|&v| f64::from(v)));
                    }
                    Provider::Bpe { .. } => {
                        let bpe = self.providers.bpe.as_ref().expect("checked at construction");
                        x.extend(bpe.embed(&tok.surface));
                    }
                    Provider::Char { hidden, .. } => x.extend(std::iter::repeat_n(0.0, 2 * hidden)),
                    Provider::Ctx { dim } => {
                        let (file, s) = ctx.ok_or_else(|| {
                            Error::Config("stack uses contextual vectors but no file was given".into())
                        })?;
                        let found = file.token_count(s);
                        if found != n {
                            return Err(Error::Alignment { sentence: s, expected: n, found });
                        }
                        if file.dim() != dim {
                            return Err(Error::dim("contextual vectors", dim, file.dim()));
                        }
                        x.extend(file.vector(s, t).iter().map(|&v| f64::from(v)));
                    }
                }
            }
            base.push(x);
        }
        let chars = if self.config.stack.char_provider().is_some() {
            sentence.tokens.iter().map(|t| self.char_vocab.ids(&t.surface)).collect()
        } else {
            Vec::new()
        };
        let feats = if self.config.stack.features {
            self.feature_vocab.featurize(sentence)
        } else {
            Vec::new()
        };
        Ok(SentenceInput { base, chars, feats })
    }

    /// Emission scores for one sentence.
    pub fn encode(&self, sentence: &Sentence, ctx: Option<(&CtxEmbeddingFile, usize)>) -> Result<Emissions> {
        let input = self.input(sentence, ctx)?;
        Ok(network::forward(&self.params, &self.config.layout(), &input).emissions)
    }

    fn gold(&self, sentence: &Sentence) -> Result<Vec<usize>> {
        let tags = sentence
            .gold_tags
            .as_deref()
            .ok_or_else(|| Error::Config(format!("sentence {} has no gold tags", sentence.id)))?;
        self.scheme.indices(tags)
    }

    /// CRF negative log-likelihood of the gold tags.
    pub fn loss(&self, sentence: &Sentence, ctx: Option<(&CtxEmbeddingFile, usize)>) -> Result<f64> {
        let gold = self.gold(sentence)?;
        let e = self.encode(sentence, ctx)?;
        if gold.is_empty() {
            return Ok(0.0);
        }
        Ok(crf::forward_log_z(&e, &self.params.crf) - crf::score_path(&e, &self.params.crf, &gold)?)
    }

    /// Loss and its gradient with respect to every trainable array.
    pub fn loss_and_grad(
        &self,
        sentence: &Sentence,
        ctx: Option<(&CtxEmbeddingFile, usize)>,
    ) -> Result<(f64, TaggerParams)> {
        let gold = self.gold(sentence)?;
        let mut grad = self.params.zeros_like();
        if gold.is_empty() {
            return Ok((0.0, grad));
        }
        let layout = self.config.layout();
        let input = self.input(sentence, ctx)?;
        let acts = network::forward(&self.params, &layout, &input);
        let (loss, g) = crf::nll_and_grad(&acts.emissions, &self.params.crf, &gold)?;
        grad.crf.transitions = g.transitions;
        grad.crf.start = g.start;
        grad.crf.stop = g.stop;
        network::backward(&self.params, &layout, &input, &acts, &g.emissions, &mut grad);
        Ok((loss, grad))
    }

    /// Viterbi tags for every sentence.
    pub fn predict(&self, sentences: &[Sentence], ctx: Option<&CtxEmbeddingFile>) -> Result<Vec<Vec<Tag>>> {
        self.check_ctx(sentences, ctx)?;
        sentences
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if s.is_empty() {
                    return Ok(Vec::new());
                }
                let e = self.encode(s, ctx.map(|f| (f, i)))?;
                let (path, _) = crf::viterbi(&e, &self.params.crf);
                Ok(path.into_iter().map(|k| self.scheme.tag(k).clone()).collect())
            })
            .collect()
    }
}
