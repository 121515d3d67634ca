//! Run configuration: a JSON file whose relative paths resolve against
//! the file's own directory, overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stackner::tagger::TaggerConfig;
use stackner::textclf::ClfConfig;
use stackner::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Ner,
    Clf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Column corpora carry a POS column between token and tag.
    #[serde(default)]
    pub has_pos: bool,
    /// Entity types of the tag scheme; inferred from the training corpus when absent.
    pub entity_types: Option<Vec<String>>,
    pub static_vectors: Option<PathBuf>,
    pub bpe_merges: Option<PathBuf>,
    pub bpe_vectors: Option<PathBuf>,
    pub ctx_train: Option<PathBuf>,
    pub ctx_dev: Option<PathBuf>,
    pub ctx_test: Option<PathBuf>,
    pub sent_train: Option<PathBuf>,
    pub sent_dev: Option<PathBuf>,
    pub sent_test: Option<PathBuf>,
    pub model_dir: Option<PathBuf>,
    pub folds: Option<PathBuf>,
    pub include_types: Option<Vec<String>>,
    #[serde(default)]
    pub tagger: TaggerConfig,
    #[serde(default)]
    pub classifier: ClfConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in config.paths_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    fn paths_mut(&mut self) -> impl Iterator<Item = &mut PathBuf> {
        [
            &mut self.train,
            &mut self.dev,
            &mut self.test,
            &mut self.static_vectors,
            &mut self.bpe_merges,
            &mut self.bpe_vectors,
            &mut self.ctx_train,
            &mut self.ctx_dev,
            &mut self.ctx_test,
            &mut self.sent_train,
            &mut self.sent_dev,
            &mut self.sent_test,
            &mut self.model_dir,
            &mut self.folds,
        ]
        .into_iter()
        .flatten()
    }

    /// Push the run seed into the model configs and check ranges and input paths.
    pub fn finalize(&mut self) -> Result<()> {
        self.tagger.seed = self.seed;
        self.classifier.seed = self.seed;
        match self.task {
            Task::Ner => self.tagger.validate()?,
            Task::Clf => self.classifier.validate()?,
        }
        let inputs = [
            &self.train,
            &self.dev,
            &self.test,
            &self.static_vectors,
            &self.bpe_merges,
            &self.bpe_vectors,
            &self.ctx_train,
            &self.ctx_dev,
            &self.ctx_test,
            &self.sent_train,
            &self.sent_dev,
            &self.sent_test,
        ];
        for p in inputs.into_iter().flatten() {
            if !p.exists() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        if self.bpe_merges.is_some() != self.bpe_vectors.is_some() {
            return Err(Error::Config("bpe_merges and bpe_vectors must be given together".into()));
        }
        Ok(())
    }

    pub fn require<'a>(&self, field: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        field
            .as_deref()
            .ok_or_else(|| Error::Config(format!("configuration has no `{name}`")))
    }

    /// SHA-256 of the configuration as serialized after overrides.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
