//! Sequence labeling and text classification over stacked embeddings.
//!
//! The NER model is a BiLSTM-CRF whose per-token input concatenates
//! frozen static, byte-pair and contextual vectors with a trainable
//! character encoder and linguistic feature embeddings. Text classifiers
//! (logistic regression, RBF-kernel SVM, a small feed-forward network) run
//! on sentence embeddings with a positive-class weight. Both tasks can be
//! bagged over a 3-fold plan and combined by majority vote.

mod binio;
pub mod corpus;
pub mod crf;
pub mod embeddings;
pub mod ensemble;
pub mod error;
pub mod lingfeat;
pub mod metrics;
mod modeldir;
pub mod nn;
pub mod rng;
pub mod tagger;
pub mod textclf;

pub use error::{Error, ErrorKind, Result};
