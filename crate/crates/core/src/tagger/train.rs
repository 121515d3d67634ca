use std::path::PathBuf;

use log::{debug, info};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{decode_bio, Sentence, TagScheme};
use crate::embeddings::CtxEmbeddingFile;
use crate::error::{Error, Result};
use crate::metrics::{ner_prf, Prf};
use crate::rng;

use super::{Providers, Tagger, TaggerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-sentence loss over the epoch.
    pub train_loss: f64,
    pub dev: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_dev_f1: f64,
    pub model_path: Option<PathBuf>,
}

/// Minibatch SGD on the mean per-sentence NLL. The returned tagger holds
/// the parameters of the epoch with the best dev entity F1.
///
/// Parameters are kept at f32 precision after every update so the saved
/// model reproduces the in-memory one exactly.
#[allow(clippy::too_many_arguments)]
pub fn train(
    config: &TaggerConfig,
    scheme: &TagScheme,
    train: &[Sentence],
    dev: &[Sentence],
    providers: Providers,
    ctx_train: Option<&CtxEmbeddingFile>,
    ctx_dev: Option<&CtxEmbeddingFile>,
) -> Result<(Tagger, TrainReport)> {
    if train.is_empty() {
        return Err(Error::Empty("training corpus".into()));
    }
    let mut tagger = Tagger::new(config.clone(), scheme.clone(), train, providers)?;
    tagger.check_ctx(train, ctx_train)?;
    tagger.check_ctx(dev, ctx_dev)?;
    for s in train {
        tagger.gold(s)?;
    }
    let dev_gold: Vec<_> = dev.iter().map(Sentence::gold_spans).collect();
    tagger.params.round_to_f32();

    let mut best = tagger.params.clone();
    let mut report = TrainReport {
        epochs: Vec::with_capacity(config.epochs),
        best_epoch: 0,
        best_dev_f1: f64::NEG_INFINITY,
        model_path: None,
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(config.seed, epoch as u64));
        let mut total = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let mut sum = tagger.params.zeros_like();
            for &i in batch {
                let (loss, mut g) = tagger.loss_and_grad(&train[i], ctx_train.map(|f| (f, i)))?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch: b });
                }
                if let Some(clip) = config.gradient_clip {
                    let norm = g.norm();
                    if norm > clip {
                        g.scale(clip / norm);
                    }
                }
                sum.add_scaled(1.0, &g);
                total += loss;
            }
            tagger.params.add_scaled(-config.learning_rate / batch.len() as f64, &sum);
            tagger.params.round_to_f32();
            if !tagger.params.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
        }

        let pred = tagger.predict(dev, ctx_dev)?;
        let pred: Vec<_> = pred.iter().map(|t| decode_bio(t)).collect();
        let dev_prf = ner_prf(&dev_gold, &pred, None)?.micro;
        let train_loss = total / train.len() as f64;
        debug!("epoch {epoch}: loss {train_loss:.6} dev f1 {:.4}", dev_prf.f1);
        if dev_prf.f1 > report.best_dev_f1 {
            report.best_dev_f1 = dev_prf.f1;
            report.best_epoch = epoch;
            best = tagger.params.clone();
        }
        report.epochs.push(EpochRecord {
            epoch,
            train_loss,
            dev: dev_prf,
        });
        if config.patience.is_some_and(|p| epoch - report.best_epoch >= p) {
            info!("no dev improvement for {} epochs, stopping at epoch {epoch}", epoch - report.best_epoch);
            break;
        }
    }
    info!("best dev f1 {:.4} at epoch {}", report.best_dev_f1, report.best_epoch);
    tagger.params = best;
    Ok((tagger, report))
}
