//! Mini-batch Adam training with per-epoch development-set model selection.

mod adam;
mod config;

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use adam::{adam_step, clip_gradients, AdamState};
pub use config::TrainConfig;

use crate::data::{LabeledSentence, INCORRECT};
use crate::error::{Error, Result};
use crate::eval::DetectionCounts;
use crate::layers::{Model, EMBEDDING};
use crate::tensor::{Gradients, Graph};

/// Per-token output of [`predict`].
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs_incorrect: Vec<f64>,
    pub labels: Vec<u8>,
}

/// Labels every token whose P(incorrect) is at least `threshold`.
pub fn predict<S: AsRef<str>>(model: &Model, tokens: &[S], threshold: f64) -> Result<Prediction> {
    let probs_incorrect = model.prob_incorrect(&model.encode(tokens))?;
    let labels = probs_incorrect
        .iter()
        .map(|&p| if p >= threshold { INCORRECT } else { 0 })
        .collect();
    Ok(Prediction {
        probs_incorrect,
        labels,
    })
}

/// System labels for a whole corpus, in corpus order.
pub fn predict_corpus(
    model: &Model,
    corpus: &[LabeledSentence],
    threshold: f64,
) -> Result<Vec<LabeledSentence>> {
    corpus
        .par_iter()
        .map(|s| {
            let p = predict(model, &s.tokens, threshold)?;
            LabeledSentence::new(s.tokens.clone(), p.labels)
        })
        .collect()
}

/// Detection counts of the model's labels against the corpus labels.
pub fn evaluate(model: &Model, corpus: &[LabeledSentence], threshold: f64) -> Result<DetectionCounts> {
    let system = predict_corpus(model, corpus, threshold)?;
    crate::eval::detection_eval(&system, corpus)
}

/// Summary of one training epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the batch losses.
    pub loss: f64,
    pub dev: DetectionCounts,
}

impl EpochRecord {
    pub fn dev_f05(&self) -> f64 {
        self.dev.f05()
    }
}

/// CSV with columns `epoch,loss,dev_P,dev_R,dev_F05`. Floats use the
/// shortest representation that round-trips, so identical runs give
/// identical bytes.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,loss,dev_P,dev_R,dev_F05\n");
    for r in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch,
            r.loss,
            r.dev.precision(),
            r.dev.recall(),
            r.dev.f05()
        );
    }
    out
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    std::fs::write(path, history_csv(history))?;
    Ok(())
}

/// Result of [`train`]: the parameters of the best development epoch.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept; `None` if no epoch ran.
    pub best_epoch: Option<usize>,
}

struct Encoded {
    ids: Vec<usize>,
    labels: Vec<u8>,
}

fn encode(model: &Model, corpus: &[LabeledSentence]) -> Vec<Encoded> {
    corpus
        .iter()
        .map(|s| Encoded {
            ids: model.encode(&s.tokens),
            labels: s.labels.clone(),
        })
        .collect()
}

fn sentence_hash(s: &LabeledSentence) -> u64 {
    let mut h = DefaultHasher::new();
    s.tokens.hash(&mut h);
    h.finish()
}

/// Number of development sentences whose token sequence also occurs in the
/// training data.
pub fn overlap_count(train: &[LabeledSentence], dev: &[LabeledSentence]) -> usize {
    let seen: HashSet<u64> = train.iter().map(sentence_hash).collect();
    dev.iter().filter(|s| seen.contains(&sentence_hash(s))).count()
}

fn sentence_gradients(model: &Model, s: &Encoded) -> Result<(f64, Gradients)> {
    let mut g = Graph::with_params(model.params());
    let loss = model.sentence_loss(&mut g, &s.ids, &s.labels)?;
    let value = g.scalar(loss);
    Ok((value, g.backward(loss)?))
}

/// Zeroes the gradient slots, then accumulates the gradient of the batch
/// objective (mean over sentences of the per-sentence token-mean loss).
/// Returns the objective value. Sentence results are folded in batch order,
/// independent of how the parallel work was scheduled.
pub fn batch_gradient(model: &mut Model, batch: &[(&[usize], &[u8])]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    let encoded: Vec<Encoded> = batch
        .iter()
        .map(|(ids, labels)| Encoded {
            ids: ids.to_vec(),
            labels: labels.to_vec(),
        })
        .collect();
    let refs: Vec<&Encoded> = encoded.iter().collect();
    accumulate_batch(model, &refs)
}

fn accumulate_batch(model: &mut Model, batch: &[&Encoded]) -> Result<f64> {
    let results: Vec<Result<(f64, Gradients)>> = {
        let m: &Model = model;
        batch.par_iter().map(|s| sentence_gradients(m, s)).collect()
    };
    let scale = 1.0 / batch.len() as f64;
    let params = model.params_mut();
    params.zero_grad();
    let mut total = 0.0;
    for r in results {
        let (loss, grads) = r?;
        total += loss;
        grads.accumulate_into(params, scale);
    }
    Ok(total * scale)
}

/// Trains `model` and returns the parameters from the epoch with the highest
/// development F0.5 (earliest epoch on ties).
pub fn train(
    mut model: Model,
    train_corpus: &[LabeledSentence],
    dev_corpus: &[LabeledSentence],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.max_epochs == 0 {
        return Ok(TrainOutcome {
            model,
            history: Vec::new(),
            best_epoch: None,
        });
    }
    if train_corpus.is_empty() || dev_corpus.is_empty() {
        return Err(Error::Data("training and development corpora must be nonempty".into()));
    }
    if let Some(i) = train_corpus.iter().position(LabeledSentence::is_empty) {
        return Err(Error::Data(format!("training sentence {i} is empty")));
    }
    let overlap = overlap_count(train_corpus, dev_corpus);
    if overlap > 0 {
        log::warn!("{overlap} development sentences also occur in the training data");
    }
    if cfg.freeze_embeddings {
        if let Some(e) = model.params_mut().get_mut(EMBEDDING) {
            e.set_requires_grad(false);
        }
    }

    let data = encode(&model, train_corpus);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(model.params());
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Model)> = None;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Encoded> = chunk.iter().map(|&i| &data[i]).collect();
            let loss = accumulate_batch(&mut model, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "loss diverged at epoch {epoch}, batch {b}"
                )));
            }
            if let Some(max_norm) = cfg.clip_norm {
                clip_gradients(model.params_mut(), max_norm);
            }
            adam_step(model.params_mut(), &mut adam, cfg)?;
            loss_sum += loss;
            batches += 1;
        }
        let dev = evaluate(&model, dev_corpus, cfg.threshold)?;
        let record = EpochRecord {
            epoch,
            loss: loss_sum / batches as f64,
            dev,
        };
        log::info!(
            "epoch {epoch}: loss {:.4}, dev P {:.1} R {:.1} F0.5 {:.1}",
            record.loss,
            dev.precision(),
            dev.recall(),
            dev.f05()
        );
        history.push(record);
        let f = dev.f05();
        if best.as_ref().is_none_or(|(bf, _, _)| f > *bf) {
            best = Some((f, epoch, model.clone()));
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
        if epoch - best_epoch >= cfg.patience {
            log::info!("no development improvement for {} epochs; stopping", cfg.patience);
            break;
        }
    }

    let (_, best_epoch, mut best_model) = best.expect("at least one epoch ran");
    if let Some(e) = best_model.params_mut().get_mut(EMBEDDING) {
        e.set_requires_grad(true);
    }
    for id in best_model.params().ids().collect::<Vec<_>>() {
        best_model.params_mut().tensor_mut(id).zero_grad();
    }
    Ok(TrainOutcome {
        model: best_model,
        history,
        best_epoch: Some(best_epoch),
    })
}
