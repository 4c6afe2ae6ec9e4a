//! Mini-batch training with per-epoch validation.
//!
//! Each epoch shuffles the training examples with a seeded generator, splits
//! them into batches of at most `batch_size` (the last batch may be short),
//! averages the cross-entropy gradient over each batch and takes one
//! optimizer step per batch. Everything runs on one thread in a fixed order,
//! so identical seeds give bitwise-identical parameters and histories.

pub mod sweep;

use std::io::Write;
use std::ops::ControlFlow;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::EncodedExample;
use crate::model::{argmax, SingletonModel};
use crate::tensor::ops;
use crate::tensor::{Optimizer, OptimizerKind, RngState, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub shuffle_seed: u64,
    pub dropout_enabled: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 5,
            learning_rate: 0.001,
            optimizer: OptimizerKind::Adam,
            shuffle_seed: 0,
            dropout_enabled: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    pub fn steps_per_epoch(&self, n_train: usize) -> usize {
        n_train.div_ceil(self.batch_size)
    }
}

/// Metrics for one completed epoch. Training loss and accuracy are averaged
/// over the training-mode passes made during the epoch (dropout active);
/// validation figures come from an evaluation-mode pass afterwards and are 0
/// when there is no validation data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    pub optimizer_steps: u64,
}

impl TrainHistory {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// CSV with columns `epoch,train_loss,train_acc,val_loss,val_acc`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(r)?;
        }
        out.flush().map_err(|e| Error::io("<history>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub mean_loss: f64,
    pub predictions: Vec<usize>,
    pub probabilities: Vec<Tensor>,
}

impl Evaluation {
    /// Fraction of predictions equal to `gold`; 0 for an empty set.
    pub fn accuracy(&self, gold: &[usize]) -> f64 {
        if gold.is_empty() {
            return 0.0;
        }
        let hits = self
            .predictions
            .iter()
            .zip(gold)
            .filter(|(p, g)| p == g)
            .count();
        hits as f64 / gold.len() as f64
    }
}

/// Gold class indices; fails on the first unlabeled example.
pub fn gold_labels(data: &[EncodedExample]) -> Result<Vec<usize>> {
    data.iter()
        .enumerate()
        .map(|(i, ex)| Ok(ex.gold(i)?.index()))
        .collect()
}

/// Evaluation-mode loss and predictions, in input order. An empty set has
/// mean loss 0.
pub fn evaluate(model: &SingletonModel, data: &[EncodedExample]) -> Result<Evaluation> {
    let gold = gold_labels(data)?;
    let mut total = 0.0;
    let mut predictions = Vec::with_capacity(data.len());
    let mut probabilities = Vec::with_capacity(data.len());
    for (ex, &label) in data.iter().zip(&gold) {
        let probs = model.probabilities(ex)?;
        total += ops::sparse_ce_loss(&probs, label)?;
        predictions.push(argmax(probs.data()));
        probabilities.push(probs);
    }
    let mean_loss = if data.is_empty() {
        0.0
    } else {
        total / data.len() as f64
    };
    Ok(Evaluation {
        mean_loss,
        predictions,
        probabilities,
    })
}

pub fn train(
    model: &mut SingletonModel,
    train_set: &[EncodedExample],
    val_set: &[EncodedExample],
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    train_with(model, train_set, val_set, cfg, |_, _| {
        ControlFlow::Continue(())
    })
}

/// Like [`train`], calling `observer` after every epoch; returning
/// `ControlFlow::Break` ends training after that epoch.
pub fn train_with<F>(
    model: &mut SingletonModel,
    train_set: &[EncodedExample],
    val_set: &[EncodedExample],
    cfg: &TrainConfig,
    mut observer: F,
) -> Result<TrainHistory>
where
    F: FnMut(&SingletonModel, &EpochRecord) -> ControlFlow<()>,
{
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyPartition("train"));
    }
    let train_gold = gold_labels(train_set)?;
    let val_gold = gold_labels(val_set)?;

    for (_, p) in model.parameters_mut() {
        p.reset_slots();
    }
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut shuffle_rng = RngState::derive(cfg.shuffle_seed, 0);
    let mut dropout_rng = cfg
        .dropout_enabled
        .then(|| RngState::derive(cfg.shuffle_seed, 1));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainHistory::default();

    for epoch in 1..=cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            model.zero_grads();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let label = train_gold[i];
                let (loss, probs) =
                    model.accumulate(&train_set[i], label, scale, dropout_rng.as_mut())?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: b + 1,
                        loss,
                    });
                }
                loss_sum += loss;
                correct += usize::from(argmax(probs.data()) == label);
            }
            optimizer.apply(model.parameters_mut())?;
            history.optimizer_steps += 1;
        }
        let val = evaluate(model, val_set)?;
        let n = train_set.len() as f64;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            val_loss: val.mean_loss,
            val_acc: val.accuracy(&val_gold),
        };
        log::info!(
            "epoch {epoch}: train loss {:.4} acc {:.4}, val loss {:.4} acc {:.4}",
            record.train_loss,
            record.train_acc,
            record.val_loss,
            record.val_acc
        );
        history.records.push(record);
        if observer(model, &record).is_break() {
            break;
        }
    }
    model.zero_grads();
    Ok(history)
}
