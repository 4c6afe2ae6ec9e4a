//! One-axis hyperparameter sweeps: an independent seeded run per value,
//! summarized as one row each.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use super::{evaluate, gold_labels, train, TrainConfig, TrainHistory};
use crate::corpus::{Corpus, Split};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::features::{encode_corpus, Branches, ContextMode, EncodedExample};
use crate::metrics::{report, ClassReport};
use crate::model::{ModelConfig, SingletonModel};
use crate::tensor::OptimizerKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Optimizer,
    Epochs,
    ContextMode,
    Features,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "optimizer" => Ok(SweepAxis::Optimizer),
            "epochs" => Ok(SweepAxis::Epochs),
            "context_mode" | "context" => Ok(SweepAxis::ContextMode),
            "features" => Ok(SweepAxis::Features),
            other => Err(Error::InvalidConfig(format!(
                "unknown sweep axis '{other}'"
            ))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Optimizer => "optimizer",
            SweepAxis::Epochs => "epochs",
            SweepAxis::ContextMode => "context_mode",
            SweepAxis::Features => "features",
        })
    }
}

impl SweepAxis {
    /// Values swept when none are given.
    pub fn default_values(self) -> Vec<String> {
        match self {
            SweepAxis::Optimizer => OptimizerKind::ALL.iter().map(|k| k.to_string()).collect(),
            SweepAxis::Epochs => ["5", "10", "15", "20"].map(String::from).to_vec(),
            SweepAxis::ContextMode => ["two", "all"].map(String::from).to_vec(),
            SweepAxis::Features => Branches::ABLATIONS.iter().map(|b| b.to_string()).collect(),
        }
    }

    /// Set this axis to `value` in the given configs.
    pub fn apply(
        self,
        value: &str,
        model: &mut ModelConfig,
        train: &mut TrainConfig,
    ) -> Result<()> {
        match self {
            SweepAxis::Optimizer => train.optimizer = value.parse()?,
            SweepAxis::Epochs => {
                train.epochs = value
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("invalid epoch count '{value}'")))?
            }
            SweepAxis::ContextMode => model.features.context_mode = value.parse::<ContextMode>()?,
            SweepAxis::Features => model.features.branches = value.parse::<Branches>()?,
        }
        Ok(())
    }
}

/// A corpus, its split and the base configuration shared by every run.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub corpus: Corpus,
    pub split: Split,
    pub embedding: Arc<EmbeddingTable>,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub model: SingletonModel,
    pub history: TrainHistory,
    pub test: ClassReport,
}

pub struct EncodedSplit {
    pub train: Vec<EncodedExample>,
    pub validation: Vec<EncodedExample>,
    pub test: Vec<EncodedExample>,
}

impl Experiment {
    pub fn encode(&self, model: &ModelConfig) -> Result<EncodedSplit> {
        let enc = |m| encode_corpus(m, &self.corpus, &self.embedding, &model.features);
        Ok(EncodedSplit {
            train: enc(&self.split.train)?,
            validation: enc(&self.split.validation)?,
            test: enc(&self.split.test)?,
        })
    }

    pub fn run(&self) -> Result<RunOutcome> {
        self.run_with(&self.model, &self.train)
    }

    /// Build a fresh model, train it and score it on the test partition.
    pub fn run_with(&self, model_cfg: &ModelConfig, train_cfg: &TrainConfig) -> Result<RunOutcome> {
        let data = self.encode(model_cfg)?;
        let mut model = SingletonModel::build(model_cfg.clone(), self.embedding.clone())?;
        let history = train(&mut model, &data.train, &data.validation, train_cfg)?;
        let eval = evaluate(&model, &data.test)?;
        let test = report(&eval.predictions, &gold_labels(&data.test)?, 1.0)?;
        Ok(RunOutcome {
            model,
            history,
            test,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    pub singleton_precision: f64,
    pub singleton_recall: f64,
    pub singleton_f: f64,
}

pub fn sweep(exp: &Experiment, axis: SweepAxis, values: &[String]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::InvalidConfig(
            "sweep needs at least one value".into(),
        ));
    }
    values
        .iter()
        .map(|value| {
            let mut model_cfg = exp.model.clone();
            let mut train_cfg = exp.train.clone();
            axis.apply(value, &mut model_cfg, &mut train_cfg)?;
            log::info!("sweep {axis}={value}");
            let run = exp.run_with(&model_cfg, &train_cfg)?;
            let last = run.history.last().copied().expect("at least one epoch");
            let s = run.test.singleton();
            Ok(SweepRow {
                value: value.clone(),
                train_loss: last.train_loss,
                val_loss: last.val_loss,
                val_acc: last.val_acc,
                test_acc: run.test.accuracy,
                singleton_precision: s.precision,
                singleton_recall: s.recall,
                singleton_f: s.f_measure,
            })
        })
        .collect()
}

pub fn render_table(axis: SweepAxis, rows: &[SweepRow]) -> String {
    let mut out = format!(
        "{:<28}{:>11}{:>10}{:>9}{:>10}{:>7}{:>7}{:>7}\n",
        axis.to_string(),
        "train_loss",
        "val_loss",
        "val_acc",
        "test_acc",
        "S-P",
        "S-R",
        "S-F"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<28}{:>11.4}{:>10.4}{:>9.4}{:>10.4}{:>7.2}{:>7.2}{:>7.2}\n",
            r.value,
            r.train_loss,
            r.val_loss,
            r.val_acc,
            r.test_acc,
            r.singleton_precision,
            r.singleton_recall,
            r.singleton_f
        ));
    }
    out
}

pub fn write_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| Error::io("<sweep>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes_parse() {
        assert_eq!(
            "optimizer".parse::<SweepAxis>().unwrap(),
            SweepAxis::Optimizer
        );
        assert_eq!(
            "context-mode".parse::<SweepAxis>().unwrap(),
            SweepAxis::ContextMode
        );
        assert!("colour".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn apply_sets_the_axis() {
        let mut m = ModelConfig::default();
        let mut t = TrainConfig::default();
        SweepAxis::Optimizer
            .apply("adagrad", &mut m, &mut t)
            .unwrap();
        assert_eq!(t.optimizer, OptimizerKind::Adagrad);
        SweepAxis::Epochs.apply("7", &mut m, &mut t).unwrap();
        assert_eq!(t.epochs, 7);
        SweepAxis::ContextMode.apply("all", &mut m, &mut t).unwrap();
        assert_eq!(m.features.context_mode, ContextMode::AllWords);
        SweepAxis::Features
            .apply("words+syntactic", &mut m, &mut t)
            .unwrap();
        assert_eq!(m.features.branches, Branches::ABLATIONS[2]);
        assert!(SweepAxis::Epochs.apply("x", &mut m, &mut t).is_err());
    }

    #[test]
    fn default_values_cover_the_axes() {
        assert_eq!(
            SweepAxis::Optimizer.default_values(),
            vec!["adam", "rmsprop", "adagrad", "adadelta"]
        );
        assert_eq!(SweepAxis::Features.default_values().len(), 4);
        assert_eq!(SweepAxis::ContextMode.default_values(), vec!["two", "all"]);
    }
}
