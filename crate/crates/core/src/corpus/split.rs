use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Corpus, LabeledMention};
use crate::error::{Error, Result};
use crate::tensor::RngState;

/// Fractions for a document-level train/validation/test split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    /// Share of the non-test documents held out for validation.
    pub validation_fraction_of_train: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.2,
            validation_fraction_of_train: 0.2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Split {
    pub train: Vec<LabeledMention>,
    pub validation: Vec<LabeledMention>,
    pub test: Vec<LabeledMention>,
    pub train_docs: Vec<String>,
    pub validation_docs: Vec<String>,
    pub test_docs: Vec<String>,
}

impl SplitSpec {
    fn validate(&self) -> Result<()> {
        let ok = |f: f64| f > 0.0 && f < 1.0;
        if !ok(self.test_fraction) || !ok(self.validation_fraction_of_train) {
            return Err(Error::InvalidSplit(format!(
                "fractions must lie strictly between 0 and 1 (test {}, validation {})",
                self.test_fraction, self.validation_fraction_of_train
            )));
        }
        Ok(())
    }

    /// Partition sizes `(train, validation, test)` for `n` documents. Test and
    /// validation sizes are rounded; train absorbs the remainder.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        self.validate()?;
        let test = ((n as f64) * self.test_fraction).round() as usize;
        let test = test.min(n);
        let rest = n - test;
        let validation = ((rest as f64) * self.validation_fraction_of_train).round() as usize;
        let validation = validation.min(rest);
        let train = rest - validation;
        if test == 0 {
            return Err(Error::EmptyPartition("test"));
        }
        if validation == 0 {
            return Err(Error::EmptyPartition("validation"));
        }
        if train == 0 {
            return Err(Error::EmptyPartition("train"));
        }
        Ok((train, validation, test))
    }
}

impl Corpus {
    /// Seeded split by document: every mention of a document lands in the
    /// same partition. Mentions keep corpus order within a partition.
    pub fn split(&self, spec: &SplitSpec) -> Result<Split> {
        if self.documents.is_empty() {
            return Err(Error::InvalidSplit("corpus has no documents".into()));
        }
        let (_, n_val, n_test) = spec.sizes(self.documents.len())?;

        let mut order: Vec<usize> = (0..self.documents.len()).collect();
        RngState::new(spec.seed).shuffle(&mut order);

        // 0 = train, 1 = validation, 2 = test
        let mut part = vec![0u8; self.documents.len()];
        for (rank, &doc) in order.iter().enumerate() {
            part[doc] = if rank < n_test {
                2
            } else if rank < n_test + n_val {
                1
            } else {
                0
            };
        }
        let part_of: HashMap<&str, u8> = self
            .documents
            .iter()
            .zip(&part)
            .map(|(d, &p)| (d.id.as_str(), p))
            .collect();

        let mut out = Split::default();
        for (doc, &p) in self.documents.iter().zip(&part) {
            let ids = match p {
                0 => &mut out.train_docs,
                1 => &mut out.validation_docs,
                _ => &mut out.test_docs,
            };
            ids.push(doc.id.clone());
        }
        for m in &self.mentions {
            let bucket = match part_of[m.doc_id.as_str()] {
                0 => &mut out.train,
                1 => &mut out.validation,
                _ => &mut out.test,
            };
            bucket.push(m.clone());
        }
        Ok(out)
    }
}
