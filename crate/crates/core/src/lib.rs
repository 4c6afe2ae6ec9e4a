//! Singleton mention detection.
//!
//! Mentions arrive pre-extracted in a JSON-lines corpus. Each mention is
//! encoded as padded word-index sequences for the mention and its context
//! plus three binary syntactic flags, and classified as singleton or
//! coreferent by a network of two text-CNN branches and a small dense branch
//! feeding a dense head. The numeric kernels, their gradients and the
//! optimizers are implemented here directly and checked against finite
//! differences.
//!
//! Typical flow:
//!
//! ```no_run
//! use std::sync::Arc;
//! use singleton_detect::{corpus::{Corpus, SplitSpec}, embeddings::EmbeddingTable};
//! use singleton_detect::model::ModelConfig;
//! use singleton_detect::training::{sweep::Experiment, TrainConfig};
//!
//! # fn main() -> singleton_detect::Result<()> {
//! let corpus = Corpus::load("corpus.jsonl")?;
//! let embedding = Arc::new(EmbeddingTable::load("vectors.txt", None)?);
//! let split = corpus.split(&SplitSpec::default())?;
//! let exp = Experiment {
//!     corpus,
//!     split,
//!     embedding,
//!     model: ModelConfig::default(),
//!     train: TrainConfig::default(),
//! };
//! let outcome = exp.run()?;
//! println!("{}", outcome.test.render_table("words+context+syntactic"));
//! # Ok(())
//! # }
//! ```

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod features;
pub mod metrics;
pub mod model;
pub mod synthetic;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
