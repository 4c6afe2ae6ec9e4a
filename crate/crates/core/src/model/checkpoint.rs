//! JSON checkpoints.
//!
//! A checkpoint is one JSON object:
//!
//! ```json
//! {
//!   "format": "singleton-checkpoint/1",
//!   "config": { ...ModelConfig... },
//!   "embedding": { "vocab_size": 30393, "dim": 300 },
//!   "parameters": [
//!     { "name": "word.conv2.weight", "shape": [2, 300, 64], "values": [ ... ] },
//!     ...
//!   ]
//! }
//! ```
//!
//! `values` is the row-major flattening of `shape`. Floats are written in
//! shortest round-trip form and parsed exactly, so a save/load cycle is
//! bitwise lossless. Embedding vectors are not stored; the table is supplied
//! again at load time and must agree with the recorded size.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, SingletonModel};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

pub const FORMAT: &str = "singleton-checkpoint/1";

#[derive(Serialize, Deserialize)]
struct EmbeddingShape {
    vocab_size: usize,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct StoredParameter {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    config: ModelConfig,
    embedding: EmbeddingShape,
    parameters: Vec<StoredParameter>,
}

impl SingletonModel {
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        let ckpt = Checkpoint {
            format: FORMAT.to_string(),
            config: self.config.clone(),
            embedding: EmbeddingShape {
                vocab_size: self.embedding.len(),
                dim: self.embedding.dim(),
            },
            parameters: self
                .parameters()
                .into_iter()
                .map(|(name, p)| StoredParameter {
                    name: name.to_string(),
                    shape: p.shape().to_vec(),
                    values: p.value.data().to_vec(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &ckpt)?;
        w.write_all(b"\n")
            .map_err(|e| Error::io("<checkpoint>", e))?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_checkpoint(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_checkpoint<R: Read>(
        r: R,
        embedding: Arc<EmbeddingTable>,
    ) -> Result<SingletonModel> {
        let value: serde_json::Value = serde_json::from_reader(r)
            .map_err(|e| Error::Checkpoint(format!("not valid JSON: {e}")))?;
        match value.get("format").and_then(|f| f.as_str()) {
            Some(FORMAT) => {}
            Some(other) => {
                return Err(Error::Checkpoint(format!(
                    "unsupported checkpoint format '{other}', expected '{FORMAT}'"
                )))
            }
            None => return Err(Error::Checkpoint("missing format tag".into())),
        }
        let ckpt: Checkpoint = serde_json::from_value(value)
            .map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))?;
        if ckpt.embedding.dim != embedding.dim() || ckpt.config.embed_dim != embedding.dim() {
            return Err(Error::Checkpoint(format!(
                "checkpoint expects {}-dimensional embeddings, table has {}",
                ckpt.config.embed_dim,
                embedding.dim()
            )));
        }
        if ckpt.embedding.vocab_size != embedding.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint was trained with a {}-word vocabulary, table has {}",
                ckpt.embedding.vocab_size,
                embedding.len()
            )));
        }

        let mut model = SingletonModel::build(ckpt.config, embedding)?;
        let mut stored: HashMap<String, StoredParameter> = HashMap::new();
        for p in ckpt.parameters {
            let name = p.name.clone();
            if stored.insert(name.clone(), p).is_some() {
                return Err(Error::Checkpoint(format!(
                    "parameter '{name}' stored twice"
                )));
            }
        }
        for (name, param) in model.parameters_mut() {
            let p = stored
                .remove(name)
                .ok_or_else(|| Error::Checkpoint(format!("parameter '{name}' missing")))?;
            if p.shape != param.shape() || p.values.len() != param.len() {
                return Err(Error::Checkpoint(format!(
                    "parameter '{name}' has shape {:?} ({} values), model needs {:?}",
                    p.shape,
                    p.values.len(),
                    param.shape()
                )));
            }
            if p.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Checkpoint(format!(
                    "parameter '{name}' has non-finite values"
                )));
            }
            param.value.data_mut().copy_from_slice(&p.values);
        }
        if let Some(name) = stored.keys().next() {
            return Err(Error::Checkpoint(format!("unexpected parameter '{name}'")));
        }
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>, embedding: Arc<EmbeddingTable>) -> Result<SingletonModel> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        SingletonModel::read_checkpoint(BufReader::new(file), embedding)
    }
}
