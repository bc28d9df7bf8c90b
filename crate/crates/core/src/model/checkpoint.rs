//! JSON checkpoint container.
//!
//! ```text
//! {
//!   "format": "spanedit-checkpoint",
//!   "version": 1,
//!   "config": { ModelConfig fields },
//!   "vocab": [ordinary surfaces, id 4 first],
//!   "tagset": { "name": ..., "tags": [all surfaces, id 0 first] },
//!   "params": [ { "name", "rows", "cols", "data": [row-major f64] } ]
//! }
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autograd::Mat;
use crate::error::{Error, Result};
use crate::tags::TagSet;
use crate::vocab::{Vocabulary, RESERVED_COUNT};

use super::config::ModelConfig;
use super::edit_model::EditModel;

pub const CHECKPOINT_FORMAT: &str = "spanedit-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ParamRecord {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Container {
    format: String,
    version: u32,
    config: ModelConfig,
    vocab: Vec<String>,
    tagset: TagSet,
    params: Vec<ParamRecord>,
}

/// A model together with the vocabulary and tag set it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: EditModel,
    pub vocab: Vocabulary,
    pub tagset: TagSet,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        let params = self
            .model
            .params()
            .iter()
            .map(|(_, name, m)| ParamRecord {
                name: name.to_string(),
                rows: m.rows,
                cols: m.cols,
                data: m.data.clone(),
            })
            .collect();
        let container = Container {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.model.config().clone(),
            vocab: self.vocab.entries()[RESERVED_COUNT..].to_vec(),
            tagset: self.tagset.clone(),
            params,
        };
        Ok(serde_json::to_string(&container)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Container = serde_json::from_str(text)?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", c.format)));
        }
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", c.version)));
        }
        let vocab = Vocabulary::from_surfaces(c.vocab)?;
        if vocab.len() != c.config.vocab_size {
            return Err(Error::Checkpoint(format!(
                "vocabulary has {} entries, config says {}",
                vocab.len(),
                c.config.vocab_size
            )));
        }
        let mut values = Vec::with_capacity(c.params.len());
        for p in c.params {
            if p.data.len() != p.rows * p.cols {
                return Err(Error::Checkpoint(format!(
                    "parameter `{}` has {} values for shape {}x{}",
                    p.name,
                    p.data.len(),
                    p.rows,
                    p.cols
                )));
            }
            values.push((p.name, Mat::from_vec(p.rows, p.cols, p.data)));
        }
        let model = EditModel::from_params(c.config, values)?;
        Ok(Checkpoint {
            model,
            vocab,
            tagset: c.tagset,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Checkpoint::from_json(&text)
    }
}
