//! The split-decoder edit model, its training loop and checkpoints.

mod checkpoint;
mod config;
mod edit_model;
mod gradcheck;
mod network;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{ModelConfig, ModelMode};
pub use edit_model::{
    class_replacement, replacement_class, EditModel, EncodedSource, LossBreakdown, StepFeedback,
    StepLogProbs,
};
pub use gradcheck::{gradient_check, GradCheck};
pub use train::{train, train_until, TrainConfig, TrainReport};

use crate::edit::EditSequence;
use crate::editops::extract_edits;
use crate::error::Result;
use crate::tags::{TagId, TagSet};
use crate::vocab::{SourceSequence, TargetSequence};

/// One training pair. Edit mode learns from `edits`, the full-sequence
/// baseline from `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub src: SourceSequence,
    pub target: TargetSequence,
    pub edits: EditSequence,
}

impl Example {
    /// Builds an example by extracting the edits of a parallel pair.
    pub fn from_pair(
        src: SourceSequence,
        target: TargetSequence,
        tags: Option<&[TagId]>,
        tagset: &TagSet,
    ) -> Result<Self> {
        let edits = extract_edits(&src, &target, tags, tagset)?;
        Ok(Example { src, target, edits })
    }
}
