use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelMode {
    /// Predicts `(tag, span end, replacement)` triples.
    Edit,
    /// Plain token-by-token encoder-decoder baseline.
    FullSequence,
}

impl ModelMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelMode::Edit => "edit",
            ModelMode::FullSequence => "full_sequence",
        }
    }
}

impl fmt::Display for ModelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "edit" => Ok(ModelMode::Edit),
            "fullseq" | "full_sequence" | "full-sequence" => Ok(ModelMode::FullSequence),
            other => Err(format!("unknown mode `{other}` (expected edit|fullseq)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub hidden: usize,
    pub encoder_layers: usize,
    pub decoder_a_layers: usize,
    pub decoder_b_layers: usize,
    pub attention_heads: usize,
    pub tag_embed_dim: usize,
    pub ffn_dim: usize,
    pub max_positions: usize,
    pub vocab_size: usize,
    pub tagset_size: usize,
    pub mode: ModelMode,
    /// Give decoder B a second cross-attention block over the encoder
    /// states in addition to the one over decoder A outputs.
    pub decoder_b_encoder_attention: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::desk(0, 0)
    }
}

impl ModelConfig {
    /// Small CPU-friendly configuration used for training runs here.
    pub fn desk(vocab_size: usize, tagset_size: usize) -> Self {
        ModelConfig {
            hidden: 64,
            encoder_layers: 2,
            decoder_a_layers: 1,
            decoder_b_layers: 1,
            attention_heads: 4,
            tag_embed_dim: 6,
            ffn_dim: 128,
            max_positions: 128,
            vocab_size,
            tagset_size,
            mode: ModelMode::Edit,
            decoder_b_encoder_attention: false,
        }
    }

    pub fn base(vocab_size: usize, tagset_size: usize) -> Self {
        ModelConfig {
            hidden: 512,
            encoder_layers: 6,
            decoder_a_layers: 3,
            decoder_b_layers: 3,
            attention_heads: 8,
            ffn_dim: 2048,
            max_positions: 256,
            ..ModelConfig::desk(vocab_size, tagset_size)
        }
    }

    pub fn big(vocab_size: usize, tagset_size: usize) -> Self {
        ModelConfig {
            hidden: 1024,
            encoder_layers: 6,
            decoder_a_layers: 4,
            decoder_b_layers: 4,
            attention_heads: 16,
            ffn_dim: 4096,
            max_positions: 256,
            ..ModelConfig::desk(vocab_size, tagset_size)
        }
    }

    pub fn with_mode(mut self, mode: ModelMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.hidden == 0 || self.attention_heads == 0 {
            return fail("hidden units and attention heads must be positive".into());
        }
        if !self.hidden.is_multiple_of(self.attention_heads) {
            return fail(format!(
                "hidden units {} not divisible by {} heads",
                self.hidden, self.attention_heads
            ));
        }
        if self.encoder_layers == 0 || self.decoder_a_layers == 0 || self.decoder_b_layers == 0 {
            return fail("every layer count must be at least 1".into());
        }
        if self.tag_embed_dim == 0 || self.ffn_dim == 0 || self.max_positions == 0 {
            return fail("tag_embed_dim, ffn_dim and max_positions must be positive".into());
        }
        if self.vocab_size < crate::vocab::RESERVED_COUNT {
            return fail(format!("vocab_size {} below the reserved ids", self.vocab_size));
        }
        if self.mode == ModelMode::Edit && self.tagset_size == 0 {
            return fail("edit mode needs a non-empty tag set".into());
        }
        Ok(())
    }
}
