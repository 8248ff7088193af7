//! A character-level transformer encoder-decoder with hand-written
//! backpropagation, training, decoding, checkpoints, and a frequency
//! baseline.
//!
//! The model is pre-norm, uses sinusoidal positions computed on the fly (so
//! the forward pass accepts any length; `max_positions` is a budget enforced
//! by windowed inference, not by the network), and ties one embedding table
//! across encoder input, decoder input, and the output projection.

pub mod checkpoint;
pub mod decode;
pub mod loss;
pub mod mfd;
pub mod net;
pub mod opt;
pub mod params;
pub mod train;

pub use checkpoint::{CheckpointMeta, TensorInfo};
pub use decode::{DecodeOptions, ModelDecoder};
pub use mfd::MfdBaseline;
pub use train::{train, TrainConfig, TrainError, TrainReport, Trained};
pub use params::{Params, Scalar};

use serde::{Deserialize, Serialize};

/// Architecture hyperparameters. Everything that decides tensor shapes lives
/// here; the training schedule lives in [`train::TrainConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub ffn_dim: usize,
    pub n_heads: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    /// Dropout on residual branches and embeddings.
    pub dropout: f64,
    /// Dropout on attention weights.
    pub attn_dropout: f64,
    /// Dropout on the FFN activation.
    pub act_dropout: f64,
    /// Longest source the model is asked to encode in one piece. Inference
    /// on longer lines goes through overlapping windows.
    pub max_positions: usize,
}

impl ModelConfig {
    /// A small configuration for tests and desk experiments.
    pub fn desk(vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            d_model: 64,
            ffn_dim: 128,
            n_heads: 4,
            enc_layers: 2,
            dec_layers: 2,
            dropout: 0.1,
            attn_dropout: 0.0,
            act_dropout: 0.0,
            // A 300-char inference window plus its task tag must fit.
            max_positions: 304,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.vocab_size < 4 {
            return Err("vocab_size must cover the special symbols".into());
        }
        if self.d_model == 0 || self.ffn_dim == 0 || self.n_heads == 0 {
            return Err("zero-sized model dimension".into());
        }
        if self.d_model % self.n_heads != 0 {
            return Err(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.enc_layers == 0 || self.dec_layers == 0 {
            return Err("need at least one layer per stack".into());
        }
        for (name, p) in
            [("dropout", self.dropout), ("attn_dropout", self.attn_dropout), ("act_dropout", self.act_dropout)]
        {
            if !(0.0..1.0).contains(&p) {
                return Err(format!("{name} {p} outside [0, 1)"));
            }
        }
        if self.max_positions == 0 {
            return Err("max_positions must be positive".into());
        }
        Ok(())
    }
}
