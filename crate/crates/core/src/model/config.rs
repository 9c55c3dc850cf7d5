use crate::error::{Error, Result};
use crate::masks::MaskSpec;

/// Architecture hyperparameters of the encoder and both tagging heads.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    /// Inner dimension of the feed-forward sub-layer.
    pub d_ff: usize,
    pub mask_spec: MaskSpec,
    pub punct_label_count: usize,
    pub disf_label_count: usize,
    pub max_positions: usize,
    /// Dropout on sub-layer outputs during training; 0 disables it.
    pub dropout: f64,
}

impl ModelConfig {
    /// Six layers, eight heads of width 64, inner dimension 2048 and the
    /// whole look-ahead budget of 9 words in the last layer.
    pub fn base(vocab_size: usize, punct_label_count: usize, disf_label_count: usize) -> Self {
        Self {
            vocab_size,
            d_model: 512,
            n_layers: 6,
            n_heads: 8,
            d_ff: 2048,
            mask_spec: MaskSpec::last_layer(6, 9),
            punct_label_count,
            disf_label_count,
            max_positions: 512,
            dropout: 0.0,
        }
    }

    /// Desk-scale default: four layers of width 32 with look-ahead `0,0,0,9`.
    pub fn toy(vocab_size: usize, punct_label_count: usize, disf_label_count: usize) -> Self {
        Self {
            vocab_size,
            d_model: 32,
            n_layers: 4,
            n_heads: 4,
            d_ff: 64,
            mask_spec: MaskSpec::last_layer(4, 9),
            punct_label_count,
            disf_label_count,
            max_positions: 512,
            dropout: 0.0,
        }
    }

    pub fn d_head(&self) -> usize {
        self.d_model / self.n_heads.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d_model == 0 || self.n_heads == 0 || self.n_layers == 0 || self.d_ff == 0 {
            return bad("d_model, n_heads, n_layers and d_ff must be positive".into());
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.mask_spec.len() != self.n_layers {
            return bad(format!(
                "look-ahead list has {} entries for {} layers",
                self.mask_spec.len(),
                self.n_layers
            ));
        }
        if self.vocab_size < 2 || self.punct_label_count == 0 || self.disf_label_count == 0 {
            return bad("vocabulary and label sets must be non-empty".into());
        }
        if self.max_positions == 0 {
            return bad("max_positions must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }
}
