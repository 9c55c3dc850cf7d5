//! The CT-Transformer encoder with its punctuation and disfluency heads.

pub mod checkpoint;
mod config;
mod encoder;
mod weights;

pub use config::ModelConfig;
pub use encoder::{sinusoidal_positions, CtTransformer, ForwardVars};
pub use weights::{expected_shapes, init_params, LayerWeights, ModelParams, Weights};

use crate::data::{LabelScheme, TokenSequence, Vocabulary};
use crate::error::{Error, Result};

/// A model together with the vocabulary and label scheme it was trained with.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    model: CtTransformer,
    vocab: Vocabulary,
    scheme: LabelScheme,
}

impl TrainedModel {
    pub fn new(model: CtTransformer, vocab: Vocabulary, scheme: LabelScheme) -> Result<Self> {
        let cfg = model.config();
        if cfg.vocab_size != vocab.len() {
            return Err(Error::Config(format!(
                "model expects {} vocabulary entries, vocabulary has {}",
                cfg.vocab_size,
                vocab.len()
            )));
        }
        if cfg.punct_label_count != scheme.punct_labels().len()
            || cfg.disf_label_count != scheme.disf_labels().len()
        {
            return Err(Error::Config(format!(
                "model has {}/{} outputs, label scheme has {}/{} labels",
                cfg.punct_label_count,
                cfg.disf_label_count,
                scheme.punct_labels().len(),
                scheme.disf_labels().len()
            )));
        }
        Ok(Self { model, vocab, scheme })
    }

    pub fn model(&self) -> &CtTransformer {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut CtTransformer {
        &mut self.model
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn scheme(&self) -> &LabelScheme {
        &self.scheme
    }

    /// Punctuation and disfluency label indices for `words`.
    pub fn tag_words(&self, words: &[String]) -> Result<(Vec<usize>, Vec<usize>)> {
        self.model.predict(&self.vocab.ids(words))
    }

    /// `seq` with its labels replaced by the model's predictions; orphan
    /// `I-` disfluency tags become `B-`.
    pub fn tag_sequence(&self, seq: &TokenSequence) -> Result<TokenSequence> {
        let (p, mut d) = self.tag_words(seq.words())?;
        self.scheme.repair_disf(&mut d);
        TokenSequence::labeled(
            seq.words().to_vec(),
            p.iter().map(|&i| self.scheme.punct_name(i).to_string()).collect(),
            d.iter().map(|&i| self.scheme.disf_name(i).to_string()).collect(),
        )
    }
}
