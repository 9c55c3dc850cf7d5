use std::sync::{Arc, Mutex};

use rand::{Rng, RngCore};

use super::weights::{expected_shapes, init_params, LayerWeights, ModelParams, Weights};
use super::ModelConfig;
use crate::error::{Error, Result};
use crate::masks::MaskCache;
use crate::numcore::{argmax_rows, softmax_rows, Tape, Tensor, Var};

/// Sine/cosine position encoding: channel `2k` holds `sin(p / 10000^(2k/d))`
/// and channel `2k+1` the matching cosine.
pub fn sinusoidal_positions(n: usize, d_model: usize, max_positions: usize) -> Result<Tensor> {
    if n > max_positions {
        return Err(Error::Length {
            len: n,
            max: max_positions,
        });
    }
    Ok(position_table(n, d_model))
}

fn position_table(n: usize, d_model: usize) -> Tensor {
    let mut data = Vec::with_capacity(n * d_model);
    for p in 0..n {
        for c in 0..d_model {
            let pair = (c / 2) as f64;
            let angle = p as f64 / 10_000f64.powf(2.0 * pair / d_model as f64);
            data.push(if c % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    Tensor::matrix(n, d_model, data).expect("table shape")
}

/// Output handles of one forward pass on a tape.
pub struct ForwardVars {
    pub hidden: Var,
    pub punct_logits: Var,
    pub disf_logits: Var,
}

/// Shared encoder with separate punctuation and disfluency softmax heads.
///
/// Each layer runs multi-head self-attention under that layer's CT mask
/// (all heads share it), then a ReLU feed-forward block; both sub-layers use
/// a residual connection followed by layer normalization.
pub struct CtTransformer {
    config: ModelConfig,
    params: ModelParams,
    masks: MaskCache,
    positions: Mutex<Arc<Tensor>>,
}

impl Clone for CtTransformer {
    fn clone(&self) -> Self {
        Self::from_parts(self.config.clone(), self.params.clone())
    }
}

impl std::fmt::Debug for CtTransformer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CtTransformer").field("config", &self.config).finish_non_exhaustive()
    }
}

impl CtTransformer {
    /// Wraps existing parameters after checking every shape against `config`.
    pub fn new(config: ModelConfig, params: ModelParams) -> Result<Self> {
        config.validate()?;
        let shapes = expected_shapes(&config);
        if params.layers.len() != config.n_layers {
            return Err(Error::Checkpoint(format!(
                "{} layers of parameters for a {}-layer config",
                params.layers.len(),
                config.n_layers
            )));
        }
        let mut mismatches = Vec::new();
        let expected = shapes.named();
        for ((name, t), (_, shape)) in params.named().into_iter().zip(expected) {
            if t.shape() != shape.as_slice() {
                mismatches.push(format!("{name}: expected {shape:?}, found {:?}", t.shape()));
            }
        }
        if !mismatches.is_empty() {
            return Err(Error::Checkpoint(format!(
                "shape mismatches: {}",
                mismatches.join("; ")
            )));
        }
        Ok(Self::from_parts(config, params))
    }

    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = init_params(&config, seed);
        Ok(Self::from_parts(config, params))
    }

    fn from_parts(config: ModelConfig, params: ModelParams) -> Self {
        Self {
            config,
            params,
            masks: MaskCache::new(),
            positions: Mutex::new(Arc::new(Tensor::zeros(&[0, 0]))),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    /// Same weights under a different look-ahead configuration.
    pub fn with_mask_spec(&self, mask_spec: crate::masks::MaskSpec) -> Result<Self> {
        let config = ModelConfig {
            mask_spec,
            ..self.config.clone()
        };
        Self::new(config, self.params.clone())
    }

    /// Registers every parameter as a trainable leaf on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> Weights<Var> {
        self.params.map(|_, t| tape.param(Arc::clone(t)))
    }

    fn positions(&self, n: usize) -> Result<Tensor> {
        if n > self.config.max_positions {
            return Err(Error::Length {
                len: n,
                max: self.config.max_positions,
            });
        }
        let mut cached = self.positions.lock().unwrap_or_else(|e| e.into_inner());
        if cached.rows() < n || cached.cols() != self.config.d_model {
            let rows = n.max(2 * cached.rows()).min(self.config.max_positions);
            *cached = Arc::new(position_table(rows, self.config.d_model));
        }
        let d = self.config.d_model;
        Tensor::matrix(n, d, cached.data()[..n * d].to_vec())
    }

    fn layer_masks(&self, n: usize) -> Result<Vec<Arc<Tensor>>> {
        self.config
            .mask_spec
            .per_layer()
            .iter()
            .map(|&l| self.masks.ct(n, l))
            .collect()
    }

    /// Full forward pass on `tape` using this model's CT masks.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        vars: &Weights<Var>,
        ids: &[usize],
        dropout_rng: Option<&mut dyn RngCore>,
    ) -> Result<ForwardVars> {
        if ids.is_empty() {
            return Err(Error::EmptyInput("encoder input"));
        }
        let masks = self.layer_masks(ids.len())?;
        self.forward_with_masks(tape, vars, ids, &masks, dropout_rng)
    }

    fn forward_with_masks(
        &self,
        tape: &mut Tape,
        vars: &Weights<Var>,
        ids: &[usize],
        masks: &[Arc<Tensor>],
        mut dropout_rng: Option<&mut dyn RngCore>,
    ) -> Result<ForwardVars> {
        let n = ids.len();
        if let Some(&bad) = ids.iter().find(|&&id| id >= self.config.vocab_size) {
            return Err(Error::Vocabulary {
                id: bad,
                size: self.config.vocab_size,
            });
        }
        if masks.len() != self.config.n_layers {
            return Err(Error::contract(format!(
                "{} masks for {} layers",
                masks.len(),
                self.config.n_layers
            )));
        }
        let d = self.config.d_model;
        let pos = tape.constant(Arc::new(self.positions(n)?));
        let emb = tape.gather_rows(vars.embedding, ids)?;
        let emb = tape.scale(emb, (d as f64).sqrt());
        let mut x = tape.add(emb, pos)?;

        for (layer, mask) in vars.layers.iter().zip(masks) {
            if mask.shape() != [n, n] {
                return Err(Error::shape("attention mask", mask.shape(), &[n, n]));
            }
            let attn = self.attention(tape, x, layer, mask)?;
            let attn = self.dropout(tape, attn, &mut dropout_rng)?;
            let res = tape.add(x, attn)?;
            x = tape.layer_norm(res, layer.norm1_gain, layer.norm1_bias)?;

            let h = linear(tape, x, layer.ff_w1, layer.ff_b1)?;
            let h = tape.relu(h);
            let h = linear(tape, h, layer.ff_w2, layer.ff_b2)?;
            let h = self.dropout(tape, h, &mut dropout_rng)?;
            let res = tape.add(x, h)?;
            x = tape.layer_norm(res, layer.norm2_gain, layer.norm2_bias)?;
        }

        let punct_logits = linear(tape, x, vars.punct_w, vars.punct_b)?;
        let disf_logits = linear(tape, x, vars.disf_w, vars.disf_b)?;
        Ok(ForwardVars {
            hidden: x,
            punct_logits,
            disf_logits,
        })
    }

    fn attention(&self, tape: &mut Tape, x: Var, w: &LayerWeights<Var>, mask: &Tensor) -> Result<Var> {
        let dh = self.config.d_head();
        let q = linear(tape, x, w.wq, w.bq)?;
        let k = linear(tape, x, w.wk, w.bk)?;
        let v = linear(tape, x, w.wv, w.bv)?;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut heads = Vec::with_capacity(self.config.n_heads);
        for h in 0..self.config.n_heads {
            let qh = tape.slice_cols(q, h * dh, dh)?;
            let kh = tape.slice_cols(k, h * dh, dh)?;
            let vh = tape.slice_cols(v, h * dh, dh)?;
            let scores = tape.matmul_t(qh, kh)?;
            let scores = tape.scale(scores, scale);
            let p = tape.masked_softmax_rows(scores, mask)?;
            heads.push(tape.matmul(p, vh)?);
        }
        let cat = if heads.len() == 1 {
            heads[0]
        } else {
            tape.concat_cols(&heads)?
        };
        linear(tape, cat, w.wo, w.bo)
    }

    fn dropout(&self, tape: &mut Tape, x: Var, rng: &mut Option<&mut dyn RngCore>) -> Result<Var> {
        let p = self.config.dropout;
        let Some(rng) = rng.as_mut().filter(|_| p > 0.0) else {
            return Ok(x);
        };
        let keep = 1.0 / (1.0 - p);
        let shape = tape.value(x).shape().to_vec();
        let n = tape.value(x).len();
        let data = (0..n).map(|_| if rng.random_bool(p) { 0.0 } else { keep }).collect();
        let m = tape.constant(Arc::new(Tensor::new(shape, data)?));
        tape.mul(x, m)
    }

    /// Encoder hidden states, `n × d_model`.
    pub fn encoder_forward(&self, ids: &[usize]) -> Result<Tensor> {
        let mut tape = Tape::inference();
        let vars = self.bind(&mut tape);
        let out = self.forward_on_tape(&mut tape, &vars, ids, None)?;
        Ok(tape.value(out.hidden).clone())
    }

    /// Encoder forward with caller-supplied per-layer masks (e.g. all-zero
    /// masks for a plain full-attention encoder).
    pub fn encoder_forward_with_masks(&self, ids: &[usize], masks: &[Arc<Tensor>]) -> Result<Tensor> {
        if ids.is_empty() {
            return Err(Error::EmptyInput("encoder input"));
        }
        let mut tape = Tape::inference();
        let vars = self.bind(&mut tape);
        let out = self.forward_with_masks(&mut tape, &vars, ids, masks, None)?;
        Ok(tape.value(out.hidden).clone())
    }

    /// Punctuation and disfluency logits for given hidden states.
    pub fn heads_forward(&self, hidden: &Tensor) -> Result<(Tensor, Tensor)> {
        let mut tape = Tape::inference();
        let h = tape.constant(Arc::new(hidden.clone()));
        let pw = tape.constant(Arc::clone(&self.params.punct_w));
        let pb = tape.constant(Arc::clone(&self.params.punct_b));
        let dw = tape.constant(Arc::clone(&self.params.disf_w));
        let db = tape.constant(Arc::clone(&self.params.disf_b));
        let p = linear(&mut tape, h, pw, pb)?;
        let d = linear(&mut tape, h, dw, db)?;
        Ok((tape.value(p).clone(), tape.value(d).clone()))
    }

    /// Per-position label distributions of both heads.
    pub fn heads_probabilities(&self, hidden: &Tensor) -> Result<(Tensor, Tensor)> {
        let (p, d) = self.heads_forward(hidden)?;
        Ok((softmax_rows(&p)?, softmax_rows(&d)?))
    }

    /// `(punct logits, disf logits)` for a token id sequence.
    pub fn logits(&self, ids: &[usize]) -> Result<(Tensor, Tensor)> {
        let mut tape = Tape::inference();
        let vars = self.bind(&mut tape);
        let out = self.forward_on_tape(&mut tape, &vars, ids, None)?;
        Ok((
            tape.value(out.punct_logits).clone(),
            tape.value(out.disf_logits).clone(),
        ))
    }

    /// Argmax labels of both heads; ties resolve to the lowest label index.
    /// An empty input yields empty outputs.
    pub fn predict(&self, ids: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
        if ids.is_empty() {
            return Ok((Vec::new(), Vec::new()));
        }
        let (p, d) = self.logits(ids)?;
        Ok((argmax_rows(&p), argmax_rows(&d)))
    }
}

fn linear(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = tape.matmul(x, w)?;
    tape.add_row(y, b)
}
