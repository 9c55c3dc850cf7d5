use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;
use crate::numcore::Tensor;

const LAYER_FIELDS: [&str; 16] = [
    "attn.wq", "attn.bq", "attn.wk", "attn.bk", "attn.wv", "attn.bv", "attn.wo", "attn.bo",
    "norm1.gain", "norm1.bias", "ff.w1", "ff.b1", "ff.w2", "ff.b2", "norm2.gain", "norm2.bias",
];

/// Weights of one encoder layer. Query/key/value projections hold all heads
/// side by side: head `h` owns columns `h*d_head..(h+1)*d_head`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights<T> {
    pub wq: T,
    pub bq: T,
    pub wk: T,
    pub bk: T,
    pub wv: T,
    pub bv: T,
    pub wo: T,
    pub bo: T,
    pub norm1_gain: T,
    pub norm1_bias: T,
    pub ff_w1: T,
    pub ff_b1: T,
    pub ff_w2: T,
    pub ff_b2: T,
    pub norm2_gain: T,
    pub norm2_bias: T,
}

impl<T> LayerWeights<T> {
    fn fields(&self) -> [&T; 16] {
        [
            &self.wq, &self.bq, &self.wk, &self.bk, &self.wv, &self.bv, &self.wo, &self.bo,
            &self.norm1_gain, &self.norm1_bias, &self.ff_w1, &self.ff_b1, &self.ff_w2,
            &self.ff_b2, &self.norm2_gain, &self.norm2_bias,
        ]
    }

    fn fields_mut(&mut self) -> [&mut T; 16] {
        [
            &mut self.wq, &mut self.bq, &mut self.wk, &mut self.bk, &mut self.wv, &mut self.bv,
            &mut self.wo, &mut self.bo, &mut self.norm1_gain, &mut self.norm1_bias,
            &mut self.ff_w1, &mut self.ff_b1, &mut self.ff_w2, &mut self.ff_b2,
            &mut self.norm2_gain, &mut self.norm2_bias,
        ]
    }

    fn from_fields(f: [T; 16]) -> Self {
        let [wq, bq, wk, bk, wv, bv, wo, bo, norm1_gain, norm1_bias, ff_w1, ff_b1, ff_w2, ff_b2, norm2_gain, norm2_bias] =
            f;
        Self {
            wq, bq, wk, bk, wv, bv, wo, bo, norm1_gain, norm1_bias, ff_w1, ff_b1, ff_w2, ff_b2,
            norm2_gain, norm2_bias,
        }
    }
}

/// Every learnable tensor of the model, generic over the handle type so the
/// same layout serves stored parameters, tape variables and optimizer moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights<T> {
    pub embedding: T,
    pub layers: Vec<LayerWeights<T>>,
    pub punct_w: T,
    pub punct_b: T,
    pub disf_w: T,
    pub disf_b: T,
}

pub type ModelParams = Weights<Arc<Tensor>>;

impl<T> Weights<T> {
    /// Tensors with stable names, in checkpoint order.
    pub fn named(&self) -> Vec<(String, &T)> {
        let mut out = vec![("embedding".to_string(), &self.embedding)];
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, t) in LAYER_FIELDS.iter().zip(layer.fields()) {
                out.push((format!("layers.{i}.{name}"), t));
            }
        }
        out.push(("punct_head.w".into(), &self.punct_w));
        out.push(("punct_head.b".into(), &self.punct_b));
        out.push(("disf_head.w".into(), &self.disf_w));
        out.push(("disf_head.b".into(), &self.disf_b));
        out
    }

    pub fn values_mut(&mut self) -> Vec<&mut T> {
        let mut out = vec![&mut self.embedding];
        for layer in &mut self.layers {
            out.extend(layer.fields_mut());
        }
        out.extend([
            &mut self.punct_w,
            &mut self.punct_b,
            &mut self.disf_w,
            &mut self.disf_b,
        ]);
        out
    }

    pub fn try_map<U, E>(&self, mut f: impl FnMut(&str, &T) -> Result<U, E>) -> Result<Weights<U>, E> {
        let embedding = f("embedding", &self.embedding)?;
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut mapped = Vec::with_capacity(16);
            for (name, t) in LAYER_FIELDS.iter().zip(layer.fields()) {
                mapped.push(f(&format!("layers.{i}.{name}"), t)?);
            }
            let Ok(arr) = <[U; 16]>::try_from(mapped) else {
                unreachable!("layer has 16 fields")
            };
            layers.push(LayerWeights::from_fields(arr));
        }
        Ok(Weights {
            embedding,
            layers,
            punct_w: f("punct_head.w", &self.punct_w)?,
            punct_b: f("punct_head.b", &self.punct_b)?,
            disf_w: f("disf_head.w", &self.disf_w)?,
            disf_b: f("disf_head.b", &self.disf_b)?,
        })
    }

    pub fn map<U>(&self, mut f: impl FnMut(&str, &T) -> U) -> Weights<U> {
        match self.try_map::<U, std::convert::Infallible>(|n, t| Ok(f(n, t))) {
            Ok(w) => w,
            Err(never) => match never {},
        }
    }
}

/// Shapes implied by `config`.
pub fn expected_shapes(config: &ModelConfig) -> Weights<Vec<usize>> {
    let d = config.d_model;
    let f = config.d_ff;
    let layer = LayerWeights {
        wq: vec![d, d],
        bq: vec![d],
        wk: vec![d, d],
        bk: vec![d],
        wv: vec![d, d],
        bv: vec![d],
        wo: vec![d, d],
        bo: vec![d],
        norm1_gain: vec![d],
        norm1_bias: vec![d],
        ff_w1: vec![d, f],
        ff_b1: vec![f],
        ff_w2: vec![f, d],
        ff_b2: vec![d],
        norm2_gain: vec![d],
        norm2_bias: vec![d],
    };
    Weights {
        embedding: vec![config.vocab_size, d],
        layers: vec![layer; config.n_layers],
        punct_w: vec![d, config.punct_label_count],
        punct_b: vec![config.punct_label_count],
        disf_w: vec![d, config.disf_label_count],
        disf_b: vec![config.disf_label_count],
    }
}

/// Random initialization: embeddings uniform in `±d_model^-1/2`, projection
/// matrices Xavier-uniform, biases zero, normalization gains one.
pub fn init_params(config: &ModelConfig, seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let emb_bound = 1.0 / (config.d_model as f64).sqrt();
    expected_shapes(config).map(|name, shape| {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = if name == "embedding" {
            (0..n).map(|_| rng.random_range(-emb_bound..emb_bound)).collect()
        } else if name.ends_with(".gain") {
            vec![1.0; n]
        } else if shape.len() == 2 {
            let bound = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
            (0..n).map(|_| rng.random_range(-bound..bound)).collect()
        } else {
            vec![0.0; n]
        };
        Arc::new(Tensor::new(shape.clone(), data).expect("shape matches data"))
    })
}
