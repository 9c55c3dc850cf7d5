//! Binary checkpoint format.
//!
//! Layout: the magic `CTT1`, a little-endian `u64` byte length followed by a
//! UTF-8 `key=value` block (architecture, label scheme, vocabulary), a `u64`
//! tensor count, then per tensor a `u32` name length, the name, a `u32` rank,
//! `u64` dimensions and row-major little-endian `f64` values.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use super::{CtTransformer, ModelConfig, TrainedModel};
use crate::data::{LabelScheme, Vocabulary};
use crate::error::{Error, Result};
use crate::masks::MaskSpec;
use crate::numcore::Tensor;

const MAGIC: &[u8; 4] = b"CTT1";

pub fn to_bytes(model: &TrainedModel) -> Vec<u8> {
    let cfg = model.model.config();
    let mut block = String::new();
    let mut kv = |k: &str, v: String| {
        block.push_str(k);
        block.push('=');
        block.push_str(&v);
        block.push('\n');
    };
    kv("vocab_size", cfg.vocab_size.to_string());
    kv("d_model", cfg.d_model.to_string());
    kv("n_layers", cfg.n_layers.to_string());
    kv("n_heads", cfg.n_heads.to_string());
    kv("d_ff", cfg.d_ff.to_string());
    kv("lookahead", cfg.mask_spec.to_string());
    kv("max_positions", cfg.max_positions.to_string());
    kv("dropout", cfg.dropout.to_string());
    kv("punct_labels", model.scheme.punct_labels().join(" "));
    kv("disf_labels", model.scheme.disf_labels().join(" "));
    kv("vocab", model.vocab.entries().join(" "));

    let named = model.model.params().named();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(block.len() as u64).to_le_bytes());
    out.extend_from_slice(block.as_bytes());
    out.extend_from_slice(&(named.len() as u64).to_le_bytes());
    for (name, t) in named {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in t.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let Some(end) = end else {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        };
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Checkpoint(format!("length {v} too large")))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<TrainedModel> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Checkpoint("missing CTT1 header".into()));
    }
    let len = r.u64()?;
    let block = std::str::from_utf8(r.take(len)?)
        .map_err(|_| Error::Checkpoint("config block is not UTF-8".into()))?;
    let mut kv = BTreeMap::new();
    for line in block.lines().filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("malformed config line `{line}`")))?;
        kv.insert(k, v);
    }
    let get = |k: &str| {
        kv.get(k)
            .copied()
            .ok_or_else(|| Error::Checkpoint(format!("config key `{k}` missing")))
    };
    let num = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|_| Error::Checkpoint(format!("config key `{k}` is not an integer")))
    };
    let words = |k: &str| -> Result<Vec<String>> {
        Ok(get(k)?.split(' ').filter(|w| !w.is_empty()).map(String::from).collect())
    };

    let scheme = LabelScheme::from_labels(words("punct_labels")?, words("disf_labels")?)?;
    let vocab = Vocabulary::from_words(words("vocab")?)?;
    let config = ModelConfig {
        vocab_size: num("vocab_size")?,
        d_model: num("d_model")?,
        n_layers: num("n_layers")?,
        n_heads: num("n_heads")?,
        d_ff: num("d_ff")?,
        mask_spec: get("lookahead")?.parse::<MaskSpec>()?,
        punct_label_count: scheme.punct_labels().len(),
        disf_label_count: scheme.disf_labels().len(),
        max_positions: num("max_positions")?,
        dropout: get("dropout")?
            .parse()
            .map_err(|_| Error::Checkpoint("config key `dropout` is not a number".into()))?,
    };
    if vocab.len() != config.vocab_size {
        return Err(Error::Checkpoint(format!(
            "vocabulary has {} entries but vocab_size is {}",
            vocab.len(),
            config.vocab_size
        )));
    }
    config.validate()?;

    let count = r.u64()?;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::Checkpoint(format!("tensor `{name}` is too large")))?;
        let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("overflow".into()))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        tensors.insert(name, Tensor::new(shape, data)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }

    let expected = super::weights::expected_shapes(&config);
    let mut problems = Vec::new();
    for (name, shape) in expected.named() {
        match tensors.get(&name) {
            None => problems.push(format!("{name}: missing")),
            Some(t) if t.shape() != shape.as_slice() => problems.push(format!(
                "{name}: expected {shape:?}, found {:?}",
                t.shape()
            )),
            Some(_) => {}
        }
    }
    let known: Vec<String> = expected.named().into_iter().map(|(n, _)| n).collect();
    for name in tensors.keys().filter(|n| !known.contains(n)) {
        problems.push(format!("{name}: unexpected tensor"));
    }
    if !problems.is_empty() {
        return Err(Error::Checkpoint(format!(
            "shape mismatches: {}",
            problems.join("; ")
        )));
    }
    let params = expected.map(|name, _| Arc::new(tensors.remove(name).expect("checked above")));
    let model = CtTransformer::new(config, params)?;
    Ok(TrainedModel {
        model,
        vocab,
        scheme,
    })
}

pub fn save(model: &TrainedModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io_at(path, e))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<TrainedModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io_at(path, e))?;
    from_bytes(&bytes).map_err(|e| match e {
        Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
        other => other,
    })
}
