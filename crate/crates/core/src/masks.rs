//! Additive self-attention masks.
//!
//! All masks use 0-based indices and hold `0.0` where attention is allowed and
//! `-inf` where it is blocked. A controllable time-delay (CT) mask with budget
//! `L` lets position `i` see every earlier position plus at most `L` future
//! positions; stacking layers adds their budgets.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::numcore::Tensor;

/// Per-layer look-ahead budget that means "no limit".
pub const UNBOUNDED: usize = usize::MAX;

/// Look-ahead budgets `L_1..L_N`, one per encoder layer, counted in words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskSpec {
    per_layer: Vec<usize>,
}

impl MaskSpec {
    pub fn new(per_layer: Vec<usize>) -> Self {
        Self { per_layer }
    }

    /// Whole budget in the last layer, all earlier layers causal.
    pub fn last_layer(n_layers: usize, lookahead: usize) -> Self {
        let mut per_layer = vec![0; n_layers];
        if let Some(last) = per_layer.last_mut() {
            *last = lookahead;
        }
        Self { per_layer }
    }

    /// Every layer attends to the whole sequence.
    pub fn full(n_layers: usize) -> Self {
        Self {
            per_layer: vec![UNBOUNDED; n_layers],
        }
    }

    pub fn per_layer(&self) -> &[usize] {
        &self.per_layer
    }

    pub fn len(&self) -> usize {
        self.per_layer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_layer.is_empty()
    }

    pub fn effective_lookahead(&self) -> usize {
        effective_lookahead(self)
    }
}

/// Maximum number of future words any output position can depend on.
pub fn effective_lookahead(spec: &MaskSpec) -> usize {
    spec.per_layer
        .iter()
        .fold(0usize, |acc, &l| acc.saturating_add(l))
}

impl fmt::Display for MaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .per_layer
            .iter()
            .map(|&l| if l == UNBOUNDED { "full".into() } else { l.to_string() })
            .collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for MaskSpec {
    type Err = Error;

    /// Parses `"0,0,0,0,0,9"`; an entry may be `full` for an unbounded layer.
    fn from_str(s: &str) -> Result<Self> {
        let per_layer = s
            .split(',')
            .map(|part| {
                let part = part.trim();
                if part.eq_ignore_ascii_case("full") {
                    Ok(UNBOUNDED)
                } else {
                    part.parse::<usize>().map_err(|_| {
                        Error::Config(format!("invalid look-ahead entry `{part}` in `{s}`"))
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { per_layer })
    }
}

/// Square additive attention mask.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionMask {
    n: usize,
    entries: Tensor,
}

impl AttentionMask {
    fn from_rule(n: usize, allowed: impl Fn(usize, usize) -> bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput("attention mask needs at least one position"));
        }
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(if allowed(i, j) { 0.0 } else { f64::NEG_INFINITY });
            }
        }
        Ok(Self {
            n,
            entries: Tensor::matrix(n, n, data)?,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.entries.at(i, j) == 0.0
    }

    pub fn as_tensor(&self) -> &Tensor {
        &self.entries
    }

    pub fn into_tensor(self) -> Tensor {
        self.entries
    }
}

/// `(i, j)` is open iff `i + lookahead >= j`.
pub fn build_ct_mask(n: usize, lookahead: usize) -> Result<AttentionMask> {
    AttentionMask::from_rule(n, |i, j| i.saturating_add(lookahead) >= j)
}

/// `(i, j)` is open iff `j <= i`.
pub fn build_forward_mask(n: usize) -> Result<AttentionMask> {
    AttentionMask::from_rule(n, |i, j| j <= i)
}

/// `(i, j)` is open iff `i - history <= j <= i`.
pub fn build_local_mask(n: usize, history: usize) -> Result<AttentionMask> {
    AttentionMask::from_rule(n, |i, j| j <= i && i - j <= history)
}

pub fn build_full_mask(n: usize) -> Result<AttentionMask> {
    AttentionMask::from_rule(n, |_, _| true)
}

/// Thread-safe cache of CT masks keyed by `(length, budget)`.
#[derive(Debug, Default)]
pub struct MaskCache {
    masks: Mutex<HashMap<(usize, usize), Arc<Tensor>>>,
}

impl MaskCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ct(&self, n: usize, lookahead: usize) -> Result<Arc<Tensor>> {
        // Budgets past the sequence end all produce the full mask.
        let key = (n, lookahead.min(n.saturating_sub(1)));
        let mut masks = self.masks.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(m) = masks.get(&key) {
            return Ok(Arc::clone(m));
        }
        let mask = Arc::new(build_ct_mask(key.0, key.1)?.into_tensor());
        masks.insert(key, Arc::clone(&mask));
        Ok(mask)
    }
}

impl Clone for MaskCache {
    fn clone(&self) -> Self {
        Self::new()
    }
}
