use std::sync::Arc;

use super::ops;
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    MaskedSoftmax(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        normed: Tensor,
        inv_std: Vec<f64>,
        bias: Var,
    },
    GatherRows { table: Var, ids: Vec<usize> },
    SliceCols { src: Var, start: usize },
    ConcatCols(Vec<Var>),
    Sum(Var),
    CrossEntropySum {
        logits: Var,
        targets: Vec<usize>,
        probs: Tensor,
    },
}

struct Node {
    value: Arc<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Ordered record of executed operations.
///
/// Every operation appends a node; [`Tape::backward`] walks the nodes in
/// reverse and accumulates gradients into each node that depends on a
/// parameter leaf. A tape created with [`Tape::inference`] stores values only
/// and refuses to run a backward pass.
pub struct Tape {
    nodes: Vec<Node>,
    grad_enabled: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grad_enabled: true,
        }
    }

    pub fn inference() -> Self {
        Self {
            nodes: Vec::new(),
            grad_enabled: false,
        }
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shared_value(&self, v: Var) -> Arc<Tensor> {
        Arc::clone(&self.nodes[v.0].value)
    }

    fn push(&mut self, value: Tensor, op: Op, parents: &[Var]) -> Var {
        let requires_grad =
            self.grad_enabled && parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value: Arc::new(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Registers a trainable leaf. Its gradient is reported by [`Tape::backward`].
    pub fn param(&mut self, value: Arc<Tensor>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: self.grad_enabled,
        });
        Var(self.nodes.len() - 1)
    }

    /// Registers a leaf that never receives a gradient.
    pub fn constant(&mut self, value: Arc<Tensor>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = ops::matmul(self.value(a), self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b), &[a, b]))
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = ops::matmul_t(self.value(a), self.value(b))?;
        Ok(self.push(value, Op::MatMulT(a, b), &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = ops::add(self.value(a), self.value(b))?;
        Ok(self.push(value, Op::Add(a, b), &[a, b]))
    }

    /// Adds vector `row` to every row of matrix `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let value = ops::add_row(self.value(a), self.value(row))?;
        Ok(self.push(value, Op::AddRow(a, row), &[a, row]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::shape("mul", x.shape(), y.shape()));
        }
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).map(|v| v * s);
        self.push(value, Op::Scale(a, s), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = ops::relu(self.value(a));
        self.push(value, Op::Relu(a), &[a])
    }

    pub fn masked_softmax_rows(&mut self, scores: Var, mask: &Tensor) -> Result<Var> {
        let value = ops::masked_softmax_rows(self.value(scores), mask)?;
        Ok(self.push(value, Op::MaskedSoftmax(scores), &[scores]))
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let (value, normed, inv_std) =
            ops::layer_norm_parts(self.value(x), self.value(gain), self.value(bias))?;
        let (normed, inv_std) = if self.grad_enabled {
            (normed, inv_std)
        } else {
            (Tensor::zeros(&[0]), Vec::new())
        };
        let op = Op::LayerNorm {
            x,
            gain,
            normed,
            inv_std,
            bias,
        };
        Ok(self.push(value, op, &[x, gain, bias]))
    }

    /// Selects rows of `table` (embedding lookup).
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = self.value(table);
        let (rows, cols) = t.dims2()?;
        let mut data = Vec::with_capacity(ids.len() * cols);
        for &id in ids {
            if id >= rows {
                return Err(Error::Vocabulary { id, size: rows });
            }
            data.extend_from_slice(t.row(id));
        }
        let value = Tensor::matrix(ids.len(), cols, data)?;
        let op = Op::GatherRows {
            table,
            ids: ids.to_vec(),
        };
        Ok(self.push(value, op, &[table]))
    }

    pub fn slice_cols(&mut self, src: Var, start: usize, width: usize) -> Result<Var> {
        let t = self.value(src);
        let (n, m) = t.dims2()?;
        if start + width > m {
            return Err(Error::shape("slice_cols", t.shape(), &[start, width]));
        }
        let mut data = Vec::with_capacity(n * width);
        for i in 0..n {
            data.extend_from_slice(&t.row(i)[start..start + width]);
        }
        let value = Tensor::matrix(n, width, data)?;
        Ok(self.push(value, Op::SliceCols { src, start }, &[src]))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or(Error::EmptyInput("concat_cols needs at least one part"))?;
        let n = self.value(*first).rows();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.value(p).dims2()?;
            if r != n {
                return Err(Error::shape("concat_cols", &[n], &[r]));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(n * total);
        for i in 0..n {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(i));
            }
        }
        let value = Tensor::matrix(n, total, data)?;
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), parts))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        self.push(value, Op::Sum(a), &[a])
    }

    /// Sum over rows of `-log softmax(logits)[target]`.
    pub fn cross_entropy_sum(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let l = self.value(logits);
        let (n, m) = l.dims2()?;
        if targets.len() != n {
            return Err(Error::shape("cross_entropy_sum", &[n], &[targets.len()]));
        }
        let probs = ops::softmax_rows(l)?;
        let mut total = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            if t >= m {
                return Err(Error::contract(format!("target {t} outside {m} classes")));
            }
            let row = l.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[t];
        }
        let op = Op::CrossEntropySum {
            logits,
            targets: targets.to_vec(),
            probs,
        };
        Ok(self.push(Tensor::scalar(total), op, &[logits]))
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.grad_enabled {
            return Err(Error::contract("backward on an inference tape"));
        }
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(lv.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                grads[idx] = None;
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(g);
            }
        }
        Ok(Gradients { grads })
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.needs(*a) {
                    accumulate(grads, *a, ops::matmul_t(g, self.value(*b))?);
                }
                if self.needs(*b) {
                    accumulate(grads, *b, ops::matmul_tn(self.value(*a), g)?);
                }
            }
            Op::MatMulT(a, b) => {
                if self.needs(*a) {
                    accumulate(grads, *a, ops::matmul(g, self.value(*b))?);
                }
                if self.needs(*b) {
                    accumulate(grads, *b, ops::matmul_tn(g, self.value(*a))?);
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if self.needs(*v) {
                        accumulate(grads, *v, g.clone());
                    }
                }
            }
            Op::AddRow(a, row) => {
                if self.needs(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if self.needs(*row) {
                    let (n, m) = g.dims2()?;
                    let mut col = vec![0.0; m];
                    for i in 0..n {
                        for (c, v) in col.iter_mut().zip(g.row(i)) {
                            *c += v;
                        }
                    }
                    let shape = self.value(*row).shape().to_vec();
                    accumulate(grads, *row, Tensor::new(shape, col)?);
                }
            }
            Op::Mul(a, b) => {
                for (x, y) in [(a, b), (b, a)] {
                    if self.needs(*x) {
                        let other = self.value(*y);
                        let data = g.data().iter().zip(other.data()).map(|(p, q)| p * q);
                        accumulate(grads, *x, Tensor::new(g.shape().to_vec(), data.collect())?);
                    }
                }
            }
            Op::Scale(a, s) => {
                if self.needs(*a) {
                    accumulate(grads, *a, g.map(|v| v * s));
                }
            }
            Op::Relu(a) => {
                if self.needs(*a) {
                    let x = self.value(*a);
                    let data = g
                        .data()
                        .iter()
                        .zip(x.data())
                        .map(|(gv, xv)| if *xv > 0.0 { *gv } else { 0.0 });
                    accumulate(grads, *a, Tensor::new(g.shape().to_vec(), data.collect())?);
                }
            }
            Op::MaskedSoftmax(scores) => {
                if self.needs(*scores) {
                    let p = &node.value;
                    let (n, m) = p.dims2()?;
                    let mut out = vec![0.0; n * m];
                    for i in 0..n {
                        let (pr, gr) = (p.row(i), g.row(i));
                        let inner: f64 = pr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for j in 0..m {
                            out[i * m + j] = pr[j] * (gr[j] - inner);
                        }
                    }
                    accumulate(grads, *scores, Tensor::matrix(n, m, out)?);
                }
            }
            Op::LayerNorm {
                x,
                gain,
                normed,
                inv_std,
                bias,
            } => {
                let (n, d) = g.dims2()?;
                if self.needs(*gain) || self.needs(*bias) {
                    let mut dg = vec![0.0; d];
                    let mut db = vec![0.0; d];
                    for i in 0..n {
                        for j in 0..d {
                            dg[j] += g.at(i, j) * normed.at(i, j);
                            db[j] += g.at(i, j);
                        }
                    }
                    if self.needs(*gain) {
                        let shape = self.value(*gain).shape().to_vec();
                        accumulate(grads, *gain, Tensor::new(shape, dg)?);
                    }
                    if self.needs(*bias) {
                        let shape = self.value(*bias).shape().to_vec();
                        accumulate(grads, *bias, Tensor::new(shape, db)?);
                    }
                }
                if self.needs(*x) {
                    let gd = self.value(*gain).data();
                    let mut dx = vec![0.0; n * d];
                    for i in 0..n {
                        let dh: Vec<f64> = (0..d).map(|j| g.at(i, j) * gd[j]).collect();
                        let sum_dh: f64 = dh.iter().sum();
                        let sum_dh_h: f64 =
                            dh.iter().zip(normed.row(i)).map(|(a, b)| a * b).sum();
                        let scale = inv_std[i] / d as f64;
                        for j in 0..d {
                            dx[i * d + j] = scale
                                * (d as f64 * dh[j] - sum_dh - normed.at(i, j) * sum_dh_h);
                        }
                    }
                    accumulate(grads, *x, Tensor::matrix(n, d, dx)?);
                }
            }
            Op::GatherRows { table, ids } => {
                if self.needs(*table) {
                    let t = self.value(*table);
                    let cols = t.cols();
                    let mut dt = Tensor::zeros(t.shape());
                    for (r, &id) in ids.iter().enumerate() {
                        for (o, v) in dt.row_mut(id).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    debug_assert_eq!(dt.cols(), cols);
                    accumulate(grads, *table, dt);
                }
            }
            Op::SliceCols { src, start } => {
                if self.needs(*src) {
                    let s = self.value(*src);
                    let mut ds = Tensor::zeros(s.shape());
                    let w = g.cols();
                    for i in 0..g.rows() {
                        ds.row_mut(i)[*start..*start + w].copy_from_slice(g.row(i));
                    }
                    accumulate(grads, *src, ds);
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for p in parts {
                    let (n, w) = self.value(*p).dims2()?;
                    if self.needs(*p) {
                        let mut data = Vec::with_capacity(n * w);
                        for i in 0..n {
                            data.extend_from_slice(&g.row(i)[offset..offset + w]);
                        }
                        accumulate(grads, *p, Tensor::matrix(n, w, data)?);
                    }
                    offset += w;
                }
            }
            Op::Sum(a) => {
                if self.needs(*a) {
                    let s = g.data()[0];
                    accumulate(grads, *a, Tensor::filled(self.value(*a).shape(), s));
                }
            }
            Op::CrossEntropySum {
                logits,
                targets,
                probs,
            } => {
                if self.needs(*logits) {
                    let s = g.data()[0];
                    let mut d = probs.clone();
                    for (i, &t) in targets.iter().enumerate() {
                        d.row_mut(i)[t] -= 1.0;
                    }
                    d.scale_in_place(s);
                    accumulate(grads, *logits, d);
                }
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, t: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&t),
        slot @ None => *slot = Some(t),
    }
}

/// Gradients produced by [`Tape::backward`], indexed by leaf.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or an all-zero tensor shaped like `like` when `v` did
    /// not influence the loss.
    pub fn wrt(&self, v: Var, like: &Tensor) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(like.shape()))
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}
