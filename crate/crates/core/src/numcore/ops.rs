//! Forward kernels shared by the tape and by direct (tape-free) callers.

use super::Tensor;
use crate::error::{Error, Result};

/// Epsilon added to the variance inside [`layer_norm`].
pub const LAYER_NORM_EPS: f64 = 1e-6;

/// Standard matrix product `a · b`.
///
/// Zero entries of `a` are skipped, so attention rows whose masked weights are
/// exactly zero never read the corresponding value rows.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, k) = a.dims2()?;
    let (k2, m) = b.dims2()?;
    if k != k2 {
        return Err(Error::shape("matmul", a.shape(), b.shape()));
    }
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let out_row = &mut out[i * m..(i + 1) * m];
        for (p, &av) in ad[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in out_row.iter_mut().zip(&bd[p * m..(p + 1) * m]) {
                *o += av * bv;
            }
        }
    }
    Tensor::matrix(n, m, out)
}

/// `a · bᵀ`, computed as row-by-row dot products.
pub fn matmul_t(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, k) = a.dims2()?;
    let (m, k2) = b.dims2()?;
    if k != k2 {
        return Err(Error::shape("matmul_t", a.shape(), b.shape()));
    }
    let mut out = Vec::with_capacity(n * m);
    for i in 0..n {
        let ar = a.row(i);
        for j in 0..m {
            out.push(dot(ar, b.row(j)));
        }
    }
    Tensor::matrix(n, m, out)
}

/// `aᵀ · b`.
pub fn matmul_tn(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (r, n) = a.dims2()?;
    let (r2, m) = b.dims2()?;
    if r != r2 {
        return Err(Error::shape("matmul_tn", a.shape(), b.shape()));
    }
    let mut out = vec![0.0; n * m];
    for row in 0..r {
        let br = b.row(row);
        for (i, &av) in a.row(row).iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in out[i * m..(i + 1) * m].iter_mut().zip(br) {
                *o += av * bv;
            }
        }
    }
    Tensor::matrix(n, m, out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-wise softmax of `scores + mask`.
///
/// Entries whose mask value is `-inf` come out as exactly `0.0`. A row with no
/// finite mask entry cannot be normalized and is rejected.
pub fn masked_softmax_rows(scores: &Tensor, mask: &Tensor) -> Result<Tensor> {
    if scores.shape() != mask.shape() {
        return Err(Error::shape("masked_softmax_rows", scores.shape(), mask.shape()));
    }
    let (n, m) = scores.dims2()?;
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let s = scores.row(i);
        let mk = mask.row(i);
        let row = &mut out[i * m..(i + 1) * m];
        let mut max = f64::NEG_INFINITY;
        for (o, (&sv, &mv)) in row.iter_mut().zip(s.iter().zip(mk)) {
            *o = sv + mv;
            if *o > max {
                max = *o;
            }
        }
        if max == f64::NEG_INFINITY {
            return Err(Error::contract(format!(
                "softmax row {i} is fully masked"
            )));
        }
        let mut total = 0.0;
        for o in row.iter_mut() {
            if *o == f64::NEG_INFINITY {
                *o = 0.0;
            } else {
                *o = (*o - max).exp();
                total += *o;
            }
        }
        for o in row.iter_mut() {
            *o /= total;
        }
    }
    Tensor::matrix(n, m, out)
}

/// Unmasked row-wise softmax.
pub fn softmax_rows(x: &Tensor) -> Result<Tensor> {
    let (n, m) = x.dims2()?;
    let mut out = x.data().to_vec();
    for row in out.chunks_mut(m.max(1)).take(n) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Tensor::matrix(n, m, out)
}

/// Per-row normalization to zero mean and unit variance, followed by an
/// elementwise affine map.
pub fn layer_norm(x: &Tensor, gain: &Tensor, bias: &Tensor) -> Result<Tensor> {
    layer_norm_parts(x, gain, bias).map(|(y, _, _)| y)
}

/// Returns `(output, normalized input, 1/std per row)`.
pub(crate) fn layer_norm_parts(
    x: &Tensor,
    gain: &Tensor,
    bias: &Tensor,
) -> Result<(Tensor, Tensor, Vec<f64>)> {
    let (n, d) = x.dims2()?;
    if gain.len() != d || bias.len() != d {
        return Err(Error::shape("layer_norm", x.shape(), gain.shape()));
    }
    let mut normed = vec![0.0; n * d];
    let mut out = vec![0.0; n * d];
    let mut inv_std = Vec::with_capacity(n);
    for i in 0..n {
        let row = x.row(i);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        inv_std.push(is);
        for j in 0..d {
            let h = (row[j] - mean) * is;
            normed[i * d + j] = h;
            out[i * d + j] = h * gain.data()[j] + bias.data()[j];
        }
    }
    Ok((
        Tensor::matrix(n, d, out)?,
        Tensor::matrix(n, d, normed)?,
        inv_std,
    ))
}

/// Adds a bias vector to every row of `a`.
pub fn add_row(a: &Tensor, row: &Tensor) -> Result<Tensor> {
    let (n, m) = a.dims2()?;
    if row.len() != m {
        return Err(Error::shape("add_row", a.shape(), row.shape()));
    }
    let mut out = a.data().to_vec();
    for r in out.chunks_mut(m.max(1)).take(n) {
        for (o, b) in r.iter_mut().zip(row.data()) {
            *o += b;
        }
    }
    Tensor::new(a.shape().to_vec(), out)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::shape("add", a.shape(), b.shape()));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn relu(a: &Tensor) -> Tensor {
    a.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Index of the largest entry in each row; ties go to the lowest index.
pub fn argmax_rows(x: &Tensor) -> Vec<usize> {
    (0..x.rows())
        .map(|i| {
            let mut best = 0;
            let row = x.row(i);
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
