//! Forward tensor primitives.
//!
//! Each kernel is written once, generic over the element type, and row-wise
//! kernels dispatch through [`crate::parallel`]. Accumulations always run in
//! a fixed index order so the parallel and sequential paths are bit-identical.

use num_traits::Float;

use crate::error::{Error, Result};
use crate::parallel::for_each_row;
use crate::tensor::{dispatch1, dispatch2, Data, Tensor};

/// Feed-forward nonlinearity kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Gelu,
}

impl std::str::FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "gelu" => Ok(Activation::Gelu),
            other => Err(Error::Config(format!("unknown activation kind `{other}`"))),
        }
    }
}

fn t<T: Float>(v: f64) -> T {
    T::from(v).unwrap()
}

fn require_2d(op: &'static str, a: &Tensor) -> Result<(usize, usize)> {
    if a.shape().len() != 2 {
        return Err(Error::InvalidDimension {
            op,
            detail: format!("expected 2-D tensor, got shape {:?}", a.shape()),
        });
    }
    Ok((a.shape()[0], a.shape()[1]))
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

pub(crate) fn matmul_kernel<T: Float + Send + Sync>(
    a: &[T],
    b: &[T],
    m: usize,
    k: usize,
    n: usize,
) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for_each_row(&mut out, n, |i, row| {
        let ar = &a[i * k..(i + 1) * k];
        for (kk, &av) in ar.iter().enumerate() {
            let br = &b[kk * n..(kk + 1) * n];
            for (j, o) in row.iter_mut().enumerate() {
                *o = *o + av * br[j];
            }
        }
    });
    out
}

/// out = a · bᵀ where `a` is m×k and `b` is n×k.
pub(crate) fn matmul_nt_kernel<T: Float + Send + Sync>(
    a: &[T],
    b: &[T],
    m: usize,
    k: usize,
    n: usize,
) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for_each_row(&mut out, n, |i, row| {
        let ar = &a[i * k..(i + 1) * k];
        for (j, o) in row.iter_mut().enumerate() {
            let br = &b[j * k..(j + 1) * k];
            let mut acc = T::zero();
            for kk in 0..k {
                acc = acc + ar[kk] * br[kk];
            }
            *o = acc;
        }
    });
    out
}

/// out = aᵀ · b where `a` is m×k and `b` is m×n; result is k×n.
pub(crate) fn matmul_tn_kernel<T: Float + Send + Sync>(
    a: &[T],
    b: &[T],
    m: usize,
    k: usize,
    n: usize,
) -> Vec<T> {
    let mut out = vec![T::zero(); k * n];
    for_each_row(&mut out, n, |i, row| {
        for tt in 0..m {
            let av = a[tt * k + i];
            let br = &b[tt * n..(tt + 1) * n];
            for (j, o) in row.iter_mut().enumerate() {
                *o = *o + av * br[j];
            }
        }
    });
    out
}

/// Standard matrix product of two 2-D tensors.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, ka) = require_2d("matmul", a)?;
    let (kb, n) = require_2d("matmul", b)?;
    if ka != kb {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let data = dispatch2!("matmul", a.data(), b.data(), |x, y| matmul_kernel(
        x, y, m, ka, n
    ));
    Tensor::new(vec![m, n], data)
}

pub(crate) fn matmul_nt(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, ka) = require_2d("matmul_nt", a)?;
    let (n, kb) = require_2d("matmul_nt", b)?;
    if ka != kb {
        return Err(Error::ShapeMismatch {
            op: "matmul_nt",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let data = dispatch2!("matmul_nt", a.data(), b.data(), |x, y| matmul_nt_kernel(
        x, y, m, ka, n
    ));
    Tensor::new(vec![m, n], data)
}

pub(crate) fn matmul_tn(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ma, k) = require_2d("matmul_tn", a)?;
    let (mb, n) = require_2d("matmul_tn", b)?;
    if ma != mb {
        return Err(Error::ShapeMismatch {
            op: "matmul_tn",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let data = dispatch2!("matmul_tn", a.data(), b.data(), |x, y| matmul_tn_kernel(
        x, y, ma, k, n
    ));
    Tensor::new(vec![k, n], data)
}

// ---------------------------------------------------------------------------
// softmax
// ---------------------------------------------------------------------------

pub(crate) fn softmax_rows_kernel<T: Float + Send + Sync>(a: &[T], rows: usize, n: usize) -> Vec<T> {
    let mut out = a.to_vec();
    let _ = rows;
    for_each_row(&mut out, n, |_, row| softmax_row_inplace(row));
    out
}

pub(crate) fn softmax_row_inplace<T: Float>(row: &mut [T]) {
    let mut max = row[0];
    for &v in row.iter() {
        if v > max {
            max = v;
        }
    }
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    for v in row.iter_mut() {
        *v = *v / sum;
    }
}

/// Row-wise softmax with max-subtraction for stability.
pub fn softmax_rows(a: &Tensor) -> Result<Tensor> {
    let (rows, n) = require_2d("softmax_rows", a)?;
    if !a.is_all_finite() {
        return Err(Error::NonFinite("softmax_rows"));
    }
    let data = dispatch1!(a.data(), |x| softmax_rows_kernel(x, rows, n));
    Tensor::new(a.shape().to_vec(), data)
}

// ---------------------------------------------------------------------------
// layer norm
// ---------------------------------------------------------------------------

pub(crate) fn layer_norm_kernel<T: Float + Send + Sync>(
    a: &[T],
    gain: &[T],
    bias: &[T],
    d: usize,
    eps: T,
) -> Vec<T> {
    let mut out = a.to_vec();
    for_each_row(&mut out, d, |_, row| {
        let (mean, inv) = row_norm_stats(row, eps);
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - mean) * inv * gain[j] + bias[j];
        }
    });
    out
}

/// Row mean and 1/sqrt(population variance + eps).
pub(crate) fn row_norm_stats<T: Float>(row: &[T], eps: T) -> (T, T) {
    let n = t::<T>(row.len() as f64);
    let mut mean = T::zero();
    for &v in row {
        mean = mean + v;
    }
    mean = mean / n;
    let mut var = T::zero();
    for &v in row {
        let d = v - mean;
        var = var + d * d;
    }
    var = var / n;
    (mean, (var + eps).sqrt().recip())
}

/// Row-wise normalization to zero mean / unit variance, then affine.
pub fn layer_norm(a: &Tensor, gain: &Tensor, bias: &Tensor, eps: f64) -> Result<Tensor> {
    let (_, d) = require_2d("layer_norm", a)?;
    if eps <= 0.0 {
        return Err(Error::InvalidDimension {
            op: "layer_norm",
            detail: format!("eps must be positive, got {eps}"),
        });
    }
    if gain.numel() != d || bias.numel() != d {
        return Err(Error::ShapeMismatch {
            op: "layer_norm",
            lhs: a.shape().to_vec(),
            rhs: gain.shape().to_vec(),
        });
    }
    let data = match (a.data(), gain.data(), bias.data()) {
        (Data::F32(x), Data::F32(g), Data::F32(b)) => {
            Data::F32(layer_norm_kernel(x, g, b, d, eps as f32))
        }
        (Data::F64(x), Data::F64(g), Data::F64(b)) => {
            Data::F64(layer_norm_kernel(x, g, b, d, eps))
        }
        _ => return Err(Error::MixedPrecision("layer_norm")),
    };
    Tensor::new(a.shape().to_vec(), data)
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

pub(crate) fn relu_scalar<T: Float>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

pub(crate) fn relu_grad_scalar<T: Float>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

/// GELU in its tanh form; the gradient below differentiates the same form.
pub(crate) fn gelu_scalar<T: Float>(x: T) -> T {
    let c = t::<T>(0.7978845608028654); // sqrt(2/pi)
    let a = t::<T>(0.044715);
    let half = t::<T>(0.5);
    let u = c * (x + a * x * x * x);
    half * x * (T::one() + u.tanh())
}

pub(crate) fn gelu_grad_scalar<T: Float>(x: T) -> T {
    let c = t::<T>(0.7978845608028654);
    let a = t::<T>(0.044715);
    let half = t::<T>(0.5);
    let three = t::<T>(3.0);
    let u = c * (x + a * x * x * x);
    let th = u.tanh();
    let du = c * (T::one() + three * a * x * x);
    half * (T::one() + th) + half * x * (T::one() - th * th) * du
}

/// Elementwise nonlinearity.
pub fn activation(a: &Tensor, kind: Activation) -> Result<Tensor> {
    let data = dispatch1!(a.data(), |x| {
        match kind {
            Activation::Relu => x.iter().map(|&v| relu_scalar(v)).collect(),
            Activation::Gelu => x.iter().map(|&v| gelu_scalar(v)).collect(),
        }
    });
    Tensor::new(a.shape().to_vec(), data)
}

// ---------------------------------------------------------------------------
// fused scaled dot-product attention
// ---------------------------------------------------------------------------

pub(crate) fn attention_kernel<T: Float + Send + Sync>(
    q: &[T],
    k: &[T],
    v: &[T],
    n: usize,
    dh: usize,
    scale: T,
) -> Vec<T> {
    let mut out = vec![T::zero(); n * dh];
    for_each_row(&mut out, dh, |i, row| {
        let qr = &q[i * dh..(i + 1) * dh];
        let mut w = vec![T::zero(); n];
        for (j, wj) in w.iter_mut().enumerate() {
            let kr = &k[j * dh..(j + 1) * dh];
            let mut dot = T::zero();
            for d in 0..dh {
                dot = dot + qr[d] * kr[d];
            }
            *wj = dot * scale;
        }
        softmax_row_inplace(&mut w);
        for (j, &wj) in w.iter().enumerate() {
            let vr = &v[j * dh..(j + 1) * dh];
            for (d, o) in row.iter_mut().enumerate() {
                *o = *o + wj * vr[d];
            }
        }
    });
    out
}

/// Gradients of the fused attention op. Recomputes the softmax weights row
/// by row instead of storing the n×n matrix.
pub(crate) fn attention_backward_kernel<T: Float + Send + Sync>(
    q: &[T],
    k: &[T],
    v: &[T],
    dy: &[T],
    n: usize,
    dh: usize,
    scale: T,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut dq = vec![T::zero(); n * dh];
    let mut dk = vec![T::zero(); n * dh];
    let mut dv = vec![T::zero(); n * dh];
    let mut w = vec![T::zero(); n];
    let mut ds = vec![T::zero(); n];
    for i in 0..n {
        let qr = &q[i * dh..(i + 1) * dh];
        let dyr = &dy[i * dh..(i + 1) * dh];
        for (j, wj) in w.iter_mut().enumerate() {
            let kr = &k[j * dh..(j + 1) * dh];
            let mut dot = T::zero();
            for d in 0..dh {
                dot = dot + qr[d] * kr[d];
            }
            *wj = dot * scale;
        }
        softmax_row_inplace(&mut w);
        // dw_j = dy_i · v_j, then softmax backward gives ds.
        let mut inner = T::zero();
        for j in 0..n {
            let vr = &v[j * dh..(j + 1) * dh];
            let mut dot = T::zero();
            for d in 0..dh {
                dot = dot + dyr[d] * vr[d];
            }
            ds[j] = dot;
            inner = inner + dot * w[j];
        }
        for j in 0..n {
            ds[j] = w[j] * (ds[j] - inner);
        }
        let dqr = &mut dq[i * dh..(i + 1) * dh];
        for j in 0..n {
            let kr = &k[j * dh..(j + 1) * dh];
            let dkr = &mut dk[j * dh..(j + 1) * dh];
            let dvr = &mut dv[j * dh..(j + 1) * dh];
            let s = ds[j] * scale;
            for d in 0..dh {
                dqr[d] = dqr[d] + s * kr[d];
                dkr[d] = dkr[d] + s * qr[d];
                dvr[d] = dvr[d] + w[j] * dyr[d];
            }
        }
    }
    (dq, dk, dv)
}

/// Full bidirectional scaled dot-product attention over one head:
/// softmax(QKᵀ·scale)·V with scale = 1/√d_h.
pub fn attention(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<Tensor> {
    let (n, dh) = require_2d("attention", q)?;
    if k.shape() != q.shape() || v.shape() != q.shape() {
        return Err(Error::ShapeMismatch {
            op: "attention",
            lhs: q.shape().to_vec(),
            rhs: if k.shape() != q.shape() {
                k.shape().to_vec()
            } else {
                v.shape().to_vec()
            },
        });
    }
    let scale = 1.0 / (dh as f64).sqrt();
    let data = match (q.data(), k.data(), v.data()) {
        (Data::F32(qq), Data::F32(kk), Data::F32(vv)) => {
            Data::F32(attention_kernel(qq, kk, vv, n, dh, scale as f32))
        }
        (Data::F64(qq), Data::F64(kk), Data::F64(vv)) => {
            Data::F64(attention_kernel(qq, kk, vv, n, dh, scale))
        }
        _ => return Err(Error::MixedPrecision("attention")),
    };
    Tensor::new(vec![n, dh], data)
}

// ---------------------------------------------------------------------------
// elementwise and structural helpers
// ---------------------------------------------------------------------------

fn require_same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    require_same_shape("add", a, b)?;
    let data = dispatch2!("add", a.data(), b.data(), |x, y| x
        .iter()
        .zip(y)
        .map(|(&p, &q)| p + q)
        .collect());
    Tensor::new(a.shape().to_vec(), data)
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    require_same_shape("sub", a, b)?;
    let data = dispatch2!("sub", a.data(), b.data(), |x, y| x
        .iter()
        .zip(y)
        .map(|(&p, &q)| p - q)
        .collect());
    Tensor::new(a.shape().to_vec(), data)
}

/// Hadamard (elementwise) product.
pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    require_same_shape("mul", a, b)?;
    let data = dispatch2!("mul", a.data(), b.data(), |x, y| x
        .iter()
        .zip(y)
        .map(|(&p, &q)| p * q)
        .collect());
    Tensor::new(a.shape().to_vec(), data)
}

pub fn scale(a: &Tensor, s: f64) -> Result<Tensor> {
    let data = dispatch1!(a.data(), |x| {
        let sv = scalar_like(x, s);
        x.iter().map(|&v| v * sv).collect()
    });
    Tensor::new(a.shape().to_vec(), data)
}

/// Add a length-d bias vector to every row of an r×d tensor.
pub fn add_row_broadcast(a: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (_, d) = require_2d("add_row_broadcast", a)?;
    if bias.numel() != d {
        return Err(Error::ShapeMismatch {
            op: "add_row_broadcast",
            lhs: a.shape().to_vec(),
            rhs: bias.shape().to_vec(),
        });
    }
    let data = dispatch2!("add_row_broadcast", a.data(), bias.data(), |x, y| {
        let mut out = x.to_vec();
        for row in out.chunks_mut(d) {
            for (v, &b) in row.iter_mut().zip(y.iter()) {
                *v = *v + b;
            }
        }
        out
    });
    Tensor::new(a.shape().to_vec(), data)
}

/// Sum of all elements as a 1-element tensor.
pub fn sum(a: &Tensor) -> Result<Tensor> {
    let data = dispatch1!(a.data(), |x| {
        let mut acc = T_zero_like(x);
        for &v in x {
            acc = acc + v;
        }
        vec![acc]
    });
    Tensor::new(vec![1], data)
}

// Helpers to name values of the iterated element type inside macro bodies.
#[allow(non_snake_case)]
fn T_zero_like<T: Float>(_: &[T]) -> T {
    T::zero()
}

fn scalar_like<T: Float>(_: &[T], v: f64) -> T {
    T::from(v).unwrap()
}

/// Column means over all rows: r×d → 1×d.
pub fn mean_rows(a: &Tensor) -> Result<Tensor> {
    let (r, d) = require_2d("mean_rows", a)?;
    let data = dispatch1!(a.data(), |x| {
        let inv = scalar_like(x, 1.0 / r as f64);
        let mut out = vec![T_zero_like(x); d];
        for row in x.chunks(d) {
            for (o, &v) in out.iter_mut().zip(row) {
                *o = *o + v;
            }
        }
        for o in out.iter_mut() {
            *o = *o * inv;
        }
        out
    });
    Tensor::new(vec![1, d], data)
}

/// Rows r0..r1 of a 2-D tensor.
pub fn slice_rows(a: &Tensor, r0: usize, r1: usize) -> Result<Tensor> {
    let (r, d) = require_2d("slice_rows", a)?;
    if r0 >= r1 || r1 > r {
        return Err(Error::IndexOutOfRange {
            op: "slice_rows",
            index: r1,
            bound: r,
        });
    }
    let data = dispatch1!(a.data(), |x| x[r0 * d..r1 * d].to_vec());
    Tensor::new(vec![r1 - r0, d], data)
}

/// Columns c0..c1 of a 2-D tensor.
pub fn slice_cols(a: &Tensor, c0: usize, c1: usize) -> Result<Tensor> {
    let (r, d) = require_2d("slice_cols", a)?;
    if c0 >= c1 || c1 > d {
        return Err(Error::IndexOutOfRange {
            op: "slice_cols",
            index: c1,
            bound: d,
        });
    }
    let w = c1 - c0;
    let data = dispatch1!(a.data(), |x| {
        let mut out = Vec::with_capacity(r * w);
        for row in x.chunks(d) {
            out.extend_from_slice(&row[c0..c1]);
        }
        out
    });
    Tensor::new(vec![r, w], data)
}

/// Stack 2-D tensors with equal widths on top of each other.
pub fn concat_rows(parts: &[&Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(Error::InvalidDimension {
            op: "concat_rows",
            detail: "no inputs".into(),
        });
    }
    let (_, d) = require_2d("concat_rows", parts[0])?;
    let mut rows = 0;
    for p in parts {
        let (r, pd) = require_2d("concat_rows", p)?;
        if pd != d {
            return Err(Error::ShapeMismatch {
                op: "concat_rows",
                lhs: parts[0].shape().to_vec(),
                rhs: p.shape().to_vec(),
            });
        }
        rows += r;
    }
    let mut flat = Vec::with_capacity(rows * d);
    for p in parts {
        flat.extend(p.to_f64_vec());
    }
    Tensor::from_f64(&[rows, d], &flat, parts[0].dtype())
}

/// Join 2-D tensors with equal row counts side by side.
pub fn concat_cols(parts: &[&Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(Error::InvalidDimension {
            op: "concat_cols",
            detail: "no inputs".into(),
        });
    }
    let (r, _) = require_2d("concat_cols", parts[0])?;
    let mut width = 0;
    for p in parts {
        let (pr, pd) = require_2d("concat_cols", p)?;
        if pr != r {
            return Err(Error::ShapeMismatch {
                op: "concat_cols",
                lhs: parts[0].shape().to_vec(),
                rhs: p.shape().to_vec(),
            });
        }
        width += pd;
    }
    let mut flat = Vec::with_capacity(r * width);
    for i in 0..r {
        for p in parts {
            let pd = p.shape()[1];
            for j in 0..pd {
                flat.push(p.get(i * pd + j));
            }
        }
    }
    Tensor::from_f64(&[r, width], &flat, parts[0].dtype())
}

// ---------------------------------------------------------------------------
// backward-pass helpers (crate-internal, used by the computation graph)
// ---------------------------------------------------------------------------

/// Column sums over all rows: r×d → [d].
pub(crate) fn col_sums(a: &Tensor) -> Result<Tensor> {
    let (_, d) = require_2d("col_sums", a)?;
    let data = dispatch1!(a.data(), |x| {
        let mut out = vec![T_zero_like(x); d];
        for row in x.chunks(d) {
            for (o, &v) in out.iter_mut().zip(row) {
                *o = *o + v;
            }
        }
        out
    });
    Tensor::new(vec![d], data)
}

/// Derivative of the chosen activation evaluated at the op's input.
pub(crate) fn activation_grad(x: &Tensor, kind: Activation) -> Result<Tensor> {
    let data = dispatch1!(x.data(), |v| {
        match kind {
            Activation::Relu => v.iter().map(|&e| relu_grad_scalar(e)).collect(),
            Activation::Gelu => v.iter().map(|&e| gelu_grad_scalar(e)).collect(),
        }
    });
    Tensor::new(x.shape().to_vec(), data)
}

fn softmax_backward_kernel<T: Float + Send + Sync>(s: &[T], gy: &[T], d: usize) -> Vec<T> {
    let mut out = vec![T::zero(); s.len()];
    for_each_row(&mut out, d, |i, row| {
        let sr = &s[i * d..(i + 1) * d];
        let gr = &gy[i * d..(i + 1) * d];
        let mut inner = T::zero();
        for j in 0..d {
            inner = inner + gr[j] * sr[j];
        }
        for j in 0..d {
            row[j] = sr[j] * (gr[j] - inner);
        }
    });
    out
}

/// Gradient through row-wise softmax, given the softmax OUTPUT `s`.
pub(crate) fn softmax_backward(s: &Tensor, gy: &Tensor) -> Result<Tensor> {
    let (_, d) = require_2d("softmax_backward", s)?;
    let data = dispatch2!("softmax_backward", s.data(), gy.data(), |x, y| {
        softmax_backward_kernel(x, y, d)
    });
    Tensor::new(s.shape().to_vec(), data)
}

#[allow(clippy::type_complexity)]
fn layer_norm_backward_kernel<T: Float + Send + Sync>(
    x: &[T],
    gain: &[T],
    gy: &[T],
    d: usize,
    eps: T,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let rows = x.len() / d;
    let mut gx = vec![T::zero(); x.len()];
    let mut ggain = vec![T::zero(); d];
    let mut gbias = vec![T::zero(); d];
    let inv_d = t::<T>(1.0 / d as f64);
    for i in 0..rows {
        let xr = &x[i * d..(i + 1) * d];
        let gr = &gy[i * d..(i + 1) * d];
        let (mean, inv) = row_norm_stats(xr, eps);
        // dxhat = gy * gain; gx = inv * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
        let mut m1 = T::zero();
        let mut m2 = T::zero();
        for j in 0..d {
            let xhat = (xr[j] - mean) * inv;
            let dxhat = gr[j] * gain[j];
            m1 = m1 + dxhat;
            m2 = m2 + dxhat * xhat;
            ggain[j] = ggain[j] + gr[j] * xhat;
            gbias[j] = gbias[j] + gr[j];
        }
        m1 = m1 * inv_d;
        m2 = m2 * inv_d;
        let gxr = &mut gx[i * d..(i + 1) * d];
        for j in 0..d {
            let xhat = (xr[j] - mean) * inv;
            let dxhat = gr[j] * gain[j];
            gxr[j] = inv * (dxhat - m1 - xhat * m2);
        }
    }
    (gx, ggain, gbias)
}

/// Gradients through layer_norm w.r.t. input, gain, and bias.
pub(crate) fn layer_norm_backward(
    x: &Tensor,
    gain: &Tensor,
    eps: f64,
    gy: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (r, d) = require_2d("layer_norm_backward", x)?;
    let (gx, gg, gb) = match (x.data(), gain.data(), gy.data()) {
        (Data::F32(xx), Data::F32(gg), Data::F32(yy)) => {
            let (a, b, c) = layer_norm_backward_kernel(xx, gg, yy, d, eps as f32);
            (Data::F32(a), Data::F32(b), Data::F32(c))
        }
        (Data::F64(xx), Data::F64(gg), Data::F64(yy)) => {
            let (a, b, c) = layer_norm_backward_kernel(xx, gg, yy, d, eps);
            (Data::F64(a), Data::F64(b), Data::F64(c))
        }
        _ => return Err(Error::MixedPrecision("layer_norm_backward")),
    };
    Ok((
        Tensor::new(vec![r, d], gx)?,
        Tensor::new(vec![d], gg)?,
        Tensor::new(vec![d], gb)?,
    ))
}

/// Gradients through fused attention w.r.t. Q, K, V.
pub(crate) fn attention_backward(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    gy: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (n, dh) = require_2d("attention_backward", q)?;
    let scale = 1.0 / (dh as f64).sqrt();
    let (gq, gk, gv) = match (q.data(), k.data(), v.data(), gy.data()) {
        (Data::F32(qq), Data::F32(kk), Data::F32(vv), Data::F32(yy)) => {
            let (a, b, c) = attention_backward_kernel(qq, kk, vv, yy, n, dh, scale as f32);
            (Data::F32(a), Data::F32(b), Data::F32(c))
        }
        (Data::F64(qq), Data::F64(kk), Data::F64(vv), Data::F64(yy)) => {
            let (a, b, c) = attention_backward_kernel(qq, kk, vv, yy, n, dh, scale);
            (Data::F64(a), Data::F64(b), Data::F64(c))
        }
        _ => return Err(Error::MixedPrecision("attention_backward")),
    };
    Ok((
        Tensor::new(vec![n, dh], gq)?,
        Tensor::new(vec![n, dh], gk)?,
        Tensor::new(vec![n, dh], gv)?,
    ))
}

/// Place `g` (rows r0..r0+g.rows) inside an otherwise-zero tensor with
/// `rows_total` rows.
pub(crate) fn embed_rows(g: &Tensor, rows_total: usize, r0: usize) -> Result<Tensor> {
    let (r, d) = require_2d("embed_rows", g)?;
    let data = dispatch1!(g.data(), |x| {
        let mut out = vec![T_zero_like(x); rows_total * d];
        out[r0 * d..(r0 + r) * d].copy_from_slice(x);
        out
    });
    Tensor::new(vec![rows_total, d], data)
}

/// Place `g` (cols c0..c0+g.cols) inside an otherwise-zero tensor with
/// `cols_total` columns.
pub(crate) fn embed_cols(g: &Tensor, cols_total: usize, c0: usize) -> Result<Tensor> {
    let (r, w) = require_2d("embed_cols", g)?;
    let data = dispatch1!(g.data(), |x| {
        let mut out = vec![T_zero_like(x); r * cols_total];
        for (i, row) in x.chunks(w).enumerate() {
            out[i * cols_total + c0..i * cols_total + c0 + w].copy_from_slice(row);
        }
        out
    });
    Tensor::new(vec![r, cols_total], data)
}

/// Tile a 1×d row `r` times.
pub(crate) fn repeat_rows(row: &Tensor, r: usize) -> Result<Tensor> {
    let (_, d) = require_2d("repeat_rows", row)?;
    let data = dispatch1!(row.data(), |x| {
        let mut out = Vec::with_capacity(r * d);
        for _ in 0..r {
            out.extend_from_slice(x);
        }
        out
    });
    Tensor::new(vec![r, d], data)
}

/// Copy of `g` with the listed rows zeroed.
pub(crate) fn zero_rows(g: &Tensor, indices: &[usize]) -> Result<Tensor> {
    let (_, d) = require_2d("zero_rows", g)?;
    let data = dispatch1!(g.data(), |x| {
        let mut out = x.to_vec();
        for &i in indices {
            for v in &mut out[i * d..(i + 1) * d] {
                *v = T_zero_like(x);
            }
        }
        out
    });
    Tensor::new(g.shape().to_vec(), data)
}

/// Sum of the listed rows, in index order: → [d].
pub(crate) fn sum_rows_subset(g: &Tensor, indices: &[usize]) -> Result<Tensor> {
    let (_, d) = require_2d("sum_rows_subset", g)?;
    let data = dispatch1!(g.data(), |x| {
        let mut out = vec![T_zero_like(x); d];
        for &i in indices {
            for (o, &v) in out.iter_mut().zip(&x[i * d..(i + 1) * d]) {
                *o = *o + v;
            }
        }
        out
    });
    Tensor::new(vec![d], data)
}
