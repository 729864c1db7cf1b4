//! Dense row-major tensors with selectable element precision.
//!
//! Training and inference default to 32-bit storage; verification suites
//! (gradient checks, reproducibility tests) switch to 64-bit. A tensor
//! optionally carries a same-shape gradient buffer filled in by
//! [`crate::graph::Graph::backward`].

use crate::error::{Error, Result};

/// Element precision of a tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    pub fn size_bytes(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

impl std::fmt::Display for DType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DType::F32 => write!(f, "f32"),
            DType::F64 => write!(f, "f64"),
        }
    }
}

/// Typed storage behind a tensor.
#[derive(Debug, Clone, PartialEq)]
pub enum Data {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl Data {
    pub fn zeros(n: usize, dtype: DType) -> Self {
        match dtype {
            DType::F32 => Data::F32(vec![0.0; n]),
            DType::F64 => Data::F64(vec![0.0; n]),
        }
    }

    pub fn from_f64(values: &[f64], dtype: DType) -> Self {
        match dtype {
            DType::F32 => Data::F32(values.iter().map(|&v| v as f32).collect()),
            DType::F64 => Data::F64(values.to_vec()),
        }
    }

    pub fn dtype(&self) -> DType {
        match self {
            Data::F32(_) => DType::F32,
            Data::F64(_) => DType::F64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Data::F32(v) => v.len(),
            Data::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> f64 {
        match self {
            Data::F32(v) => v[i] as f64,
            Data::F64(v) => v[i],
        }
    }

    pub fn set(&mut self, i: usize, value: f64) {
        match self {
            Data::F32(v) => v[i] = value as f32,
            Data::F64(v) => v[i] = value,
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        match self {
            Data::F32(v) => v.iter().map(|&x| x as f64).collect(),
            Data::F64(v) => v.clone(),
        }
    }

    pub fn is_all_finite(&self) -> bool {
        match self {
            Data::F32(v) => v.iter().all(|x| x.is_finite()),
            Data::F64(v) => v.iter().all(|x| x.is_finite()),
        }
    }

    /// Exact bit equality, used by determinism and round-trip tests.
    pub fn bits_eq(&self, other: &Data) -> bool {
        match (self, other) {
            (Data::F32(a), Data::F32(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (Data::F64(a), Data::F64(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            _ => false,
        }
    }
}

/// Dispatch over one typed buffer, producing a buffer of the same dtype.
macro_rules! dispatch1 {
    ($d:expr, |$s:ident| $body:expr) => {
        match $d {
            $crate::tensor::Data::F32($s) => $crate::tensor::Data::F32($body),
            $crate::tensor::Data::F64($s) => $crate::tensor::Data::F64($body),
        }
    };
}

/// Dispatch over two typed buffers of equal dtype.
macro_rules! dispatch2 {
    ($op:expr, $a:expr, $b:expr, |$x:ident, $y:ident| $body:expr) => {
        match ($a, $b) {
            ($crate::tensor::Data::F32($x), $crate::tensor::Data::F32($y)) => {
                $crate::tensor::Data::F32($body)
            }
            ($crate::tensor::Data::F64($x), $crate::tensor::Data::F64($y)) => {
                $crate::tensor::Data::F64($body)
            }
            _ => return Err($crate::error::Error::MixedPrecision($op)),
        }
    };
}

pub(crate) use {dispatch1, dispatch2};

/// Dense row-major numeric array with shape and an optional gradient slot.
#[derive(Debug, Clone)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Data,
    grad: Option<Data>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Data) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidDimension {
                op: "tensor",
                detail: format!("zero-sized dimension in {shape:?}"),
            });
        }
        if numel != data.len() {
            return Err(Error::InvalidDimension {
                op: "tensor",
                detail: format!("shape {shape:?} wants {numel} values, got {}", data.len()),
            });
        }
        Ok(Tensor {
            shape,
            data,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize], dtype: DType) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: Data::zeros(numel, dtype),
            grad: None,
        }
    }

    pub fn full(shape: &[usize], value: f64, dtype: DType) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: Data::from_f64(&vec![value; numel], dtype),
            grad: None,
        }
    }

    pub fn from_f64(shape: &[usize], values: &[f64], dtype: DType) -> Result<Self> {
        Tensor::new(shape.to_vec(), Data::from_f64(values, dtype))
    }

    /// 2-D tensor from row slices; all rows must share a length.
    pub fn from_rows(rows: &[Vec<f64>], dtype: DType) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidDimension {
                op: "from_rows",
                detail: "no rows".into(),
            });
        }
        let width = rows[0].len();
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidDimension {
                op: "from_rows",
                detail: "ragged rows".into(),
            });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Tensor::from_f64(&[rows.len(), width], &flat, dtype)
    }

    pub fn identity(n: usize, dtype: DType) -> Self {
        let mut t = Tensor::zeros(&[n, n], dtype);
        for i in 0..n {
            t.data.set(i * n + i, 1.0);
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Row count of a 2-D tensor (or 1 for rank-1).
    pub fn rows(&self) -> usize {
        if self.shape.len() >= 2 {
            self.shape[0]
        } else {
            1
        }
    }

    /// Column count of a 2-D tensor (or the length for rank-1).
    pub fn cols(&self) -> usize {
        match self.shape.len() {
            0 => 0,
            1 => self.shape[0],
            _ => self.shape[1],
        }
    }

    pub fn data(&self) -> &Data {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Data {
        &mut self.data
    }

    pub fn get(&self, i: usize) -> f64 {
        self.data.get(i)
    }

    pub fn set(&mut self, i: usize, value: f64) {
        self.data.set(i, value);
    }

    /// Element (r, c) of a 2-D tensor.
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data.get(r * self.cols() + c)
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.to_f64_vec()
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.is_all_finite()
    }

    pub fn cast(&self, dtype: DType) -> Tensor {
        if dtype == self.dtype() {
            return self.clone();
        }
        Tensor {
            shape: self.shape.clone(),
            data: Data::from_f64(&self.data.to_f64_vec(), dtype),
            grad: None,
        }
    }

    /// Same buffer, new shape; element count must match.
    pub fn reshaped(&self, shape: &[usize]) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != self.numel() {
            return Err(Error::InvalidDimension {
                op: "reshape",
                detail: format!("{:?} -> {shape:?} changes element count", self.shape),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
            grad: None,
        })
    }

    pub fn grad(&self) -> Option<&Data> {
        self.grad.as_ref()
    }

    pub fn grad_tensor(&self) -> Option<Tensor> {
        self.grad.as_ref().map(|g| Tensor {
            shape: self.shape.clone(),
            data: g.clone(),
            grad: None,
        })
    }

    pub(crate) fn set_grad(&mut self, grad: Data) {
        debug_assert_eq!(grad.len(), self.numel());
        self.grad = Some(grad);
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    pub fn bits_eq(&self, other: &Tensor) -> bool {
        self.shape == other.shape && self.data.bits_eq(&other.data)
    }

    /// Max absolute elementwise difference; infinity on shape mismatch.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        if self.shape != other.shape {
            return f64::INFINITY;
        }
        (0..self.numel())
            .map(|i| (self.get(i) - other.get(i)).abs())
            .fold(0.0, f64::max)
    }
}
