//! Dense tensors and a reverse-mode tape.
//!
//! [`Tensor`] is a plain row-major array. Differentiable computations are
//! recorded on a [`Tape`] through [`Var`] handles; the tape lives for one
//! forward/backward pass and is dropped afterwards.

pub(crate) mod kernels;
mod tape;

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use tape::{Gradients, Tape, Var};

/// Default epsilon for layer normalization.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Floating point element type. Implemented for `f32` (training default)
/// and `f64` (verification).
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Default + Debug + Display + Send + Sync + 'static
{
    const PRECISION: Precision;

    /// Converts an `f64` literal into this precision.
    fn lit(v: f64) -> Self;
}

impl Scalar for f32 {
    const PRECISION: Precision = Precision::F32;

    #[inline]
    fn lit(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    const PRECISION: Precision = Precision::F64;

    #[inline]
    fn lit(v: f64) -> Self {
        v
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn new(shape: Vec<usize>, data: Vec<F>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Input(format!(
                "tensor extents must be positive, got {shape:?}"
            )));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::dim("tensor", &shape, &[data.len()]));
        }
        Ok(Tensor { shape, data })
    }

    pub fn from_f64(shape: Vec<usize>, data: &[f64]) -> Result<Self> {
        Self::new(shape, data.iter().map(|&v| F::lit(v)).collect())
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![F::zero(); n],
        }
    }

    pub fn ones(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![F::one(); n],
        }
    }

    pub fn scalar(v: F) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Extent of the last axis.
    pub fn cols(&self) -> usize {
        *self.shape.last().expect("tensor has at least one axis")
    }

    /// Product of all leading extents.
    pub fn rows(&self) -> usize {
        self.numel() / self.cols()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()
    }

    pub fn cast<G: Scalar>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|v| G::lit(v.to_f64().unwrap_or(f64::NAN)))
                .collect(),
        }
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Tensor::new(shape, self.data)
    }

    pub fn matmul(&self, other: &Tensor<F>) -> Result<Tensor<F>> {
        let (m, k, n) = matmul_dims(&self.shape, &other.shape)?;
        let mut out = vec![F::zero(); m * n];
        kernels::matmul(&self.data, &other.data, m, k, n, &mut out);
        Tensor::new(vec![m, n], out)
    }

    pub fn transpose(&self) -> Result<Tensor<F>> {
        if self.rank() != 2 {
            return Err(Error::dim("transpose", &self.shape, &[2]));
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        Tensor::new(vec![n, m], kernels::transpose(&self.data, m, n))
    }

    /// Numerically stable softmax along `axis`.
    pub fn softmax(&self, axis: usize) -> Result<Tensor<F>> {
        let (outer, len, inner) = axis_split(&self.shape, axis)?;
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("softmax input is not finite".into()));
        }
        let mut out = self.data.clone();
        kernels::softmax(&mut out, outer, len, inner);
        Tensor::new(self.shape.clone(), out)
    }

    /// Normalizes over the last axis, then applies `gain` and `bias`.
    pub fn layer_norm(&self, gain: &Tensor<F>, bias: &Tensor<F>, eps: F) -> Result<Tensor<F>> {
        let n = self.cols();
        if gain.numel() != n || bias.numel() != n {
            return Err(Error::dim("layer_norm", &self.shape, gain.shape()));
        }
        let mut out = vec![F::zero(); self.numel()];
        let mut xhat = vec![F::zero(); self.numel()];
        let mut inv = vec![F::zero(); self.rows()];
        kernels::layer_norm(
            &self.data, &gain.data, &bias.data, eps, n, &mut out, &mut xhat, &mut inv,
        );
        Tensor::new(self.shape.clone(), out)
    }
}

pub(crate) fn matmul_dims(a: &[usize], b: &[usize]) -> Result<(usize, usize, usize)> {
    if a.len() != 2 || b.len() != 2 || a[1] != b[0] {
        return Err(Error::dim("matmul", a, b));
    }
    Ok((a[0], a[1], b[1]))
}

pub(crate) fn axis_split(shape: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return Err(Error::Input(format!(
            "axis {axis} out of range for shape {shape:?}"
        )));
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    Ok((outer, shape[axis], inner))
}
