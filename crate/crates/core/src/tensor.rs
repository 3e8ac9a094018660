//! Dense row-major `f64` tensors and the few kernels the layers need.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::shape("tensor needs at least one extent"));
    }
    if let Some(pos) = shape.iter().position(|&e| e == 0) {
        return Err(Error::shape(format!("extent {pos} of {shape:?} is zero")));
    }
    Ok(shape.iter().product())
}

impl Tensor {
    pub fn new(shape: &[usize], fill: f64) -> Result<Self> {
        let n = check_shape(shape)?;
        Ok(Tensor { shape: shape.to_vec(), data: vec![fill; n] })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::new(shape, 0.0)
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n = check_shape(shape)?;
        if n != data.len() {
            return Err(Error::shape(format!("shape {shape:?} needs {n} elements, got {}", data.len())));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    /// Zero tensor with the same shape.
    pub fn zeros_like(other: &Tensor) -> Tensor {
        Tensor { shape: other.shape.clone(), data: vec![0.0; other.data.len()] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Row-major offset of a multi-index.
    pub fn flatten_index(&self, index: &[usize]) -> Result<usize> {
        flatten_index(&self.shape, index)
    }

    pub fn unflatten_index(&self, offset: usize) -> Result<Vec<usize>> {
        unflatten_index(&self.shape, offset)
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.flatten_index(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        let i = self.flatten_index(index)?;
        self.data[i] = value;
        Ok(())
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Tensor> {
        let n = check_shape(shape)?;
        if n != self.data.len() {
            return Err(Error::shape(format!("cannot reshape {:?} into {shape:?}", self.shape)));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(format!("axpy {:?} vs {:?}", self.shape, other.shape)));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }
}

pub fn flatten_index(shape: &[usize], index: &[usize]) -> Result<usize> {
    if index.len() != shape.len() {
        return Err(Error::shape(format!("index {index:?} has wrong rank for {shape:?}")));
    }
    let mut offset = 0;
    for (&i, &extent) in index.iter().zip(shape) {
        if i >= extent {
            return Err(Error::shape(format!("index {index:?} out of bounds for {shape:?}")));
        }
        offset = offset * extent + i;
    }
    Ok(offset)
}

pub fn unflatten_index(shape: &[usize], mut offset: usize) -> Result<Vec<usize>> {
    let total: usize = shape.iter().product();
    if offset >= total {
        return Err(Error::shape(format!("offset {offset} out of bounds for {shape:?}")));
    }
    let mut index = vec![0; shape.len()];
    for (slot, &extent) in index.iter_mut().zip(shape).rev() {
        *slot = offset % extent;
        offset /= extent;
    }
    Ok(index)
}

/// Row-major matrix operand: `rows x cols`, optionally read transposed.
#[derive(Clone, Copy)]
pub struct MatRef<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub transposed: bool,
}

impl<'a> MatRef<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        MatRef { data, rows, cols, transposed: false }
    }

    /// View of the transpose; `rows`/`cols` describe the stored matrix.
    pub fn t(self) -> Self {
        MatRef { transposed: !self.transposed, ..self }
    }

    fn logical(&self) -> (usize, usize) {
        if self.transposed {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        }
    }

    fn strides(&self) -> (isize, isize) {
        if self.transposed {
            (1, self.cols as isize)
        } else {
            (self.cols as isize, 1)
        }
    }
}

/// `c = beta * c + a * b` with `c` row-major `m x n`.
///
/// Thin safe wrapper over `matrixmultiply::dgemm`.
pub fn gemm(a: MatRef<'_>, b: MatRef<'_>, beta: f64, c: &mut [f64]) {
    let (m, k) = a.logical();
    let (kb, n) = b.logical();
    assert_eq!(k, kb, "gemm inner dimensions");
    assert!(a.data.len() >= a.rows * a.cols && b.data.len() >= b.rows * b.cols);
    assert_eq!(c.len(), m * n, "gemm output size");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in c.iter_mut() {
            *v *= beta;
        }
        return;
    }
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: the asserts above guarantee every index the kernel touches
    // (row < m, col < n, inner < k under the given strides) is in bounds.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
