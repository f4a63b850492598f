//! Dense row-major `f64` tensors with explicit shapes.

use super::{NnError, Result};

/// A dense tensor: a flat `f64` buffer plus a shape. Row-major layout; a
/// matrix of shape `[r, c]` stores row `i` at `data[i*c..(i+1)*c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, rejecting length/shape disagreement and non-finite
    /// entries. Use this for data arriving from outside the tape.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(NnError::BadConstruction {
                shape,
                len: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(NnError::NonFinite {
                op: "Tensor::new",
                index,
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![],
            data: vec![v],
        }
    }

    /// 1-D tensor over `data`.
    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    /// Row-major matrix of shape `[rows, cols]`.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    /// Internal constructor for op outputs whose finiteness the tape checks
    /// itself.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    /// The single value of a scalar (or length-1) tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() != 1 {
            return Err(NnError::NonScalarLoss {
                shape: self.shape.clone(),
            });
        }
        Ok(self.data[0])
    }

    /// Matrix row count; 1-D tensors count as a single row.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[0],
            _ => 1,
        }
    }

    pub fn cols(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[1],
            1 => self.shape[0],
            _ => 1,
        }
    }
}

/// `out = w · x` for a row-major `[rows, cols]` matrix. Eight accumulators so
/// the compiler can keep the loop in wide FMA lanes; this is the hot path of
/// every GRU step.
pub(crate) fn matvec_into(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(out.len(), rows);
    for (i, o) in out.iter_mut().enumerate() {
        let row = &w[i * cols..(i + 1) * cols];
        *o = dot(row, x);
    }
}

/// Plain dot product with unrolled partial sums.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (pa, pb) in ca.by_ref().zip(cb.by_ref()) {
        for k in 0..8 {
            acc[k] += pa[k] * pb[k];
        }
    }
    let mut tail = 0.0;
    for (va, vb) in ca.remainder().iter().zip(cb.remainder()) {
        tail += va * vb;
    }
    acc.iter().sum::<f64>() + tail
}

/// `out += alpha * a`.
pub(crate) fn axpy(alpha: f64, a: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), out.len());
    for (o, v) in out.iter_mut().zip(a) {
        *o += alpha * v;
    }
}

/// `dx += wᵀ · g`, accumulated row by row so access stays sequential.
pub(crate) fn matvec_transpose_acc(w: &[f64], rows: usize, cols: usize, g: &[f64], dx: &mut [f64]) {
    debug_assert_eq!(g.len(), rows);
    debug_assert_eq!(dx.len(), cols);
    for (i, gi) in g.iter().enumerate() {
        if *gi != 0.0 {
            axpy(*gi, &w[i * cols..(i + 1) * cols], dx);
        }
    }
}

/// `dw += g ⊗ x` (outer product) into a row-major `[rows, cols]` buffer.
pub(crate) fn outer_acc(g: &[f64], x: &[f64], dw: &mut [f64]) {
    debug_assert_eq!(dw.len(), g.len() * x.len());
    let cols = x.len();
    for (i, gi) in g.iter().enumerate() {
        if *gi != 0.0 {
            axpy(*gi, x, &mut dw[i * cols..(i + 1) * cols]);
        }
    }
}
