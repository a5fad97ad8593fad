//! Dense row-major `f64` tensors and the kernels shared by the graph and the
//! plain (non-recording) code paths.
//!
//! Every kernel used by a graph op lives here, so a value computed through the
//! graph and the same value computed directly are bit-identical.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::shape("Tensor::new", &shape, &[data.len()]));
        }
        Ok(Tensor { shape, data })
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    /// Rank-0 tensor holding one value.
    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; numel],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// The single element of a one-element tensor.
    pub fn item(&self) -> Option<f64> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match *self.shape.as_slice() {
            [r, c] => Ok((r, c)),
            _ => Err(Error::shape(op, &self.shape, &[0, 0])),
        }
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != self.numel() {
            return Err(Error::shape("reshape", &self.shape, shape));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::shape(op, &self.shape, &other.shape));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        self.map(|v| v * factor)
    }

    /// `self * s` where `s` holds exactly one element.
    pub fn mul_scalar(&self, s: &Tensor) -> Result<Tensor> {
        let s = s
            .item()
            .ok_or_else(|| Error::shape("mul_scalar", &self.shape, &s.shape))?;
        Ok(self.scale(s))
    }

    pub fn relu(&self) -> Tensor {
        self.map(|v| if v > 0.0 { v } else { 0.0 })
    }

    /// Subgradient mask of relu; zero at the kink.
    pub fn relu_mask(&self) -> Tensor {
        self.map(|v| if v > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn sigmoid(&self) -> Tensor {
        self.map(sigmoid)
    }

    pub fn softplus(&self) -> Tensor {
        self.map(softplus)
    }

    pub fn sum_all(&self) -> Tensor {
        Tensor::scalar(self.data.iter().sum())
    }

    /// Column sums of an `r x c` matrix, as `1 x c`.
    pub fn sum_rows(&self) -> Result<Tensor> {
        let (r, c) = self.dims2("sum_rows")?;
        let mut out = vec![0.0; c];
        for row in 0..r {
            for (o, v) in out.iter_mut().zip(&self.data[row * c..(row + 1) * c]) {
                *o += v;
            }
        }
        Tensor::matrix(1, c, out)
    }

    /// Row sums of an `r x c` matrix, as `r x 1`.
    pub fn sum_cols(&self) -> Result<Tensor> {
        let (r, c) = self.dims2("sum_cols")?;
        let out = (0..r)
            .map(|row| self.data[row * c..(row + 1) * c].iter().sum())
            .collect();
        Tensor::matrix(r, 1, out)
    }

    /// Repeat a `1 x c` row `rows` times.
    pub fn broadcast_rows(&self, rows: usize) -> Result<Tensor> {
        let (r, c) = self.dims2("broadcast_rows")?;
        if r != 1 {
            return Err(Error::shape("broadcast_rows", &self.shape, &[1, c]));
        }
        let mut out = Vec::with_capacity(rows * c);
        for _ in 0..rows {
            out.extend_from_slice(&self.data);
        }
        Tensor::matrix(rows, c, out)
    }

    /// Repeat an `r x 1` column `cols` times.
    pub fn broadcast_cols(&self, cols: usize) -> Result<Tensor> {
        let (r, c) = self.dims2("broadcast_cols")?;
        if c != 1 {
            return Err(Error::shape("broadcast_cols", &self.shape, &[r, 1]));
        }
        let mut out = Vec::with_capacity(r * cols);
        for &v in &self.data {
            out.extend(core::iter::repeat(v).take(cols));
        }
        Tensor::matrix(r, cols, out)
    }

    /// Row-wise softmax of an `r x c` matrix.
    pub fn softmax_rows(&self) -> Result<Tensor> {
        let (r, c) = self.dims2("softmax")?;
        let mut out = self.data.clone();
        for row in out.chunks_mut(c.max(1)).take(r) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = libm::exp(*v - max);
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        Tensor::matrix(r, c, out)
    }

    /// Mean over rows of `-sum_c targets * log_softmax(logits)`.
    pub fn softmax_cross_entropy(&self, targets: &Tensor) -> Result<Tensor> {
        if self.shape != targets.shape {
            return Err(Error::shape(
                "softmax_cross_entropy",
                &self.shape,
                &targets.shape,
            ));
        }
        let (r, c) = self.dims2("softmax_cross_entropy")?;
        let mut total = 0.0;
        for row in 0..r {
            let z = &self.data[row * c..(row + 1) * c];
            let y = &targets.data[row * c..(row + 1) * c];
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + libm::log(z.iter().map(|&v| libm::exp(v - max)).sum::<f64>());
            total += z
                .iter()
                .zip(y)
                .map(|(&zi, &yi)| yi * (lse - zi))
                .sum::<f64>();
        }
        Ok(Tensor::scalar(total / r as f64))
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.dims2("matmul")?;
        let (k2, n) = other.dims2("matmul")?;
        if k != k2 {
            return Err(Error::shape("matmul", &self.shape, &other.shape));
        }
        Ok(gemm(
            m,
            k,
            n,
            &self.data,
            (k as isize, 1),
            &other.data,
            (n as isize, 1),
        ))
    }

    /// `self * other^T`.
    pub fn matmul_nt(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.dims2("matmul_nt")?;
        let (n, k2) = other.dims2("matmul_nt")?;
        if k != k2 {
            return Err(Error::shape("matmul_nt", &self.shape, &other.shape));
        }
        Ok(gemm(
            m,
            k,
            n,
            &self.data,
            (k as isize, 1),
            &other.data,
            (1, k as isize),
        ))
    }

    /// `self^T * other`.
    pub fn matmul_tn(&self, other: &Tensor) -> Result<Tensor> {
        let (k, m) = self.dims2("matmul_tn")?;
        let (k2, n) = other.dims2("matmul_tn")?;
        if k != k2 {
            return Err(Error::shape("matmul_tn", &self.shape, &other.shape));
        }
        Ok(gemm(
            m,
            k,
            n,
            &self.data,
            (1, m as isize),
            &other.data,
            (n as isize, 1),
        ))
    }

    /// `out[i] = self[index[i]]`, with `GATHER_ZERO` producing 0.
    pub fn gather(&self, index: &[usize], shape: &[usize]) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != index.len() {
            return Err(Error::shape("gather", shape, &[index.len()]));
        }
        let data = index
            .iter()
            .map(|&i| if i == GATHER_ZERO { 0.0 } else { self.data[i] })
            .collect();
        Tensor::new(shape.to_vec(), data)
    }

    /// Adjoint of [`Tensor::gather`]: `out[index[i]] += self[i]`.
    pub fn scatter_add(&self, index: &[usize], shape: &[usize]) -> Result<Tensor> {
        if self.numel() != index.len() {
            return Err(Error::shape("scatter_add", &self.shape, &[index.len()]));
        }
        let mut out = Tensor::zeros(shape);
        for (&i, &v) in index.iter().zip(&self.data) {
            if i != GATHER_ZERO {
                out.data[i] += v;
            }
        }
        Ok(out)
    }

    /// Rows `start..end` of a matrix.
    pub fn rows(&self, start: usize, end: usize) -> Result<Tensor> {
        let (r, c) = self.dims2("rows")?;
        if start > end || end > r {
            return Err(Error::shape(
                "rows",
                &self.shape,
                &[end - start.min(end), c],
            ));
        }
        Tensor::matrix(end - start, c, self.data[start * c..end * c].to_vec())
    }

    /// Stack the listed rows of a matrix into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Tensor> {
        let (_, c) = self.dims2("select_rows")?;
        let mut data = Vec::with_capacity(rows.len() * c);
        for &r in rows {
            data.extend_from_slice(&self.data[r * c..(r + 1) * c]);
        }
        Tensor::matrix(rows.len(), c, data)
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.shape.last().copied().unwrap_or(1);
        &self.data[row * c..(row + 1) * c]
    }
}

/// Sentinel index in gather maps that yields zero (used for padding).
pub const GATHER_ZERO: usize = usize::MAX;

fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
) -> Tensor {
    let mut out = vec![0.0; m * n];
    if m > 0 && n > 0 && k > 0 {
        // SAFETY: strides describe in-bounds views of `a` (m x k) and `b` (k x n),
        // and `out` is a dense m x n buffer.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                rsa,
                csa,
                b.as_ptr(),
                rsb,
                csb,
                0.0,
                out.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
    Tensor {
        shape: vec![m, n],
        data: out,
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`, evaluated without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + libm::log1p(libm::exp(-x.abs()))
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn softplus_inverse(y: f64) -> f64 {
    if y > 30.0 {
        y + libm::log(-libm::expm1(-y))
    } else {
        libm::log(libm::expm1(y))
    }
}

/// Index of the largest element; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_variants_agree() {
        let a = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Tensor::matrix(3, 1, vec![1.0, 0.5, -1.0]).unwrap();
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab.shape(), &[2, 1]);
        assert_eq!(ab.data(), &[-1.0, 0.5]);

        let bt = Tensor::matrix(1, 3, vec![1.0, 0.5, -1.0]).unwrap();
        assert_eq!(a.matmul_nt(&bt).unwrap(), ab);

        let at = Tensor::matrix(3, 2, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]).unwrap();
        assert_eq!(at.matmul_tn(&b).unwrap(), ab);
    }

    #[test]
    fn shape_errors() {
        let a = Tensor::matrix(2, 3, vec![0.0; 6]).unwrap();
        assert!(matches!(a.matmul(&a), Err(Error::Shape { .. })));
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn softplus_round_trip() {
        for &y in &[1e-4, 0.01, 0.5, 3.0, 40.0] {
            let x = softplus_inverse(y);
            assert!((softplus(x) - y).abs() <= 1e-12 * y.max(1.0));
        }
        assert!((softplus(0.0) - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn gather_scatter_are_adjoint() {
        let x = Tensor::vector(vec![1.0, 2.0, 3.0]);
        let idx = [2, GATHER_ZERO, 0, 2];
        let g = x.gather(&idx, &[4]).unwrap();
        assert_eq!(g.data(), &[3.0, 0.0, 1.0, 3.0]);
        let y = Tensor::vector(vec![1.0, 1.0, 1.0, 1.0]);
        let s = y.scatter_add(&idx, &[3]).unwrap();
        assert_eq!(s.data(), &[1.0, 0.0, 2.0]);
        // <gather(x), y> == <x, scatter(y)>
        let lhs: f64 = g.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(s.data()).map(|(a, b)| a * b).sum();
        assert_eq!(lhs, rhs);
    }
}
