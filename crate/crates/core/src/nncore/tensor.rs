use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major array of `f64`.
///
/// Every operation in this crate works on rank-2 tensors; a rank-1 tensor of
/// length `n` is treated as a `1 × n` row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::shape(
                "tensor",
                format!("shape {shape:?} must be non-empty with positive dims"),
            ));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("shape {shape:?} needs {n} values, got {}", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "tensor dims must be positive");
        Tensor {
            shape: vec![rows, cols],
            data: vec![value; rows * cols],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1, 1],
            data: vec![v],
        }
    }

    /// Stacks equal-length rows into a matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::shape("tensor", "rows have different lengths"));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Tensor::matrix(rows.len(), cols, data)
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(rows, cols)` view, failing for rank > 2.
    pub fn dims(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [n] => Ok((1, n)),
            [r, c] => Ok((r, c)),
            _ => Err(Error::shape(
                op,
                format!("expected a rank-1 or rank-2 tensor, got shape {:?}", self.shape),
            )),
        }
    }

    pub(crate) fn rows(&self) -> usize {
        match self.shape[..] {
            [_] => 1,
            [r, _] => r,
            _ => panic!("rank > 2"),
        }
    }

    pub(crate) fn cols(&self) -> usize {
        *self.shape.last().expect("non-empty shape")
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub(crate) fn with_data(&self, data: Vec<f64>) -> Tensor {
        debug_assert_eq!(data.len(), self.data.len());
        Tensor {
            shape: self.shape.clone(),
            data,
        }
    }

    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        self.with_data(self.data.iter().map(|&x| f(x)).collect())
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn transpose(&self) -> Tensor {
        let (r, c) = (self.rows(), self.cols());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor {
            shape: vec![c, r],
            data: out,
        }
    }

    /// Plain matrix product; callers check shapes.
    pub(crate) fn matmul_raw(&self, other: &Tensor) -> Tensor {
        let (m, k) = (self.rows(), self.cols());
        let n = other.cols();
        debug_assert_eq!(k, other.rows());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[p * n..(p + 1) * n];
                for (o, &b) in row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Tensor {
            shape: vec![m, n],
            data: out,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(matches!(
            Tensor::new(vec![2, 3], vec![0.0; 5]),
            Err(Error::Shape { .. })
        ));
        assert!(Tensor::new(vec![0, 3], vec![]).is_err());
        assert_eq!(Tensor::new(vec![4], vec![0.0; 4]).unwrap().dims("t").unwrap(), (1, 4));
        assert!(Tensor::new(vec![1, 1, 2], vec![0.0; 2]).unwrap().dims("t").is_err());
    }

    #[test]
    fn transpose_and_matmul() {
        let a = Tensor::matrix(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(a.transpose().data(), &[1., 4., 2., 5., 3., 6.]);
        let b = Tensor::matrix(3, 1, vec![1., 0., -1.]).unwrap();
        assert_eq!(a.matmul_raw(&b).data(), &[-2., -2.]);
    }
}
