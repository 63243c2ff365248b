use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major `f64` tensor. Only vectors and matrices are used here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape {
                op: "from_vec",
                left: shape.to_vec(),
                right: vec![data.len()],
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_vec(&[rows, cols], data)
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

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() > 1 {
            self.shape[1]
        } else {
            1
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    /// `W x` for a matrix `W`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let cols = self.cols();
        debug_assert_eq!(cols, x.len());
        self.data.chunks_exact(cols).map(|row| dot(row, x)).collect()
    }

    /// `W x + b`.
    pub fn matvec_bias(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = self.matvec(x);
        for (o, bi) in out.iter_mut().zip(b) {
            *o += bi;
        }
        out
    }

    /// `W[:, offset..offset+x.len()] x`, a column block times a vector.
    pub fn matvec_block(&self, offset: usize, x: &[f64]) -> Vec<f64> {
        let cols = self.cols();
        self.data
            .chunks_exact(cols)
            .map(|row| dot(&row[offset..offset + x.len()], x))
            .collect()
    }

    /// `Wᵀ y`.
    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        let cols = self.cols();
        debug_assert_eq!(self.rows(), y.len());
        let mut out = vec![0.0; cols];
        for (row, &yi) in self.data.chunks_exact(cols).zip(y) {
            if yi != 0.0 {
                for (o, w) in out.iter_mut().zip(row) {
                    *o += w * yi;
                }
            }
        }
        out
    }

    /// `W[:, offset..offset+width]ᵀ y`.
    pub fn matvec_t_block(&self, offset: usize, width: usize, y: &[f64]) -> Vec<f64> {
        let cols = self.cols();
        let mut out = vec![0.0; width];
        for (row, &yi) in self.data.chunks_exact(cols).zip(y) {
            if yi != 0.0 {
                for (o, w) in out.iter_mut().zip(&row[offset..offset + width]) {
                    *o += w * yi;
                }
            }
        }
        out
    }

    /// `self[:, offset..] += a bᵀ` for a matrix; `b` may cover a column block.
    pub fn add_outer(&mut self, a: &[f64], b: &[f64], offset: usize) {
        let cols = self.cols();
        debug_assert_eq!(self.rows(), a.len());
        for (row, &ai) in self.data.chunks_exact_mut(cols).zip(a) {
            if ai != 0.0 {
                for (w, bj) in row[offset..offset + b.len()].iter_mut().zip(b) {
                    *w += ai * bj;
                }
            }
        }
    }

    /// Adds `a` to column `c` of a matrix.
    pub fn add_to_col(&mut self, c: usize, a: &[f64]) {
        let cols = self.cols();
        for (r, &ai) in a.iter().enumerate() {
            self.data[r * cols + c] += ai;
        }
    }

    pub fn add_vec(&mut self, a: &[f64]) {
        for (x, y) in self.data.iter_mut().zip(a) {
            *x += y;
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert_eq!(Tensor::zeros(&[2, 3]).len(), 6);
    }

    #[test]
    fn matvec_and_transpose() {
        let w = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(w.matvec(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
        assert_eq!(w.matvec_t(&[1.0, 1.0]), vec![5.0, 7.0, 9.0]);
        assert_eq!(w.matvec_block(1, &[1.0, 1.0]), vec![5.0, 11.0]);
        assert_eq!(w.matvec_t_block(1, 2, &[1.0, 1.0]), vec![7.0, 9.0]);
    }

    #[test]
    fn outer_product_block() {
        let mut w = Tensor::zeros(&[2, 4]);
        w.add_outer(&[1.0, 2.0], &[3.0, 4.0], 2);
        assert_eq!(w.data(), &[0.0, 0.0, 3.0, 4.0, 0.0, 0.0, 6.0, 8.0]);
    }
}
