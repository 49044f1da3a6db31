//! Dense row-major matrices over a generic ring.
//!
//! Sizes here are desk scale (|B| up to a few hundred), so dense storage
//! and textbook products are the right tool. The element type only needs
//! ring operations; this is what lets the exact-rational test oracles
//! reuse the same contraction code.

use num_traits::{One, Zero};
use std::ops::{Add, Mul};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T> Mat<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch);
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::ShapeMismatch);
        }
        let data = rows.into_iter().flatten().collect();
        Ok(Mat { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Zero + Clone> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }
}

impl<T: Zero + One + Clone> Mat<T> {
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }
}

impl<T> Mat<T>
where
    T: Zero + Clone + Add<Output = T> + Mul<Output = T>,
{
    /// Row vector times matrix: `v^T M`.
    pub fn vecmat(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows, "vecmat dimension");
        let mut out = vec![T::zero(); self.cols];
        for (i, vi) in v.iter().enumerate() {
            if vi.is_zero() {
                continue;
            }
            for (j, m) in self.row(i).iter().enumerate() {
                out[j] = out[j].clone() + vi.clone() * m.clone();
            }
        }
        out
    }

    /// Matrix times column vector: `M v`.
    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols, "matvec dimension");
        let mut out = vec![T::zero(); self.rows];
        for i in 0..self.rows {
            let mut acc = T::zero();
            for (m, vj) in self.row(i).iter().zip(v) {
                acc = acc + m.clone() * vj.clone();
            }
            out[i] = acc;
        }
        out
    }

    pub fn matmul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, other.rows, "matmul dimension");
        let mut out: Mat<T> = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for (k, a) in self.row(i).iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                for (j, b) in other.row(k).iter().enumerate() {
                    let v = out.get(i, j).clone() + a.clone() * b.clone();
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn trace(&self) -> T {
        assert!(self.is_square(), "trace of non-square matrix");
        let mut acc = T::zero();
        for i in 0..self.rows {
            acc = acc + self.get(i, i).clone();
        }
        acc
    }

    /// Entrywise (Hadamard) product.
    pub fn hadamard(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.clone() * b.clone())
                .collect(),
        }
    }
}

pub fn dot<T>(a: &[T], b: &[T]) -> T
where
    T: Zero + Clone + Add<Output = T> + Mul<Output = T>,
{
    assert_eq!(a.len(), b.len(), "dot dimension");
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc = acc + x.clone() * y.clone();
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree_with_hand_computation() {
        let m = Mat::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.vecmat(&[1.0, 1.0]), vec![4.0, 6.0]);
        assert_eq!(m.matvec(&[1.0, 1.0]), vec![3.0, 7.0]);
        assert_eq!(m.trace(), 5.0);
        let m2 = m.matmul(&m);
        assert_eq!(*m2.get(0, 0), 7.0);
        assert_eq!(*m2.get(1, 1), 22.0);
    }

    #[test]
    fn rational_contraction_is_exact() {
        use num::BigRational;
        use num::FromPrimitive;
        let half = BigRational::from_f64(0.5).unwrap();
        let one = BigRational::from_f64(1.0).unwrap();
        let m = Mat::from_rows(vec![vec![one.clone(), half.clone()], vec![half.clone(), one.clone()]]).unwrap();
        let v = vec![one.clone(), one.clone()];
        let w = m.vecmat(&v);
        assert_eq!(w[0], one + half);
    }
}
