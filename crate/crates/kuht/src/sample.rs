//! Samples (n x d observation matrices) and a minimal dense matrix.

use crate::error::{Error, Result};
use crate::real::Real;

/// An n x d matrix of observations, one row per observation.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T = f64> {
    data: Vec<T>,
    rows: usize,
    dim: usize,
}

impl<T: Real> Sample<T> {
    pub fn from_vec(data: Vec<T>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParam("dimension must be >= 1".into()));
        }
        if data.is_empty() {
            return Err(Error::EmptySample);
        }
        if data.len() % dim != 0 {
            return Err(Error::InvalidParam(format!(
                "data length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        let rows = data.len() / dim;
        Ok(Self { data, rows, dim })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptySample);
        }
        let dim = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(data, dim)
    }

    /// 1-d convenience constructor.
    pub fn from_scalars(values: &[T]) -> Result<Self> {
        Self::from_vec(values.to_vec(), 1)
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows_iter(&self) -> impl DoubleEndedIterator<Item = &[T]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Stacks two samples of equal dimension.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self::from_vec(data, self.dim)
    }

    pub fn subrange(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.rows {
            return Err(Error::InvalidParam(format!(
                "invalid row range {start}..{end} for {} rows",
                self.rows
            )));
        }
        Self::from_vec(self.data[start * self.dim..end * self.dim].to_vec(), self.dim)
    }

    pub fn reversed(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for r in self.rows_iter().rev() {
            data.extend_from_slice(r);
        }
        Self {
            data,
            rows: self.rows,
            dim: self.dim,
        }
    }
}

pub fn squared_distance<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter()
        .zip(y.iter())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum()
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T = f64> {
    data: Vec<T>,
    rows: usize,
    cols: usize,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: vec![T::zero(); rows * cols],
            rows,
            cols,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { data, rows, cols }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn diag_sum(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sums(&self) -> Vec<T> {
        self.data
            .chunks_exact(self.cols)
            .map(|r| r.iter().copied().sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }
}
