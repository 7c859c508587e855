//! Dense row-major matrices with the three GEMM variants backpropagation
//! needs. Heavy products parallelize over output rows; every element is
//! accumulated in a fixed order, so results do not depend on thread count.

use rayon::prelude::*;

use super::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Row count below which parallel dispatch is not worth it.
const PAR_MIN_ROWS: usize = 4;

/// Dot product with eight independent accumulators so the compiler can keep
/// several vector lanes in flight.
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let chunks = a.len() / 8;
    let mut acc = [T::zero(); 8];
    for c in 0..chunks {
        let base = c * 8;
        for l in 0..8 {
            acc[l] = acc[l] + a[base + l] * b[base + l];
        }
    }
    let mut tail = T::zero();
    for l in chunks * 8..a.len() {
        tail = tail + a[l] * b[l];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        assert!(!rows.is_empty());
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols);
            data.extend_from_slice(r);
        }
        Matrix { rows: rows.len(), cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    /// `self * other^T`: (m x k) * (n x k)^T -> (m x n). Both operands are
    /// walked along contiguous rows; output rows are processed in blocks so
    /// each row of `other` is streamed once per block instead of once per
    /// output row.
    pub fn matmul_nt(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, other.cols);
        const RB: usize = 8;
        let mut out = Matrix::zeros(self.rows, other.rows);
        let n = other.rows;
        let run = |(block, out_rows): (usize, &mut [T])| {
            let i0 = block * RB;
            let rows_here = out_rows.len() / n;
            for j in 0..n {
                let b = other.row(j);
                for bi in 0..rows_here {
                    out_rows[bi * n + j] = dot(self.row(i0 + bi), b);
                }
            }
        };
        if self.rows >= PAR_MIN_ROWS {
            out.data.par_chunks_mut(RB * n).enumerate().for_each(run);
        } else {
            out.data.chunks_mut(RB * n).enumerate().for_each(run);
        }
        out
    }

    /// `self * other`: (m x k) * (k x n) -> (m x n), accumulated row-wise.
    pub fn matmul_nn(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        let n = other.cols;
        let run = |(i, out_row): (usize, &mut [T])| {
            let a = self.row(i);
            for (l, &a_il) in a.iter().enumerate() {
                let b_row = other.row(l);
                for j in 0..n {
                    out_row[j] = out_row[j] + a_il * b_row[j];
                }
            }
        };
        if self.rows >= PAR_MIN_ROWS {
            out.data.par_chunks_mut(n).enumerate().for_each(run);
        } else {
            out.data.chunks_mut(n).enumerate().for_each(run);
        }
        out
    }

    /// `self^T * other`: (b x m)^T * (b x n) -> (m x n). Parallel over output
    /// rows; each output row scans the batch in order.
    pub fn matmul_tn(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.rows, other.rows);
        let mut out = Matrix::zeros(self.cols, other.cols);
        let n = other.cols;
        let batch = self.rows;
        let run = |(j, out_row): (usize, &mut [T])| {
            for i in 0..batch {
                let coef = self.get(i, j);
                if coef == T::zero() {
                    continue;
                }
                let src = other.row(i);
                for l in 0..n {
                    out_row[l] = out_row[l] + coef * src[l];
                }
            }
        };
        if self.cols >= PAR_MIN_ROWS {
            out.data.par_chunks_mut(n).enumerate().for_each(run);
        } else {
            out.data.chunks_mut(n).enumerate().for_each(run);
        }
        out
    }

    /// Add a bias row vector to every row.
    pub fn add_bias(&mut self, bias: &[T]) {
        assert_eq!(bias.len(), self.cols);
        for i in 0..self.rows {
            let row = self.row_mut(i);
            for (x, &b) in row.iter_mut().zip(bias) {
                *x = *x + b;
            }
        }
    }

    /// Column sums (gradient of a broadcast bias).
    pub fn col_sums(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            for (acc, &x) in out.iter_mut().zip(self.row(i)) {
                *acc = *acc + x;
            }
        }
        out
    }

    /// Split into left (`..at`) and right (`at..`) column blocks.
    pub fn split_cols(&self, at: usize) -> (Matrix<T>, Matrix<T>) {
        assert!(at <= self.cols);
        let mut left = Matrix::zeros(self.rows, at);
        let mut right = Matrix::zeros(self.rows, self.cols - at);
        for i in 0..self.rows {
            left.row_mut(i).copy_from_slice(&self.row(i)[..at]);
            right.row_mut(i).copy_from_slice(&self.row(i)[at..]);
        }
        (left, right)
    }

    /// Concatenate two matrices column-wise.
    pub fn concat_cols(left: &Matrix<T>, right: &Matrix<T>) -> Matrix<T> {
        assert_eq!(left.rows, right.rows);
        let mut out = Matrix::zeros(left.rows, left.cols + right.cols);
        for i in 0..left.rows {
            out.row_mut(i)[..left.cols].copy_from_slice(left.row(i));
            out.row_mut(i)[left.cols..].copy_from_slice(right.row(i));
        }
        out
    }
}
