use std::ops::Range;

use crate::linalg::{self, DenseMatrix};

/// Row oracle for a linear feasibility problem `B x ⪯ b`.
///
/// Rows are grouped into contiguous blocks. Implementations only need the
/// row primitives; the block and whole-system helpers have default
/// implementations that an implementation can override with something
/// cheaper.
pub trait InequalitySystem: Sync {
    fn rows(&self) -> usize;
    fn unknowns(&self) -> usize;
    fn blocks(&self) -> usize;
    fn block_range(&self, block: usize) -> Range<usize>;

    /// `c_i · x`
    fn row_dot(&self, i: usize, x: &[f64]) -> f64;
    /// `b_i`
    fn rhs(&self, i: usize) -> f64;
    fn row_norm_sq(&self, i: usize) -> f64;
    /// `x += alpha · c_i`
    fn row_axpy(&self, i: usize, alpha: f64, x: &mut [f64]);
    /// `c_i · c_k`
    fn row_inner(&self, i: usize, k: usize) -> f64;

    fn residual(&self, i: usize, x: &[f64]) -> f64 {
        self.row_dot(i, x) - self.rhs(i)
    }

    fn block_frobenius_sq(&self, block: usize) -> f64 {
        self.block_range(block).map(|i| self.row_norm_sq(i)).sum()
    }

    /// `B_ℓ x − b_ℓ` into `out`.
    fn block_residuals(&self, block: usize, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.block_range(block).map(|i| self.residual(i, x)));
    }

    /// `max_i (c_i x − b_i)^+`
    fn max_positive_residual(&self, x: &[f64]) -> f64 {
        (0..self.rows()).fold(0.0, |acc, i| acc.max(self.residual(i, x)))
    }

    fn row(&self, i: usize) -> Vec<f64> {
        let mut r = vec![0.0; self.unknowns()];
        self.row_axpy(i, 1.0, &mut r);
        r
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("row {0} is identically zero")]
    ZeroRow(usize),
    #[error("{rows} rows but {rhs} right-hand-side entries")]
    RhsLength { rows: usize, rhs: usize },
    #[error("block length must be positive")]
    EmptyBlock,
}

/// Explicit `B x ⪯ b` with rows split into equal blocks (the last block may
/// be shorter).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSystem {
    matrix: DenseMatrix,
    rhs: Vec<f64>,
    block_len: usize,
    row_norms_sq: Vec<f64>,
}

impl DenseSystem {
    pub fn new(matrix: DenseMatrix, rhs: Vec<f64>, block_len: usize) -> Result<Self, SystemError> {
        if rhs.len() != matrix.rows() {
            return Err(SystemError::RhsLength {
                rows: matrix.rows(),
                rhs: rhs.len(),
            });
        }
        if block_len == 0 {
            return Err(SystemError::EmptyBlock);
        }
        let row_norms_sq: Vec<f64> = (0..matrix.rows())
            .map(|i| linalg::norm_sq(matrix.row(i)))
            .collect();
        if let Some(i) = row_norms_sq.iter().position(|&v| v == 0.0) {
            return Err(SystemError::ZeroRow(i));
        }
        Ok(Self {
            matrix,
            rhs,
            block_len,
            row_norms_sq,
        })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn rhs_vec(&self) -> &[f64] {
        &self.rhs
    }
}

impl InequalitySystem for DenseSystem {
    fn rows(&self) -> usize {
        self.matrix.rows()
    }

    fn unknowns(&self) -> usize {
        self.matrix.cols()
    }

    fn blocks(&self) -> usize {
        self.rows().div_ceil(self.block_len)
    }

    fn block_range(&self, block: usize) -> Range<usize> {
        let start = block * self.block_len;
        start..(start + self.block_len).min(self.rows())
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        linalg::dot(self.matrix.row(i), x)
    }

    fn rhs(&self, i: usize) -> f64 {
        self.rhs[i]
    }

    fn row_norm_sq(&self, i: usize) -> f64 {
        self.row_norms_sq[i]
    }

    fn row_axpy(&self, i: usize, alpha: f64, x: &mut [f64]) {
        linalg::axpy(alpha, self.matrix.row(i), x);
    }

    fn row_inner(&self, i: usize, k: usize) -> f64 {
        linalg::dot(self.matrix.row(i), self.matrix.row(k))
    }

    fn row(&self, i: usize) -> Vec<f64> {
        self.matrix.row(i).to_vec()
    }
}
