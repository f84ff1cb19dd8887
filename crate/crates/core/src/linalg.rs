//! Dense real kernels shared by the rest of the crate.
//!
//! Matrices are row-major `f64`. Everything here is a pure function of its
//! inputs; nothing allocates shared state.

use std::ops::{Deref, DerefMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Tikhonov weights tried, in order, before a Gram solve gives up.
const GRAM_REGULARIZATION: [f64; 3] = [0.0, 1e-12, 1e-8];

/// Absolute floor below which a singular value is treated as zero.
pub const SIGMA_MIN_FLOOR: f64 = 1e-10;

const EIGEN_START_SEED: u64 = 0x5eed_e16e;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("Gram matrix of the selected rows is singular even after regularization")]
    SingularGram,
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("dominant eigenvalue {value:e} is negative; matrix is not positive semidefinite")]
    NegativeDominant { value: f64, vector: DenseVector },
    #[error("matrix is rank deficient (smallest singular value {sigma_min:e})")]
    RankDeficient { sigma_min: f64 },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Owned real vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm_sq(&self.0).sqrt()
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<&[f64]> for DenseVector {
    fn from(v: &[f64]) -> Self {
        Self(v.to_vec())
    }
}

impl Deref for DenseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::DimensionMismatch("ragged rows".into()));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    /// Matrix whose column-major vectorization is `vec`.
    pub fn from_col_major(rows: usize, cols: usize, vec: &[f64]) -> Result<Self> {
        if vec.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                vec.len()
            )));
        }
        let mut m = Self::zeros(rows, cols);
        for c in 0..cols {
            for r in 0..rows {
                m.data[r * cols + c] = vec[c * rows + r];
            }
        }
        if m.data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(m)
    }

    /// Outer product `a bᵀ`.
    pub fn outer(a: &[f64], b: &[f64]) -> Self {
        let mut m = Self::zeros(a.len(), b.len());
        for (i, &ai) in a.iter().enumerate() {
            for (j, &bj) in b.iter().enumerate() {
                m.data[i * b.len() + j] = ai * bj;
            }
        }
        m
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// Column-major vectorization.
    pub fn vec_col_major(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                v.push(self.get(r, c));
            }
        }
        v
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                axpy(a, other.row(k), out.row_mut(i));
            }
        }
        out
    }

    /// `(M + Mᵀ)/2`; panics when not square.
    pub fn symmetrized(&self) -> Self {
        assert!(self.is_square(), "symmetrize needs a square matrix");
        let n = self.rows;
        let mut s = self.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
        s
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn sub(&self, other: &DenseMatrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sum of squared entries.
pub fn frobenius_norm_sq(m: &DenseMatrix) -> f64 {
    norm_sq(m.as_slice())
}

/// In-place lower Cholesky factor of a symmetric matrix given as a flat
/// `n*n` row-major buffer. Returns `false` on a non-positive pivot.
fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

fn cholesky_substitute(l: &[f64], n: usize, rhs: &mut [f64]) {
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[i * n + k] * rhs[k];
        }
        rhs[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * rhs[k];
        }
        rhs[i] = s / l[i * n + i];
    }
}

/// Solves `G z = v` for a symmetric PSD Gram matrix `G` by Cholesky. If the
/// factorization breaks down, retries on `G + δI` with `δ = ε·trace(G)/k`
/// for the ε in [`GRAM_REGULARIZATION`].
pub fn solve_gram(gram: &DenseMatrix, v: &[f64]) -> Result<Vec<f64>> {
    let n = gram.rows();
    if !gram.is_square() || v.len() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "Gram {}x{} against rhs of length {}",
            gram.rows(),
            gram.cols(),
            v.len()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        // a single row has nothing to be near-parallel to
        let g = gram.get(0, 0);
        if !(g > 0.0) || !g.is_finite() {
            return Err(LinalgError::SingularGram);
        }
        return Ok(vec![v[0] / g]);
    }
    let mean_diag = gram.trace() / n as f64;
    for eps in GRAM_REGULARIZATION {
        let mut a = gram.as_slice().to_vec();
        let shift = eps * mean_diag;
        for i in 0..n {
            a[i * n + i] += shift;
        }
        if cholesky_in_place(&mut a, n) {
            let mut z = v.to_vec();
            cholesky_substitute(&a, n, &mut z);
            if z.iter().all(|x| x.is_finite()) {
                return Ok(z);
            }
        }
    }
    Err(LinalgError::SingularGram)
}

/// `B′ B′ᵀ` for an explicit `k′ × n` matrix.
pub fn gram(bp: &DenseMatrix) -> DenseMatrix {
    let k = bp.rows();
    let mut g = DenseMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let v = dot(bp.row(i), bp.row(j));
            g.set(i, j, v);
            g.set(j, i, v);
        }
    }
    g
}

/// Applies the right pseudoinverse `B′ᵀ (B′B′ᵀ)⁻¹` to `v`.
pub fn gram_pseudoinverse_apply(bp: &DenseMatrix, v: &[f64]) -> Result<DenseVector> {
    if v.len() != bp.rows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "{} selected rows against a vector of length {}",
            bp.rows(),
            v.len()
        )));
    }
    let z = solve_gram(&gram(bp), v)?;
    let mut out = vec![0.0; bp.cols()];
    for (t, &zt) in z.iter().enumerate() {
        axpy(zt, bp.row(t), &mut out);
    }
    Ok(out.into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: DenseVector,
    pub iterations: usize,
}

/// Largest (algebraic) eigenpair of the symmetric part of `m` by shifted
/// power iteration.
///
/// The iteration runs on `A + ‖A‖_F I`, which is PSD, so it converges to the
/// top of the spectrum rather than to the largest-magnitude eigenvalue.
/// Converged when `‖A v − λ v‖ ≤ tol·‖A‖_F`. A negative top eigenvalue is
/// reported as [`LinalgError::NegativeDominant`].
pub fn dominant_eigenpair(m: &DenseMatrix, tol: f64, max_iter: usize) -> Result<EigenPair> {
    if !m.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "eigenpair of a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    let a = m.symmetrized();
    let fro = frobenius_norm_sq(&a).sqrt();
    if !fro.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if n == 0 || fro == 0.0 {
        let v = vec![1.0 / (n as f64).sqrt(); n];
        return Ok(EigenPair {
            value: 0.0,
            vector: v.into(),
            iterations: 0,
        });
    }

    // All-ones start with a fixed jitter, so a start exactly orthogonal to
    // the top eigenvector (e.g. [1, -1]) cannot happen by symmetry.
    let mut rng = ChaCha8Rng::seed_from_u64(EIGEN_START_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| 1.0 + 0.25 * (rng.random::<f64>() - 0.5)).collect();
    let nv = norm_sq(&v).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);

    let shift = fro;
    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        let w = a.matvec(&v);
        let rq = dot(&v, &w);
        residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - rq * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= tol * fro {
            if rq < 0.0 {
                return Err(LinalgError::NegativeDominant {
                    value: rq,
                    vector: v.into(),
                });
            }
            return Ok(EigenPair {
                value: rq,
                vector: v.into(),
                iterations: it,
            });
        }
        let mut next: Vec<f64> = w.iter().zip(&v).map(|(wi, vi)| wi + shift * vi).collect();
        let nn = norm_sq(&next).sqrt();
        if nn == 0.0 || !nn.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        next.iter_mut().for_each(|x| *x /= nn);
        v = next;
    }
    Err(LinalgError::NoConvergence {
        iterations: max_iter,
        residual: residual / fro,
    })
}

/// Singular values in descending order, by one-sided Jacobi rotations.
/// Meant for diagnostic-size matrices.
pub fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    let (rows, cols) = (m.rows(), m.cols());
    let mut u: Vec<Vec<f64>> = (0..cols).map(|c| m.col(c)).collect();
    let eps = 1e-15;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha = norm_sq(&u[p]);
                let beta = norm_sq(&u[q]);
                let gamma = dot(&u[p], &u[q]);
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = u.split_at_mut(q);
                let (up, uq) = (&mut left[p], &mut right[0]);
                for r in 0..rows {
                    let a = up[r];
                    let b = uq[r];
                    up[r] = c * a - s * b;
                    uq[r] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = u.iter().map(|col| norm_sq(col).sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv.truncate(rows.min(cols));
    sv
}

/// `‖M‖_F / σ_min(M)` for a full-column-rank matrix.
pub fn scaled_condition_number(m: &DenseMatrix) -> Result<f64> {
    if m.rows() < m.cols() || m.cols() == 0 {
        return Err(LinalgError::RankDeficient { sigma_min: 0.0 });
    }
    let sigma_min = singular_values(m).last().copied().unwrap_or(0.0);
    if sigma_min < SIGMA_MIN_FLOOR {
        return Err(LinalgError::RankDeficient { sigma_min });
    }
    Ok(frobenius_norm_sq(m).sqrt() / sigma_min)
}
