//! Quadratic compressed sensing instances and their one-bit polyhedron.
//!
//! A measurement `y_j = xᵀ A_j x` is linear in the lifted matrix `X = x xᵀ`:
//! `y_j = vec(A_jᵀ)ᵀ vec(X)`. Stacking those rows gives the lifted operator
//! `V`, and one-bit sampling of `y` against `m1` threshold sequences turns
//! `V vec(X) = y` into the polyhedron `P vec(X) ⪰ vec(R) ⊙ vec(Γ)` with
//! `P = [Ω^(1) V; …; Ω^(m1) V]` and `Ω^(ℓ) = diag(r^(ℓ))`.
//!
//! Vectorization is column-major throughout: entry `(r, c)` of an `n × n`
//! matrix sits at `c·n + r`.

use std::ops::Range;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, DenseMatrix, DenseVector};
use crate::onebit::{self, OneBitError, OneBitRecord};
use crate::rng;
use crate::solvers::InequalitySystem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcsError {
    #[error("sparsity k={k} must satisfy 1 <= k <= n={n}")]
    InvalidSparsity { k: usize, n: usize },
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("measurement row {0} is identically zero")]
    ZeroRow(usize),
    #[error(transparent)]
    OneBit(#[from] OneBitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingKind {
    /// `A_j = a_j a_jᵀ` with `a_j ∼ N(0, I)`.
    RankOne,
    /// `A_j` with i.i.d. standard normal entries.
    FullRank,
}

/// Linear map from the unknown vector to the `m` measurements.
///
/// The rank-one lifted form keeps only the vectors `a_j` and produces the
/// rows `a_j ⊗ a_j` on demand; the dense form stores every row.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementOperator {
    RankOneLifted { vectors: DenseMatrix },
    Dense { rows: DenseMatrix },
}

impl MeasurementOperator {
    pub fn measurements(&self) -> usize {
        match self {
            Self::RankOneLifted { vectors } => vectors.rows(),
            Self::Dense { rows } => rows.rows(),
        }
    }

    pub fn unknowns(&self) -> usize {
        match self {
            Self::RankOneLifted { vectors } => vectors.cols() * vectors.cols(),
            Self::Dense { rows } => rows.cols(),
        }
    }

    /// Row `j` as a dense vector.
    pub fn row(&self, j: usize) -> Vec<f64> {
        match self {
            Self::RankOneLifted { vectors } => {
                let a = vectors.row(j);
                a.iter().flat_map(|&ac| a.iter().map(move |&ar| ac * ar)).collect()
            }
            Self::Dense { rows } => rows.row(j).to_vec(),
        }
    }

    /// `row_j · x`; for the rank-one form this is `aᵀ X a`.
    pub fn row_dot(&self, j: usize, x: &[f64]) -> f64 {
        match self {
            Self::RankOneLifted { vectors } => {
                let a = vectors.row(j);
                let n = a.len();
                a.iter()
                    .enumerate()
                    .map(|(c, &ac)| ac * linalg::dot(a, &x[c * n..(c + 1) * n]))
                    .sum()
            }
            Self::Dense { rows } => linalg::dot(rows.row(j), x),
        }
    }

    /// `x += alpha · row_j`
    pub fn row_axpy(&self, j: usize, alpha: f64, x: &mut [f64]) {
        match self {
            Self::RankOneLifted { vectors } => {
                let a = vectors.row(j);
                let n = a.len();
                for (c, &ac) in a.iter().enumerate() {
                    linalg::axpy(alpha * ac, a, &mut x[c * n..(c + 1) * n]);
                }
            }
            Self::Dense { rows } => linalg::axpy(alpha, rows.row(j), x),
        }
    }

    pub fn row_norm_sq(&self, j: usize) -> f64 {
        match self {
            Self::RankOneLifted { vectors } => linalg::norm_sq(vectors.row(j)).powi(2),
            Self::Dense { rows } => linalg::norm_sq(rows.row(j)),
        }
    }

    /// `row_j · row_k`; `(a_j · a_k)²` in the rank-one form.
    pub fn row_inner(&self, j: usize, k: usize) -> f64 {
        match self {
            Self::RankOneLifted { vectors } => linalg::dot(vectors.row(j), vectors.row(k)).powi(2),
            Self::Dense { rows } => linalg::dot(rows.row(j), rows.row(k)),
        }
    }

    /// All `m` measurements of `x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.measurements()).map(|j| self.row_dot(j, x)).collect()
    }

    /// Bytes held by the operator's storage.
    pub fn storage_bytes(&self) -> usize {
        let entries = match self {
            Self::RankOneLifted { vectors } => vectors.as_slice().len(),
            Self::Dense { rows } => rows.as_slice().len(),
        };
        entries * std::mem::size_of::<f64>()
    }
}

/// The sensing matrices `{A_j}` of a QCS problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingEnsemble {
    n: usize,
    kind: SensingKind,
    seed: u64,
    operator: Arc<MeasurementOperator>,
}

impl SensingEnsemble {
    pub fn generate(n: usize, m: usize, kind: SensingKind, seed: u64) -> Result<Self, QcsError> {
        if n == 0 || m == 0 {
            return Err(QcsError::InvalidDims(format!("n={n}, m={m}")));
        }
        let mut rng = rng::stream(seed, 1);
        let operator = match kind {
            SensingKind::RankOne => {
                let data = (0..m * n).map(|_| rng.sample(StandardNormal)).collect();
                MeasurementOperator::RankOneLifted {
                    vectors: DenseMatrix::from_row_major(m, n, data).expect("finite samples"),
                }
            }
            SensingKind::FullRank => {
                // Row j of V is vec(A_jᵀ) in column-major order, which is
                // A_j flattened row-major.
                let data = (0..m * n * n).map(|_| rng.sample(StandardNormal)).collect();
                MeasurementOperator::Dense {
                    rows: DenseMatrix::from_row_major(m, n * n, data).expect("finite samples"),
                }
            }
        };
        Ok(Self {
            n,
            kind,
            seed,
            operator: Arc::new(operator),
        })
    }

    /// Rank-one ensemble from explicit vectors `a_j` (rows of `vectors`).
    pub fn from_vectors(vectors: DenseMatrix) -> Result<Self, QcsError> {
        if vectors.rows() == 0 || vectors.cols() == 0 {
            return Err(QcsError::InvalidDims("empty vector set".into()));
        }
        Ok(Self {
            n: vectors.cols(),
            kind: SensingKind::RankOne,
            seed: 0,
            operator: Arc::new(MeasurementOperator::RankOneLifted { vectors }),
        })
    }

    /// Full-rank ensemble from explicit square matrices.
    pub fn from_matrices(mats: &[DenseMatrix]) -> Result<Self, QcsError> {
        let n = mats.first().map_or(0, DenseMatrix::rows);
        if n == 0 || mats.iter().any(|a| a.rows() != n || a.cols() != n) {
            return Err(QcsError::InvalidDims("matrices must be non-empty and n×n".into()));
        }
        let data: Vec<f64> = mats.iter().flat_map(|a| a.as_slice().iter().copied()).collect();
        let rows = DenseMatrix::from_row_major(mats.len(), n * n, data)
            .map_err(|e| QcsError::InvalidDims(e.to_string()))?;
        Ok(Self {
            n,
            kind: SensingKind::FullRank,
            seed: 0,
            operator: Arc::new(MeasurementOperator::Dense { rows }),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.operator.measurements()
    }

    pub fn kind(&self) -> SensingKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn operator(&self) -> &Arc<MeasurementOperator> {
        &self.operator
    }

    /// `A_j` materialized as an `n × n` matrix.
    pub fn matrix(&self, j: usize) -> Result<DenseMatrix, QcsError> {
        self.check_index(j)?;
        Ok(match self.operator.as_ref() {
            MeasurementOperator::RankOneLifted { vectors } => {
                DenseMatrix::outer(vectors.row(j), vectors.row(j))
            }
            MeasurementOperator::Dense { rows } => {
                DenseMatrix::from_row_major(self.n, self.n, rows.row(j).to_vec())
                    .expect("stored rows are finite")
            }
        })
    }

    /// `x_j ᵀ A_j x` for every `j`.
    pub fn measure(&self, x: &[f64]) -> Vec<f64> {
        self.operator.apply(&lift(x))
    }

    fn check_index(&self, j: usize) -> Result<(), QcsError> {
        if j >= self.m() {
            return Err(QcsError::IndexOutOfRange { index: j, len: self.m() });
        }
        Ok(())
    }
}

/// `vec(x xᵀ)`, column-major.
pub fn lift(x: &[f64]) -> Vec<f64> {
    x.iter().flat_map(|&xc| x.iter().map(move |&xr| xr * xc)).collect()
}

/// `vec(A_jᵀ)`: the row of the lifted operator for measurement `j`.
pub fn lifted_row(ensemble: &SensingEnsemble, j: usize) -> Result<DenseVector, QcsError> {
    ensemble.check_index(j)?;
    Ok(ensemble.operator.row(j).into())
}

/// A sparse ground-truth signal with its sensing ensemble and noiseless
/// quadratic measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    x_true: DenseVector,
    support: Vec<usize>,
    ensemble: SensingEnsemble,
    y: DenseVector,
}

impl ProblemInstance {
    /// Instance from a chosen signal and ensemble; `y` is recomputed.
    pub fn from_parts(x_true: Vec<f64>, ensemble: SensingEnsemble) -> Result<Self, QcsError> {
        if x_true.len() != ensemble.n() {
            return Err(QcsError::InvalidDims(format!(
                "signal length {} for an ensemble with n={}",
                x_true.len(),
                ensemble.n()
            )));
        }
        let support = (0..x_true.len()).filter(|&i| x_true[i] != 0.0).collect();
        let y = ensemble.measure(&x_true).into();
        Ok(Self {
            x_true: x_true.into(),
            support,
            ensemble,
            y,
        })
    }

    pub fn x_true(&self) -> &DenseVector {
        &self.x_true
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn n(&self) -> usize {
        self.ensemble.n()
    }

    pub fn m(&self) -> usize {
        self.ensemble.m()
    }

    pub fn ensemble(&self) -> &SensingEnsemble {
        &self.ensemble
    }

    pub fn y(&self) -> &DenseVector {
        &self.y
    }

    /// `vec(X_true)` with `X_true = x xᵀ`.
    pub fn lifted_truth(&self) -> Vec<f64> {
        lift(&self.x_true)
    }

    pub fn truth_matrix(&self) -> DenseMatrix {
        DenseMatrix::outer(&self.x_true, &self.x_true)
    }
}

/// `k`-sparse signal of length `n`: uniform support (sorted) and standard
/// normal amplitudes, drawn from stream 0 of `seed`.
pub fn sparse_signal(n: usize, k: usize, seed: u64) -> Result<(Vec<f64>, Vec<usize>), QcsError> {
    if k == 0 || k > n {
        return Err(QcsError::InvalidSparsity { k, n });
    }
    let mut rng = rng::stream(seed, 0);
    let mut support = index::sample(&mut rng, n, k).into_vec();
    support.sort_unstable();
    let mut x = vec![0.0; n];
    for &i in &support {
        // resample the measure-zero exact zero so ‖x‖₀ = k holds exactly
        x[i] = loop {
            let v: f64 = rng.sample(StandardNormal);
            if v != 0.0 {
                break v;
            }
        };
    }
    Ok((x, support))
}

/// `k`-sparse signal of length `n` (see [`sparse_signal`]) measured by `m`
/// sensing matrices of the given kind.
pub fn generate_instance(
    n: usize,
    k: usize,
    m: usize,
    kind: SensingKind,
    seed: u64,
) -> Result<ProblemInstance, QcsError> {
    if m == 0 {
        return Err(QcsError::InvalidDims("m must be at least 1".into()));
    }
    let (x, support) = sparse_signal(n, k, seed)?;
    let ensemble = SensingEnsemble::generate(n, m, kind, seed)?;
    let y = ensemble.measure(&x).into();
    Ok(ProblemInstance {
        x_true: x.into(),
        support,
        ensemble,
        y,
    })
}

/// Plain linear sensing `y = B x` with `B` having i.i.d. standard normal
/// entries; no lifting. The one-bit polyhedron of `y` lives in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearInstance {
    pub x_true: Vec<f64>,
    pub operator: Arc<MeasurementOperator>,
    pub y: Vec<f64>,
}

/// `m × n` Gaussian `B` (stream 2 of `seed`) and a `k`-sparse signal
/// ([`sparse_signal`]); `k = n` gives a dense Gaussian signal.
pub fn generate_linear_instance(n: usize, k: usize, m: usize, seed: u64) -> Result<LinearInstance, QcsError> {
    if m == 0 {
        return Err(QcsError::InvalidDims("m must be at least 1".into()));
    }
    let (x_true, _) = sparse_signal(n, k, seed)?;
    let mut rng = rng::stream(seed, 2);
    let data = (0..m * n).map(|_| rng.sample(StandardNormal)).collect();
    let rows = DenseMatrix::from_row_major(m, n, data).map_err(|e| QcsError::InvalidDims(e.to_string()))?;
    let operator = Arc::new(MeasurementOperator::Dense { rows });
    let y = operator.apply(&x_true);
    Ok(LinearInstance { x_true, operator, y })
}

/// How thresholds are drawn when a polyhedron is built.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Dynamic range used for the threshold spread; `‖y‖_∞` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamic_range: Option<f64>,
    /// Standard deviation of Gaussian noise added before quantization.
    /// Zero (off) by default; with noise the truth need not be feasible.
    #[serde(default)]
    pub noise_std: f64,
}

/// Result of [`Polyhedron::feasibility_margin`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityMargin {
    pub min_margin: f64,
    pub violated_count: usize,
}

/// The one-bit polyhedron `P x ⪰ vec(R) ⊙ vec(Γ)`, kept in block form.
///
/// Row `ℓ·m + j` is `r_j^(ℓ) · row_j(V)`; `P` itself is never formed.
/// As an [`InequalitySystem`] it presents `B x ⪯ b` with `B = −P` and
/// `b = −vec(R) ⊙ vec(Γ)`, one block per threshold sequence.
#[derive(Debug, Clone)]
pub struct Polyhedron {
    operator: Arc<MeasurementOperator>,
    record: OneBitRecord,
    rhs: DenseVector,
    row_norms_sq: Vec<f64>,
}

impl Polyhedron {
    /// One-bit polyhedron for measurements `y` of an arbitrary operator.
    pub fn from_measurements(
        operator: Arc<MeasurementOperator>,
        y: &[f64],
        m1: usize,
        cfg: &ThresholdConfig,
        seed: u64,
    ) -> Result<Self, QcsError> {
        let m = operator.measurements();
        if y.len() != m {
            return Err(OneBitError::LengthMismatch { expected: m, got: y.len() }.into());
        }
        let range = cfg.dynamic_range.unwrap_or_else(|| onebit::dynamic_range(y));
        let thresholds = onebit::generate_thresholds(m, m1, range, seed)?;
        let record = if cfg.noise_std > 0.0 {
            let noise = Normal::new(0.0, cfg.noise_std)
                .map_err(|_| QcsError::InvalidDims(format!("noise_std {}", cfg.noise_std)))?;
            let mut rng = rng::stream(seed, u64::MAX);
            let noisy: Vec<f64> = y.iter().map(|v| v + noise.sample(&mut rng)).collect();
            onebit::quantize(&noisy, &thresholds)?
        } else {
            onebit::quantize(y, &thresholds)?
        };
        Self::from_record(operator, record)
    }

    /// Polyhedron from an existing one-bit record.
    pub fn from_record(operator: Arc<MeasurementOperator>, record: OneBitRecord) -> Result<Self, QcsError> {
        let m = operator.measurements();
        if record.m() != m {
            return Err(OneBitError::LengthMismatch { expected: m, got: record.m() }.into());
        }
        let row_norms_sq: Vec<f64> = (0..m).map(|j| operator.row_norm_sq(j)).collect();
        if let Some(j) = row_norms_sq.iter().position(|&v| v == 0.0) {
            return Err(QcsError::ZeroRow(j));
        }
        let rhs = onebit::stacked_rhs(&record);
        Ok(Self {
            operator,
            record,
            rhs,
            row_norms_sq,
        })
    }

    pub fn operator(&self) -> &MeasurementOperator {
        &self.operator
    }

    pub fn record(&self) -> &OneBitRecord {
        &self.record
    }

    /// `vec(R) ⊙ vec(Γ)`
    pub fn stacked_rhs(&self) -> &DenseVector {
        &self.rhs
    }

    pub fn m(&self) -> usize {
        self.record.m()
    }

    pub fn m1(&self) -> usize {
        self.record.m1()
    }

    pub fn inequality_count(&self) -> usize {
        self.record.len()
    }

    /// `Ω^(ℓ) V x`: block `ℓ` of `P` applied to `x`.
    pub fn apply_operator(&self, x: &[f64], block: usize) -> Result<DenseVector, QcsError> {
        if block >= self.m1() {
            return Err(QcsError::IndexOutOfRange { index: block, len: self.m1() });
        }
        self.check_len(x)?;
        Ok((0..self.m())
            .map(|j| self.record.sign(j, block) * self.operator.row_dot(j, x))
            .collect::<Vec<_>>()
            .into())
    }

    /// Smallest slack `P x − rhs` over all rows and the number of rows with
    /// negative slack.
    pub fn feasibility_margin(&self, x: &[f64]) -> Result<FeasibilityMargin, QcsError> {
        self.check_len(x)?;
        let y_hat = self.operator.apply(x);
        let mut min_margin = f64::INFINITY;
        let mut violated_count = 0;
        for l in 0..self.m1() {
            for (j, &yj) in y_hat.iter().enumerate() {
                let margin = self.record.sign(j, l) * yj - self.rhs[l * self.m() + j];
                if margin < 0.0 {
                    violated_count += 1;
                }
                min_margin = min_margin.min(margin);
            }
        }
        Ok(FeasibilityMargin {
            min_margin,
            violated_count,
        })
    }

    /// Negates bit `(j, ℓ)` of the record, rebuilding the affected
    /// right-hand-side entry.
    pub fn flip_bit(&mut self, j: usize, block: usize) -> Result<(), QcsError> {
        if j >= self.m() || block >= self.m1() {
            return Err(QcsError::IndexOutOfRange {
                index: block * self.m() + j,
                len: self.inequality_count(),
            });
        }
        let mut signs = self.record.signs().clone();
        signs.set(j, block, -signs.get(j, block));
        self.record = OneBitRecord::from_parts(signs, self.record.thresholds().clone())?;
        self.rhs = onebit::stacked_rhs(&self.record);
        Ok(())
    }

    /// Heap bytes held by the operator, `R`, `Γ`, and the stacked rhs.
    pub fn storage_bytes(&self) -> usize {
        let f = std::mem::size_of::<f64>();
        self.operator.storage_bytes()
            + 3 * self.record.len() * f
            + self.row_norms_sq.len() * f
    }

    fn check_len(&self, x: &[f64]) -> Result<(), QcsError> {
        if x.len() != self.operator.unknowns() {
            return Err(QcsError::InvalidDims(format!(
                "vector of length {} for {} unknowns",
                x.len(),
                self.operator.unknowns()
            )));
        }
        Ok(())
    }

    #[inline]
    fn split(&self, i: usize) -> (usize, usize) {
        (i % self.m(), i / self.m())
    }
}

/// Quantizes an instance's measurements against `m1` fresh threshold
/// sequences and assembles the polyhedron.
pub fn build_polyhedron(
    inst: &ProblemInstance,
    m1: usize,
    cfg: &ThresholdConfig,
    seed: u64,
) -> Result<Polyhedron, QcsError> {
    Polyhedron::from_measurements(inst.ensemble.operator.clone(), &inst.y, m1, cfg, seed)
}

impl InequalitySystem for Polyhedron {
    fn rows(&self) -> usize {
        self.record.len()
    }

    fn unknowns(&self) -> usize {
        self.operator.unknowns()
    }

    fn blocks(&self) -> usize {
        self.m1()
    }

    fn block_range(&self, block: usize) -> Range<usize> {
        block * self.m()..(block + 1) * self.m()
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (j, l) = self.split(i);
        -self.record.sign(j, l) * self.operator.row_dot(j, x)
    }

    fn rhs(&self, i: usize) -> f64 {
        -self.rhs[i]
    }

    fn row_norm_sq(&self, i: usize) -> f64 {
        self.row_norms_sq[i % self.m()]
    }

    fn row_axpy(&self, i: usize, alpha: f64, x: &mut [f64]) {
        let (j, l) = self.split(i);
        self.operator.row_axpy(j, -alpha * self.record.sign(j, l), x);
    }

    fn row_inner(&self, i: usize, k: usize) -> f64 {
        let (j, l) = self.split(i);
        let (j2, l2) = self.split(k);
        self.record.sign(j, l) * self.record.sign(j2, l2) * self.operator.row_inner(j, j2)
    }

    fn block_frobenius_sq(&self, _block: usize) -> f64 {
        // sign flips leave row norms unchanged, so every block is ‖V‖_F²
        self.row_norms_sq.iter().sum()
    }

    fn block_residuals(&self, block: usize, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let base = block * self.m();
        out.extend(
            (0..self.m()).map(|j| self.rhs[base + j] - self.record.sign(j, block) * self.operator.row_dot(j, x)),
        );
    }

    fn max_positive_residual(&self, x: &[f64]) -> f64 {
        let y_hat = self.operator.apply(x);
        let mut worst: f64 = 0.0;
        for l in 0..self.m1() {
            let base = l * self.m();
            for (j, &yj) in y_hat.iter().enumerate() {
                worst = worst.max(self.rhs[base + j] - self.record.sign(j, l) * yj);
            }
        }
        worst
    }

    fn row(&self, i: usize) -> Vec<f64> {
        let (j, l) = self.split(i);
        let s = -self.record.sign(j, l);
        self.operator.row(j).into_iter().map(|v| s * v).collect()
    }
}
