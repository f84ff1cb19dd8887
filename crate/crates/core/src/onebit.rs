//! One-bit quantization against time-varying Gaussian thresholds.
//!
//! A measurement vector `y` of length `m` is compared with `m1` independent
//! threshold sequences. Column `ℓ` of the threshold matrix `Γ` is sequence
//! `τ^(ℓ)`, and column `ℓ` of the sign matrix `R` holds `sign(y − τ^(ℓ))`.
//! Every bit is one linear inequality `r (y − τ) ≥ 0`.

use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::linalg::{norm_inf, DenseMatrix, DenseVector};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OneBitError {
    #[error("threshold ensemble needs m >= 1 and m1 >= 1 (got m={m}, m1={m1})")]
    InvalidDims { m: usize, m1: usize },
    #[error("dynamic range must be positive and finite (got {0})")]
    InvalidDynamicRange(f64),
    #[error("measurement length {got} does not match threshold length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("sign matrix entry ({row}, {col}) is {value}, expected +1 or -1")]
    InvalidSign { row: usize, col: usize, value: f64 },
}

/// `m1` Gaussian threshold sequences of length `m`, stored as the columns of
/// an `m × m1` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdEnsemble {
    gamma: DenseMatrix,
    mean: f64,
    sigma: f64,
    seed: u64,
}

impl ThresholdEnsemble {
    /// Wraps an explicit threshold matrix (replay, tests). `mean` and
    /// `sigma` are recorded as given; `seed` is zero.
    pub fn from_matrix(gamma: DenseMatrix, mean: f64, sigma: f64) -> Result<Self, OneBitError> {
        if gamma.rows() == 0 || gamma.cols() == 0 {
            return Err(OneBitError::InvalidDims {
                m: gamma.rows(),
                m1: gamma.cols(),
            });
        }
        Ok(Self {
            gamma,
            mean,
            sigma,
            seed: 0,
        })
    }

    pub fn m(&self) -> usize {
        self.gamma.rows()
    }

    pub fn m1(&self) -> usize {
        self.gamma.cols()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.gamma
    }

    pub fn get(&self, j: usize, l: usize) -> f64 {
        self.gamma.get(j, l)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Dynamic range `‖y‖_∞` of a measurement vector.
pub fn dynamic_range(y: &[f64]) -> f64 {
    norm_inf(y)
}

/// Zero-mean thresholds with per-entry standard deviation
/// `dynamic_range / 3`, so that almost all thresholds fall inside the
/// measurement range.
pub fn generate_thresholds(
    m: usize,
    m1: usize,
    dynamic_range: f64,
    seed: u64,
) -> Result<ThresholdEnsemble, OneBitError> {
    if !(dynamic_range > 0.0) || !dynamic_range.is_finite() {
        return Err(OneBitError::InvalidDynamicRange(dynamic_range));
    }
    generate_thresholds_with_mean(m, m1, 0.0, dynamic_range / 3.0, seed)
}

/// i.i.d. `N(mean, sigma²)` thresholds. Sequence `ℓ` is drawn from stream
/// `ℓ` of `seed`, independently of every other sequence.
pub fn generate_thresholds_with_mean(
    m: usize,
    m1: usize,
    mean: f64,
    sigma: f64,
    seed: u64,
) -> Result<ThresholdEnsemble, OneBitError> {
    if m == 0 || m1 == 0 {
        return Err(OneBitError::InvalidDims { m, m1 });
    }
    let normal = Normal::new(mean, sigma).map_err(|_| OneBitError::InvalidDynamicRange(3.0 * sigma))?;
    let mut gamma = DenseMatrix::zeros(m, m1);
    for l in 0..m1 {
        let mut rng = rng::stream(seed, l as u64);
        for j in 0..m {
            gamma.set(j, l, normal.sample(&mut rng));
        }
    }
    Ok(ThresholdEnsemble {
        gamma,
        mean,
        sigma,
        seed,
    })
}

/// Sign bits of one measurement vector against every threshold sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct OneBitRecord {
    signs: DenseMatrix,
    thresholds: ThresholdEnsemble,
}

impl OneBitRecord {
    /// Rebuilds a record from stored signs, checking every entry is ±1.
    pub fn from_parts(signs: DenseMatrix, thresholds: ThresholdEnsemble) -> Result<Self, OneBitError> {
        if signs.rows() != thresholds.m() || signs.cols() != thresholds.m1() {
            return Err(OneBitError::LengthMismatch {
                expected: thresholds.m() * thresholds.m1(),
                got: signs.rows() * signs.cols(),
            });
        }
        for j in 0..signs.rows() {
            for l in 0..signs.cols() {
                let v = signs.get(j, l);
                if v != 1.0 && v != -1.0 {
                    return Err(OneBitError::InvalidSign { row: j, col: l, value: v });
                }
            }
        }
        Ok(Self { signs, thresholds })
    }

    pub fn signs(&self) -> &DenseMatrix {
        &self.signs
    }

    pub fn sign(&self, j: usize, l: usize) -> f64 {
        self.signs.get(j, l)
    }

    pub fn thresholds(&self) -> &ThresholdEnsemble {
        &self.thresholds
    }

    pub fn m(&self) -> usize {
        self.signs.rows()
    }

    pub fn m1(&self) -> usize {
        self.signs.cols()
    }

    /// Total number of one-bit samples, `m · m1`.
    pub fn len(&self) -> usize {
        self.m() * self.m1()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks `R ⊙ (y 1ᵀ − Γ) ⪰ 0` entrywise.
    pub fn is_consistent_with(&self, y: &[f64]) -> bool {
        y.len() == self.m()
            && (0..self.m1()).all(|l| {
                (0..self.m()).all(|j| self.sign(j, l) * (y[j] - self.thresholds.get(j, l)) >= 0.0)
            })
    }
}

/// Sign of `y_j − Γ[j, ℓ]` for every entry; a tie maps to `+1`.
pub fn quantize(y: &[f64], thresholds: &ThresholdEnsemble) -> Result<OneBitRecord, OneBitError> {
    if y.len() != thresholds.m() {
        return Err(OneBitError::LengthMismatch {
            expected: thresholds.m(),
            got: y.len(),
        });
    }
    let mut signs = DenseMatrix::zeros(thresholds.m(), thresholds.m1());
    for l in 0..thresholds.m1() {
        for (j, &yj) in y.iter().enumerate() {
            let bit = if yj >= thresholds.get(j, l) { 1.0 } else { -1.0 };
            signs.set(j, l, bit);
        }
    }
    Ok(OneBitRecord {
        signs,
        thresholds: thresholds.clone(),
    })
}

/// `vec(R) ⊙ vec(Γ)` in column-major order: entry `ℓ·m + j` belongs to
/// sequence `ℓ`, so each sequence is a contiguous block.
pub fn stacked_rhs(rec: &OneBitRecord) -> DenseVector {
    let (m, m1) = (rec.m(), rec.m1());
    let mut out = Vec::with_capacity(m * m1);
    for l in 0..m1 {
        for j in 0..m {
            out.push(rec.sign(j, l) * rec.thresholds.get(j, l));
        }
    }
    out.into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ensemble(rows: &[Vec<f64>]) -> ThresholdEnsemble {
        ThresholdEnsemble::from_matrix(DenseMatrix::from_rows(rows).unwrap(), 0.0, 1.0).unwrap()
    }

    #[test]
    fn quantize_examples() {
        let r = quantize(&[0.5], &ensemble(&[vec![0.2]])).unwrap();
        assert_eq!(r.sign(0, 0), 1.0);
        let r = quantize(&[0.1], &ensemble(&[vec![0.7]])).unwrap();
        assert_eq!(r.sign(0, 0), -1.0);
        let r = quantize(&[0.3], &ensemble(&[vec![0.3]])).unwrap();
        assert_eq!(r.sign(0, 0), 1.0);
    }

    #[test]
    fn quantize_length_mismatch() {
        let th = ensemble(&[vec![0.0], vec![1.0]]);
        assert_eq!(
            quantize(&[1.0], &th),
            Err(OneBitError::LengthMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn stacked_rhs_examples() {
        let th = ensemble(&[vec![0.2], vec![0.5]]);
        let signs = DenseMatrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let rec = OneBitRecord::from_parts(signs, th).unwrap();
        assert_eq!(stacked_rhs(&rec).as_slice(), &[0.2, -0.5]);

        let th = ensemble(&[vec![0.1, -0.3], vec![0.4, 2.0]]);
        let rec = quantize(&[10.0, 10.0], &th).unwrap();
        assert_eq!(stacked_rhs(&rec).into_inner(), th.matrix().vec_col_major());

        let th = ensemble(&[vec![-1.5]]);
        let rec = OneBitRecord::from_parts(DenseMatrix::from_rows(&[vec![-1.0]]).unwrap(), th).unwrap();
        assert_eq!(stacked_rhs(&rec).as_slice(), &[1.5]);
    }

    #[test]
    fn record_rejects_non_sign_entries() {
        let th = ensemble(&[vec![0.0]]);
        let err = OneBitRecord::from_parts(DenseMatrix::from_rows(&[vec![0.5]]).unwrap(), th).unwrap_err();
        assert!(matches!(err, OneBitError::InvalidSign { .. }));
    }

    #[test]
    fn generate_validates_inputs() {
        assert_eq!(
            generate_thresholds(0, 3, 1.0, 1).unwrap_err(),
            OneBitError::InvalidDims { m: 0, m1: 3 }
        );
        assert!(matches!(
            generate_thresholds(2, 0, 1.0, 1),
            Err(OneBitError::InvalidDims { .. })
        ));
        assert!(matches!(
            generate_thresholds(2, 2, 0.0, 1),
            Err(OneBitError::InvalidDynamicRange(_))
        ));
    }

    #[test]
    fn generate_is_deterministic() {
        let a = generate_thresholds(2, 3, 1.0, 99).unwrap();
        let b = generate_thresholds(2, 3, 1.0, 99).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_thresholds(2, 3, 1.0, 100).unwrap());
    }

    #[test]
    fn sequences_do_not_depend_on_sequence_count() {
        let few = generate_thresholds(5, 2, 1.0, 4).unwrap();
        let many = generate_thresholds(5, 6, 1.0, 4).unwrap();
        for l in 0..2 {
            assert_eq!(few.matrix().col(l), many.matrix().col(l));
        }
    }

    #[test]
    fn unit_standard_deviation_at_range_three() {
        let th = generate_thresholds(4, 4, 3.0, 1).unwrap();
        assert_eq!(th.sigma(), 1.0);
        assert_eq!(th.mean(), 0.0);
    }

    #[test]
    fn sample_variance_matches_range() {
        let range = 2.7;
        let th = generate_thresholds(10_000, 10, range, 2024).unwrap();
        let vals = th.matrix().as_slice();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target = (range / 3.0).powi(2);
        assert!((var - target).abs() <= 0.05 * target, "var {var} vs {target}");
    }

    #[test]
    fn sample_mean_stays_near_zero() {
        let (m, m1, sigma) = (200usize, 5usize, 1.0);
        let bound = 4.0 * sigma / ((m * m1) as f64).sqrt();
        let seeds = 300;
        let inside = (0..seeds)
            .filter(|&s| {
                let th = generate_thresholds(m, m1, 3.0 * sigma, s).unwrap();
                let mean = th.matrix().as_slice().iter().sum::<f64>() / (m * m1) as f64;
                mean.abs() <= bound
            })
            .count();
        assert!(inside as f64 >= 0.99 * seeds as f64, "{inside}/{seeds}");
    }

    #[test]
    fn flipping_a_straddling_threshold_flips_one_bit() {
        let y = [0.2, -0.4, 1.0];
        let rows = vec![vec![0.5, 0.1], vec![0.3, -2.0], vec![0.0, 0.7]];
        let before = quantize(&y, &ensemble(&rows)).unwrap();
        let mut flipped = rows.clone();
        flipped[0][0] = -0.5;
        let after = quantize(&y, &ensemble(&flipped)).unwrap();
        for j in 0..3 {
            for l in 0..2 {
                let changed = before.sign(j, l) != after.sign(j, l);
                assert_eq!(changed, (j, l) == (0, 0));
            }
        }
    }

    proptest! {
        #[test]
        fn quantized_bits_are_consistent_and_stable(
            y in proptest::collection::vec(-10.0f64..10.0, 1..20),
            m1 in 1usize..6,
            seed in any::<u64>(),
        ) {
            let th = generate_thresholds(y.len(), m1, 5.0, seed).unwrap();
            let rec = quantize(&y, &th).unwrap();
            prop_assert!(rec.is_consistent_with(&y));
            prop_assert!(rec.signs().as_slice().iter().all(|&s| s == 1.0 || s == -1.0));
            let again = quantize(&y, &th).unwrap();
            prop_assert_eq!(rec.signs(), again.signs());
        }
    }
}
