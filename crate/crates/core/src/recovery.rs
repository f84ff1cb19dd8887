//! Signal extraction from a recovered lifted matrix, and error metrics.

use thiserror::Error;

use crate::linalg::{self, DenseMatrix, DenseVector, LinalgError};

/// Power iteration settings used by [`extract_signal`].
pub const EIGEN_TOL: f64 = 1e-12;
pub const EIGEN_MAX_ITER: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecoveryError {
    #[error("reference has zero norm")]
    ZeroReference,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Output of [`extract_signal`].
#[derive(Debug, Clone, PartialEq)]
pub struct SignalEstimate {
    pub x_bar: DenseVector,
    pub lambda_max: f64,
    /// Set when the top eigenvalue was negative and clamped to zero.
    pub clamped: bool,
}

/// `x̄ = √max(λ_max, 0) · v` for the dominant eigenpair `(λ_max, v)` of the
/// symmetric part of `X̄`, signed so its largest-magnitude entry is
/// positive (first such entry on ties).
pub fn extract_signal(x_bar: &DenseMatrix) -> Result<SignalEstimate, RecoveryError> {
    let (value, vector, clamped) = match linalg::dominant_eigenpair(x_bar, EIGEN_TOL, EIGEN_MAX_ITER) {
        Ok(p) => (p.value, p.vector, false),
        Err(LinalgError::NegativeDominant { value, vector }) => (value, vector, true),
        Err(e) => return Err(e.into()),
    };
    let scale = value.max(0.0).sqrt();
    let mut x: Vec<f64> = vector.iter().map(|v| scale * v).collect();
    let lead = x
        .iter()
        .copied()
        .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
    if lead < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(SignalEstimate {
        x_bar: x.into(),
        lambda_max: value,
        clamped,
    })
}

/// `‖X* − X̄‖_F² / ‖X*‖_F²`
pub fn nmse_matrix(x_star: &DenseMatrix, x_bar: &DenseMatrix) -> Result<f64, RecoveryError> {
    if (x_star.rows(), x_star.cols()) != (x_bar.rows(), x_bar.cols()) {
        return Err(RecoveryError::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            x_star.rows(),
            x_star.cols(),
            x_bar.rows(),
            x_bar.cols()
        )));
    }
    nmse_vec(x_star.as_slice(), x_bar.as_slice())
}

/// `‖a* − a‖² / ‖a*‖²` over flat storage; the matrix NMSE of two
/// vectorized matrices.
pub fn nmse_vec(reference: &[f64], estimate: &[f64]) -> Result<f64, RecoveryError> {
    if reference.len() != estimate.len() {
        return Err(RecoveryError::ShapeMismatch(format!(
            "lengths {} and {}",
            reference.len(),
            estimate.len()
        )));
    }
    let denom = linalg::norm_sq(reference);
    if denom == 0.0 {
        return Err(RecoveryError::ZeroReference);
    }
    Ok(linalg::dist_sq(reference, estimate) / denom)
}

/// `min_{s=±1} ‖x* − s x̄‖² / ‖x*‖²`
pub fn nmse_signal(x_star: &[f64], x_bar: &[f64]) -> Result<f64, RecoveryError> {
    let plus = nmse_vec(x_star, x_bar)?;
    let flipped: Vec<f64> = x_bar.iter().map(|v| -v).collect();
    let minus = nmse_vec(x_star, &flipped)?;
    Ok(plus.min(minus))
}

/// Everything reported about one recovered lifted matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedEstimate {
    pub x_bar_matrix: DenseMatrix,
    pub x_bar: DenseVector,
    pub lambda_max: f64,
    pub clamped: bool,
    pub nmse_matrix: f64,
    pub nmse_signal: f64,
}

impl LiftedEstimate {
    /// From a column-major `vec(X̄)` and the true signal.
    pub fn from_lifted(vec_x_bar: &[f64], x_star: &[f64]) -> Result<Self, RecoveryError> {
        let n = x_star.len();
        if vec_x_bar.len() != n * n {
            return Err(RecoveryError::ShapeMismatch(format!(
                "lifted vector of length {} for n = {n}",
                vec_x_bar.len()
            )));
        }
        let x_bar_matrix = DenseMatrix::from_col_major(n, n, vec_x_bar)?;
        let truth = DenseMatrix::outer(x_star, x_star);
        let nmse_matrix = nmse_matrix(&truth, &x_bar_matrix)?;
        let sig = extract_signal(&x_bar_matrix)?;
        let nmse_signal = nmse_signal(x_star, &sig.x_bar)?;
        Ok(Self {
            x_bar_matrix,
            x_bar: sig.x_bar,
            lambda_max: sig.lambda_max,
            clamped: sig.clamped,
            nmse_matrix,
            nmse_signal,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Full symmetric eigendecomposition by cyclic Jacobi; returns the
    /// eigenvector of the largest eigenvalue. Test oracle only.
    fn jacobi_top(m: &DenseMatrix) -> (f64, Vec<f64>) {
        let n = m.rows();
        let mut a = m.symmetrized();
        let mut v = DenseMatrix::identity(n);
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a.get(i, j).powi(2))
                .sum();
            if off < 1e-28 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.get(p, q);
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a.get(k, p), a.get(k, q));
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a.get(p, k), a.get(q, k));
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                    for k in 0..n {
                        let (vkp, vkq) = (v.get(k, p), v.get(k, q));
                        v.set(k, p, c * vkp - s * vkq);
                        v.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }
        let top = (0..n).max_by(|&i, &j| a.get(i, i).total_cmp(&a.get(j, j))).unwrap();
        (a.get(top, top), v.col(top))
    }

    fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn rank_one_example() {
        let est = extract_signal(&DenseMatrix::outer(&[3.0, 4.0], &[3.0, 4.0])).unwrap();
        assert!((est.x_bar[0] - 3.0).abs() < 1e-9 && (est.x_bar[1] - 4.0).abs() < 1e-9);
        assert!((est.lambda_max - 25.0).abs() < 1e-9);
        let est = extract_signal(&DenseMatrix::outer(&[-3.0, -4.0], &[-3.0, -4.0])).unwrap();
        assert!(est.x_bar[1] > 0.0);
    }

    #[test]
    fn zero_matrix_gives_zero_signal() {
        let est = extract_signal(&DenseMatrix::zeros(4, 4)).unwrap();
        assert!(est.x_bar.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_top_is_clamped() {
        let est = extract_signal(&DenseMatrix::from_diag(&[-1.0, -2.0])).unwrap();
        assert!(est.clamped);
        assert!(est.x_bar.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn perturbed_rank_one_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let mut x = gaussian(&mut rng, 8);
            let nrm = linalg::norm_sq(&x).sqrt();
            x.iter_mut().for_each(|v| *v /= nrm);
            let e = DenseMatrix::from_row_major(8, 8, gaussian(&mut rng, 64)).unwrap().symmetrized();
            let mut xb = DenseMatrix::outer(&x, &x);
            for r in 0..8 {
                for c in 0..8 {
                    xb.set(r, c, xb.get(r, c) + 0.01 * e.get(r, c));
                }
            }
            let est = extract_signal(&xb).unwrap();
            let rel = nmse_signal(&x, &est.x_bar).unwrap().sqrt();
            assert!(rel <= 0.05, "{rel}");
            let (lam, v) = jacobi_top(&xb);
            assert!((est.lambda_max - lam).abs() < 1e-8);
            let oracle: Vec<f64> = v.iter().map(|c| c * lam.sqrt()).collect();
            assert!(nmse_signal(&oracle, &est.x_bar).unwrap() < 1e-12);
        }
    }

    #[test]
    fn rank_one_round_trip_over_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for t in 0..100 {
            let n = 1 + (t * 7) % 64;
            let x = gaussian(&mut rng, n);
            let est = extract_signal(&DenseMatrix::outer(&x, &x)).unwrap();
            assert!(nmse_signal(&x, &est.x_bar).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn nmse_matrix_examples() {
        let i2 = DenseMatrix::identity(2);
        assert_eq!(nmse_matrix(&i2, &i2).unwrap(), 0.0);
        assert_eq!(nmse_matrix(&i2, &DenseMatrix::zeros(2, 2)).unwrap(), 1.0);
        assert_eq!(nmse_matrix(&i2, &DenseMatrix::from_diag(&[1.0, 0.0])).unwrap(), 0.5);
        assert_eq!(
            nmse_matrix(&DenseMatrix::zeros(2, 2), &i2),
            Err(RecoveryError::ZeroReference)
        );
        assert!(nmse_matrix(&i2, &DenseMatrix::identity(3)).is_err());
    }

    #[test]
    fn nmse_matrix_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DenseMatrix::from_row_major(3, 3, gaussian(&mut rng, 9)).unwrap();
        for c in [0.0, 0.5, 1.0, 2.0] {
            let mut cx = x.clone();
            cx.scale(c);
            let v = nmse_matrix(&x, &cx).unwrap();
            assert!((v - (1.0 - c) * (1.0f64 - c)).abs() < 1e-14, "c={c}");
        }
    }

    #[test]
    fn nmse_signal_examples() {
        assert_eq!(nmse_signal(&[1.0, -2.0], &[-1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(nmse_signal(&[1.0, -2.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(nmse_signal(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2.0);
        assert_eq!(nmse_signal(&[0.0, 0.0], &[0.0, 1.0]), Err(RecoveryError::ZeroReference));
    }

    #[test]
    fn lifted_estimate_of_truth() {
        let x = [0.0, 1.5, 0.0, -2.0];
        let est = LiftedEstimate::from_lifted(&crate::qcs::lift(&x), &x).unwrap();
        assert!(est.nmse_matrix == 0.0);
        assert!(est.nmse_signal < 1e-20);
        assert!(LiftedEstimate::from_lifted(&[1.0; 5], &x).is_err());
    }

    proptest! {
        #[test]
        fn nmse_signal_sign_invariant(
            a in prop::collection::vec(-10.0f64..10.0, 1..8),
            seed in any::<u64>(),
        ) {
            prop_assume!(linalg::norm_sq(&a) > 1e-6);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = gaussian(&mut rng, a.len());
            let na: Vec<f64> = a.iter().map(|v| -v).collect();
            let nb: Vec<f64> = b.iter().map(|v| -v).collect();
            let lhs = nmse_signal(&a, &b).unwrap();
            let rhs = nmse_signal(&na, &nb).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
            prop_assert!(lhs >= 0.0);
        }
    }
}
