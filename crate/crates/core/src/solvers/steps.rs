//! Single iterations of the Kaczmarz-family solvers.
//!
//! All steps act on `B x ⪯ b` through an [`InequalitySystem`] and update the
//! iterate in place. Row selection and the update itself are separate
//! functions so the reductions between methods can be checked directly.

use std::cmp::Ordering;
use std::ops::Range;

use rand::seq::index;
use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};

use super::{InequalitySystem, SolverError};
use crate::linalg::{self, DenseMatrix, LinalgError};

/// `(row · x − rhs)^+`: the violation of `row · x ≤ rhs`.
pub fn projection_coefficient(row: &[f64], rhs: f64, x: &[f64]) -> f64 {
    (linalg::dot(row, x) - rhs).max(0.0)
}

/// `row · x − rhs` for an equality row, where either sign is a violation.
pub fn equality_projection_coefficient(row: &[f64], rhs: f64, x: &[f64]) -> f64 {
    linalg::dot(row, x) - rhs
}

/// Relaxed projection onto the half-space of row `i`:
/// `x ← x − λ (c_i x − b_i)^+ / ‖c_i‖² · c_i`. Returns the coefficient
/// `(c_i x − b_i)^+` before the update.
pub fn project_onto_row<S: InequalitySystem + ?Sized>(sys: &S, x: &mut [f64], i: usize, lambda: f64) -> f64 {
    let beta = sys.residual(i, x).max(0.0);
    if beta > 0.0 {
        sys.row_axpy(i, -lambda * beta / sys.row_norm_sq(i), x);
    }
    beta
}

/// Descending residual, then ascending index.
fn by_residual_desc(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// The `k` largest `(residual, row)` pairs in descending residual order,
/// ties broken by the lower row index.
pub fn top_k_rows(mut candidates: Vec<(f64, usize)>, k: usize) -> Vec<(f64, usize)> {
    let k = k.min(candidates.len());
    if k == 0 {
        return Vec::new();
    }
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, by_residual_desc);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(by_residual_desc);
    candidates
}

fn violated(mut rows: Vec<(f64, usize)>) -> Vec<(f64, usize)> {
    // sorted descending, so the violated rows form a prefix
    let keep = rows.iter().take_while(|(e, _)| *e > 0.0).count();
    rows.truncate(keep);
    rows
}

/// Outcome of one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    /// Row (RKA, SKM), block (Block SKM) or window start (Gaussian sketch)
    /// chosen by the step.
    pub selected: usize,
    /// Whether the iterate moved.
    pub updated: bool,
}

/// Block projection on an arbitrary candidate row set: take the `k_prime`
/// rows with the largest residuals, then
/// `x ← x − λ B′ᵀ (B′B′ᵀ)⁻¹ (B′x − b′)^+`.
///
/// Selected rows that are already satisfied are left out of `B′`. Keeping
/// them with a zeroed right-hand side would pin their residuals in place
/// through the off-diagonal Gram terms, which can move `x` away from the
/// feasible set. Returns whether `x` moved.
pub fn block_project<S: InequalitySystem + ?Sized>(
    sys: &S,
    x: &mut [f64],
    candidates: Vec<(f64, usize)>,
    k_prime: usize,
    lambda: f64,
) -> Result<bool, LinalgError> {
    let selected = violated(top_k_rows(candidates, k_prime));
    if selected.is_empty() {
        return Ok(false);
    }
    let violation: Vec<f64> = selected.iter().map(|(e, _)| *e).collect();
    let k = selected.len();
    let mut gram = DenseMatrix::zeros(k, k);
    for s in 0..k {
        for t in 0..=s {
            let g = sys.row_inner(selected[s].1, selected[t].1);
            gram.set(s, t, g);
            gram.set(t, s, g);
        }
    }
    let z = linalg::solve_gram(&gram, &violation)?;
    for (&(_, i), zt) in selected.iter().zip(z) {
        if zt != 0.0 {
            sys.row_axpy(i, -lambda * zt, x);
        }
    }
    Ok(true)
}

/// Same update as [`block_project`] for explicit rows (used for sketched
/// systems, whose rows are not rows of `B`).
pub fn block_project_dense(
    rows: &DenseMatrix,
    rhs: &[f64],
    x: &mut [f64],
    k_prime: usize,
    lambda: f64,
) -> Result<bool, LinalgError> {
    let candidates: Vec<(f64, usize)> = (0..rows.rows())
        .map(|t| (linalg::dot(rows.row(t), x) - rhs[t], t))
        .collect();
    let selected = violated(top_k_rows(candidates, k_prime));
    if selected.is_empty() {
        return Ok(false);
    }
    let violation: Vec<f64> = selected.iter().map(|(e, _)| *e).collect();
    let k = selected.len();
    let mut gram = DenseMatrix::zeros(k, k);
    for s in 0..k {
        for t in 0..=s {
            let g = linalg::dot(rows.row(selected[s].1), rows.row(selected[t].1));
            gram.set(s, t, g);
            gram.set(t, s, g);
        }
    }
    let z = linalg::solve_gram(&gram, &violation)?;
    for (&(_, t), zt) in selected.iter().zip(z) {
        if zt != 0.0 {
            linalg::axpy(-lambda * zt, rows.row(t), x);
        }
    }
    Ok(true)
}

/// Rows covered by the sketch window for placement index `alpha`.
///
/// The window starts at `p = k′·α`; `α` ranges over `1..=⌊rows/k′⌋` and
/// the last value wraps to `p = 0`, so every aligned window stays in range.
pub fn sketch_window(rows: usize, k_prime: usize, alpha: usize) -> Range<usize> {
    let windows = rows / k_prime;
    assert!(windows >= 1 && (1..=windows).contains(&alpha), "alpha out of range");
    let p = k_prime * (alpha % windows);
    p..p + k_prime
}

/// `(Sᵀ B, Sᵀ b) = (G B̂, G b̂)` for the window `B̂` of `sys` and a
/// `k′ × k′` mixing matrix `G`.
pub fn sketched_rows<S: InequalitySystem + ?Sized>(
    sys: &S,
    window: Range<usize>,
    g: &DenseMatrix,
) -> (DenseMatrix, Vec<f64>) {
    let k = window.len();
    assert_eq!((g.rows(), g.cols()), (k, k), "sketch matrix must be k'×k'");
    let mut rows = DenseMatrix::zeros(k, sys.unknowns());
    let mut rhs = vec![0.0; k];
    for t in 0..k {
        for (s, i) in window.clone().enumerate() {
            let w = g.get(t, s);
            if w != 0.0 {
                sys.row_axpy(i, w, rows.row_mut(t));
                rhs[t] += w * sys.rhs(i);
            }
        }
    }
    (rows, rhs)
}

/// Per-system state shared by the steps: relaxation and the samplers for
/// norm-weighted rows and Frobenius-weighted blocks.
pub struct Kaczmarz<'a, S: InequalitySystem + ?Sized> {
    sys: &'a S,
    lambda: f64,
    row_sampler: Option<WeightedIndex<f64>>,
    block_sampler: WeightedIndex<f64>,
    residuals: Vec<f64>,
}

impl<'a, S: InequalitySystem + ?Sized> Kaczmarz<'a, S> {
    pub fn new(sys: &'a S, lambda: f64) -> Result<Self, SolverError> {
        if !(lambda > 0.0 && lambda < 2.0) {
            return Err(SolverError::InvalidConfig(format!(
                "lambda = {lambda} is outside (0, 2)"
            )));
        }
        if sys.rows() == 0 || sys.unknowns() == 0 {
            return Err(SolverError::InvalidConfig("empty system".into()));
        }
        let block_sampler = WeightedIndex::new((0..sys.blocks()).map(|b| sys.block_frobenius_sq(b)))
            .map_err(|e| SolverError::InvalidConfig(format!("block weights: {e}")))?;
        Ok(Self {
            sys,
            lambda,
            row_sampler: None,
            block_sampler,
            residuals: Vec::new(),
        })
    }

    pub fn system(&self) -> &S {
        self.sys
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Row drawn with probability `‖c_i‖² / ‖B‖_F²`.
    pub fn sample_row<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let sys = self.sys;
        self.row_sampler
            .get_or_insert_with(|| {
                WeightedIndex::new((0..sys.rows()).map(|i| sys.row_norm_sq(i)))
                    .expect("row norms are positive")
            })
            .sample(rng)
    }

    /// Block drawn with probability `‖B_ℓ‖_F² / ‖B‖_F²`.
    pub fn sample_block<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.block_sampler.sample(rng)
    }

    /// Randomized Kaczmarz: project onto a norm-weighted random row.
    pub fn rka_step<R: Rng + ?Sized>(&mut self, x: &mut [f64], rng: &mut R) -> StepOutcome {
        let i = self.sample_row(rng);
        let beta = project_onto_row(self.sys, x, i, self.lambda);
        StepOutcome {
            selected: i,
            updated: beta > 0.0,
        }
    }

    /// Index of the largest residual among `gamma` rows drawn uniformly
    /// without replacement; ties go to the lower index.
    pub fn skm_select<R: Rng + ?Sized>(&self, x: &[f64], gamma: usize, rng: &mut R) -> usize {
        let sample = index::sample(rng, self.sys.rows(), gamma.clamp(1, self.sys.rows()));
        sample
            .iter()
            .map(|i| (self.sys.residual(i, x), i))
            .min_by(by_residual_desc)
            .map(|(_, i)| i)
            .expect("non-empty sample")
    }

    /// Sampling Kaczmarz-Motzkin step.
    pub fn skm_step<R: Rng + ?Sized>(&mut self, x: &mut [f64], gamma: usize, rng: &mut R) -> StepOutcome {
        let i = self.skm_select(x, gamma, rng);
        let beta = project_onto_row(self.sys, x, i, self.lambda);
        StepOutcome {
            selected: i,
            updated: beta > 0.0,
        }
    }

    /// Block SKM on a given block.
    pub fn block_skm_on(&mut self, x: &mut [f64], block: usize, k_prime: usize) -> Result<bool, LinalgError> {
        self.sys.block_residuals(block, x, &mut self.residuals);
        let start = self.sys.block_range(block).start;
        let candidates = self
            .residuals
            .iter()
            .enumerate()
            .map(|(t, &e)| (e, start + t))
            .collect();
        block_project(self.sys, x, candidates, k_prime, self.lambda)
    }

    /// Block SKM step: Frobenius-weighted block, top-`k′` residual rows,
    /// block pseudoinverse update. A singular Gram is retried once on a
    /// fresh block before it is reported.
    pub fn block_skm_step<R: Rng + ?Sized>(
        &mut self,
        x: &mut [f64],
        k_prime: usize,
        rng: &mut R,
    ) -> Result<StepOutcome, SolverError> {
        let mut block = self.sample_block(rng);
        let updated = match self.block_skm_on(x, block, k_prime) {
            Err(LinalgError::SingularGram) => {
                block = self.sample_block(rng);
                self.block_skm_on(x, block, k_prime)?
            }
            other => other?,
        };
        Ok(StepOutcome {
            selected: block,
            updated,
        })
    }

    /// Sketch-and-project step with an explicit sketch `G` on a window.
    pub fn sketch_step_with(
        &mut self,
        x: &mut [f64],
        window: Range<usize>,
        g: &DenseMatrix,
    ) -> Result<bool, LinalgError> {
        let k = window.len();
        let (rows, rhs) = sketched_rows(self.sys, window, g);
        block_project_dense(&rows, &rhs, x, k, self.lambda)
    }

    /// Gaussian-sketch Block SKM: a random aligned window of `k′` rows is
    /// mixed by a `k′ × k′` standard Gaussian matrix and the sketched rows
    /// are projected on as in [`block_project`].
    pub fn gaussian_sketch_step<R: Rng + ?Sized>(
        &mut self,
        x: &mut [f64],
        k_prime: usize,
        rng: &mut R,
    ) -> Result<StepOutcome, SolverError> {
        let windows = self.sys.rows() / k_prime;
        let mut attempt = 0;
        loop {
            let alpha = rng.random_range(1..=windows);
            let window = sketch_window(self.sys.rows(), k_prime, alpha);
            let start = window.start;
            let data = (0..k_prime * k_prime).map(|_| rng.sample(StandardNormal)).collect();
            let g = DenseMatrix::from_row_major(k_prime, k_prime, data).expect("finite samples");
            match self.sketch_step_with(x, window, &g) {
                Ok(updated) => {
                    return Ok(StepOutcome {
                        selected: start,
                        updated,
                    })
                }
                Err(LinalgError::SingularGram) if attempt == 0 => attempt += 1,
                Err(e) => return Err(e.into()),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::DenseSystem;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn system(rows: &[Vec<f64>], rhs: &[f64], block_len: usize) -> DenseSystem {
        DenseSystem::new(DenseMatrix::from_rows(rows).unwrap(), rhs.to_vec(), block_len).unwrap()
    }

    #[test]
    fn projection_coefficient_examples() {
        assert_eq!(projection_coefficient(&[1.0, 0.0], 1.0, &[2.0, 0.0]), 1.0);
        assert_eq!(projection_coefficient(&[1.0, 0.0], 1.0, &[-3.0, 5.0]), 0.0);
        assert_eq!(projection_coefficient(&[1.0, 2.0], 3.0, &[1.0, 1.0]), 0.0);
        assert_eq!(equality_projection_coefficient(&[1.0, 0.0], 1.0, &[-3.0, 5.0]), -4.0);
        assert_eq!(equality_projection_coefficient(&[1.0, 0.0], 1.0, &[2.0, 5.0]), 1.0);
    }

    #[test]
    fn full_relaxation_lands_on_the_hyperplane() {
        let sys = system(&[vec![1.0, 1.0]], &[1.0], 1);
        let mut x = vec![3.0, 2.0];
        let beta = project_onto_row(&sys, &mut x, 0, 1.0);
        assert_eq!(beta, 4.0);
        assert!(sys.residual(0, &x).abs() < 1e-15);
    }

    #[test]
    fn satisfied_rows_leave_x_alone() {
        let sys = system(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[5.0, 5.0], 1);
        let mut k = Kaczmarz::new(&sys, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut x = vec![1.0, 1.0];
        for _ in 0..10 {
            assert!(!k.rka_step(&mut x, &mut rng).updated);
            assert!(!k.skm_step(&mut x, 2, &mut rng).updated);
            assert!(!k.block_skm_step(&mut x, 1, &mut rng).unwrap().updated);
        }
        assert_eq!(x, vec![1.0, 1.0]);
    }

    #[test]
    fn half_relaxation_halves_the_residual() {
        let sys = system(&[vec![2.0, 0.0]], &[0.0], 1);
        let mut x = vec![2.0, 0.0];
        assert_eq!(sys.residual(0, &x), 4.0);
        project_onto_row(&sys, &mut x, 0, 0.5);
        assert_eq!(sys.residual(0, &x), 2.0);
    }

    #[test]
    fn full_skm_picks_the_worst_row() {
        let sys = system(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]], &[0.0, 0.0, 0.0], 3);
        let k = Kaczmarz::new(&sys, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            assert_eq!(k.skm_select(&[1.0, 3.0], 3, &mut rng), 2);
        }
        // tie between rows 0 and 1 goes to row 0
        let sys = system(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0], 2);
        let k = Kaczmarz::new(&sys, 1.0).unwrap();
        assert_eq!(k.skm_select(&[1.0, 1.0], 2, &mut rng), 0);
    }

    #[test]
    fn top_k_is_sorted_with_index_ties() {
        let top = top_k_rows(vec![(1.0, 4), (3.0, 1), (3.0, 0), (-2.0, 2), (2.0, 3)], 3);
        assert_eq!(top, vec![(3.0, 0), (3.0, 1), (2.0, 3)]);
        assert_eq!(top_k_rows(vec![(1.0, 0)], 5), vec![(1.0, 0)]);
    }

    #[test]
    fn block_single_row_projection() {
        let sys = system(&[vec![2.0, 0.0]], &[2.0], 1);
        let mut k = Kaczmarz::new(&sys, 1.0).unwrap();
        let mut x = vec![3.0, 0.0];
        assert!(k.block_skm_on(&mut x, 0, 1).unwrap());
        assert_eq!(x, vec![1.0, 0.0]);
    }

    #[test]
    fn block_projection_onto_two_orthonormal_rows() {
        let sys = system(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], &[1.0, -1.0], 2);
        let mut k = Kaczmarz::new(&sys, 1.0).unwrap();
        let mut x = vec![4.0, 2.0, 7.0];
        k.block_skm_on(&mut x, 0, 2).unwrap();
        assert!(sys.residual(0, &x).abs() < 1e-12);
        assert!(sys.residual(1, &x).abs() < 1e-12);
        // direct solve of the projection onto both hyperplanes
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] + 1.0).abs() < 1e-12 && x[2] == 7.0);
    }

    #[test]
    fn sketch_window_placement() {
        assert_eq!(sketch_window(6, 2, 1), 2..4);
        assert_eq!(sketch_window(6, 2, 2), 4..6);
        assert_eq!(sketch_window(6, 2, 3), 0..2);
        assert_eq!(sketch_window(7, 3, 2), 0..3);
    }

    #[test]
    fn identity_sketch_matches_block_window() {
        let sys = system(
            &[vec![1.0, 2.0, 0.5], vec![-1.0, 0.5, 1.0], vec![0.3, -0.7, 2.0], vec![1.5, 1.0, -1.0]],
            &[0.1, -0.2, 0.0, 0.3],
            2,
        );
        let x0 = vec![1.0, -2.0, 3.0];
        let mut k = Kaczmarz::new(&sys, 1.0).unwrap();
        let mut a = x0.clone();
        k.sketch_step_with(&mut a, 2..4, &DenseMatrix::identity(2)).unwrap();
        let mut b = x0.clone();
        k.block_skm_on(&mut b, 1, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_relaxation_is_rejected() {
        let sys = system(&[vec![1.0]], &[0.0], 1);
        assert!(Kaczmarz::new(&sys, 2.0).is_err());
        assert!(Kaczmarz::new(&sys, 0.0).is_err());
    }
}
