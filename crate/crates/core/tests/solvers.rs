use onebit_feas::linalg::{self, DenseMatrix};
use onebit_feas::qcs::{build_polyhedron, generate_instance, SensingKind, ThresholdConfig};
use onebit_feas::solvers::{self, Algorithm, DenseSystem, InequalitySystem, Kaczmarz, SolverConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DenseMatrix::from_row_major(rows, cols, data).unwrap()
}

/// Consistent one-sided system with a known feasible point.
fn consistent(rows: usize, cols: usize, block_len: usize, seed: u64) -> (DenseSystem, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = gaussian(rows, cols, &mut rng);
    let xs: Vec<f64> = (0..cols).map(|_| rng.sample(StandardNormal)).collect();
    let rhs = b
        .matvec(&xs)
        .into_iter()
        .map(|v| v + rng.random::<f64>())
        .collect();
    (DenseSystem::new(b, rhs, block_len).unwrap(), xs)
}

fn two_sided(rows: usize, cols: usize, block_len: usize, seed: u64) -> (DenseSystem, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = gaussian(rows, cols, &mut rng);
    let xs: Vec<f64> = (0..cols).map(|_| rng.sample(StandardNormal)).collect();
    let bx = b.matvec(&xs);
    let mut data = b.as_slice().to_vec();
    data.extend(b.as_slice().iter().map(|v| -v));
    let mut rhs = bx.clone();
    rhs.extend(bx.iter().map(|v| -v));
    let m = DenseMatrix::from_row_major(2 * rows, cols, data).unwrap();
    (DenseSystem::new(m, rhs, block_len).unwrap(), xs)
}

#[test]
fn feasible_start_gives_flat_trace() {
    let inst = generate_instance(5, 2, 40, SensingKind::RankOne, 3).unwrap();
    let poly = build_polyhedron(&inst, 4, &ThresholdConfig::default(), 4).unwrap();
    let truth = inst.lifted_truth();
    // the Gaussian sketch is left out: a mix of satisfied inequalities can
    // be violated, so it may leave a feasible point
    for alg in [Algorithm::Rka, Algorithm::Skm, Algorithm::BlockSkm] {
        let mut cfg = SolverConfig::new(alg, 30);
        cfg.k_prime = Some(4);
        let (x, trace) = solvers::solve_from(&poly, &cfg, Some(&truth), truth.clone()).unwrap();
        assert_eq!(x, truth, "{}", alg.name());
        assert_eq!(trace.records.len(), 31);
        assert!(trace.records.iter().all(|r| r.max_pos_residual == 0.0 && r.err_sq == Some(0.0)));
    }
}

#[test]
fn gaussian_sketch_stays_put_at_the_solution_of_an_equality_system() {
    let (sys, xs) = two_sided(20, 4, 5, 6);
    let mut cfg = SolverConfig::new(Algorithm::GaussianSketchBlockSkm, 40);
    cfg.k_prime = Some(3);
    let (x, trace) = solvers::solve_from(&sys, &cfg, Some(&xs), xs.clone()).unwrap();
    assert!(linalg::dist_sq(&x, &xs) <= 1e-24);
    assert!(trace.records.iter().all(|r| r.max_pos_residual <= 1e-12));
}

#[test]
fn block_frequencies_follow_frobenius_weights() {
    // blocks of unequal weight: rows scaled per block
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut b = gaussian(12, 3, &mut rng);
    for r in 0..12 {
        let s = 1.0 + (r / 3) as f64;
        b.row_mut(r).iter_mut().for_each(|v| *v *= s);
    }
    let sys = DenseSystem::new(b, vec![0.0; 12], 3).unwrap();
    let total: f64 = (0..4).map(|l| sys.block_frobenius_sq(l)).sum();
    let k = Kaczmarz::new(&sys, 1.0).unwrap();
    let draws = 100_000;
    let mut counts = [0usize; 4];
    for _ in 0..draws {
        counts[k.sample_block(&mut rng)] += 1;
    }
    for l in 0..4 {
        let p = sys.block_frobenius_sq(l) / total;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        let dev = (counts[l] as f64 - draws as f64 * p).abs();
        assert!(dev <= 3.0 * sd, "block {l}: {} draws, expected {:.0}", counts[l], draws as f64 * p);
    }
}

#[test]
fn unit_relaxation_projects_onto_the_row() {
    let (sys, _) = consistent(20, 4, 5, 1);
    let mut k = Kaczmarz::new(&sys, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut x = vec![10.0; 4];
    for _ in 0..50 {
        let out = k.rka_step(&mut x, &mut rng);
        if out.updated {
            assert!(sys.residual(out.selected, &x).abs() <= 1e-9);
        }
    }
}

fn distances(sys: &DenseSystem, xs: &[f64], alg: Algorithm, k_prime: usize, lambda: f64, seed: u64) -> Vec<f64> {
    let mut cfg = SolverConfig::new(alg, 60);
    cfg.k_prime = Some(k_prime);
    cfg.lambda = lambda;
    cfg.seed = seed;
    let (_, trace) = solvers::solve(sys, &cfg, Some(xs)).unwrap();
    trace.records.iter().map(|r| r.err_sq.unwrap()).collect()
}

fn non_increasing(d: &[f64]) -> bool {
    d.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-24)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn single_row_methods_never_move_away_from_a_feasible_point(
        seed in 0u64..1000,
        lambda in 0.05f64..1.95,
    ) {
        let (sys, xs) = consistent(30, 5, 6, seed);
        for alg in [Algorithm::Rka, Algorithm::Skm, Algorithm::BlockSkm] {
            // k' = 1 makes the block step a single projection
            let d = distances(&sys, &xs, alg, 1, lambda, seed);
            prop_assert!(non_increasing(&d), "{}", alg.name());
        }
    }

    #[test]
    fn block_steps_never_move_away_on_two_sided_systems(seed in 0u64..1000, k_prime in 2usize..5) {
        let (sys, xs) = two_sided(24, 6, 8, seed);
        let d = distances(&sys, &xs, Algorithm::BlockSkm, k_prime, 1.0, seed);
        prop_assert!(non_increasing(&d));
    }

    #[test]
    fn solver_output_is_a_function_of_the_seed(seed in 0u64..1000) {
        let (sys, xs) = consistent(30, 5, 6, seed);
        for alg in Algorithm::ALL {
            let mut cfg = SolverConfig::new(alg, 25);
            cfg.k_prime = Some(3);
            cfg.seed = seed;
            let a = solvers::solve(&sys, &cfg, Some(&xs)).unwrap();
            let b = solvers::solve(&sys, &cfg, Some(&xs)).unwrap();
            prop_assert_eq!(a.0, b.0);
            prop_assert_eq!(a.1.records, b.1.records);
        }
    }
}

#[test]
fn block_step_on_orthogonal_rows_clears_the_violated_ones() {
    // top 3 residuals are rows 3, 2, 0; row 1 is already satisfied
    let b = DenseMatrix::identity(4);
    let sys = DenseSystem::new(b, vec![0.0; 4], 4).unwrap();
    let mut k = Kaczmarz::new(&sys, 1.0).unwrap();
    let mut x = vec![1.0, -1.0, 2.0, 3.0];
    k.block_skm_on(&mut x, 0, 3).unwrap();
    assert_eq!(x, vec![0.0, -1.0, 0.0, 0.0]);
}

