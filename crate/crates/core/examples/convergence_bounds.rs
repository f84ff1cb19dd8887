//! Observed SKM error next to its envelope, with the scaled condition
//! number computed from the matrix.

use onebit_feas::linalg::{scaled_condition_number, singular_values, DenseMatrix};
use onebit_feas::solvers::{skm_bound, block_rate_bound, solve, Algorithm, DenseSystem, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (rows, cols) = (100, 10);
    let b: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    let xs: Vec<f64> = (0..cols).map(|_| rng.sample(StandardNormal)).collect();
    let b = DenseMatrix::from_row_major(rows, cols, b).unwrap();
    let bx = b.matvec(&xs);
    // equalities written as two inequalities each
    let mut data = b.as_slice().to_vec();
    data.extend(b.as_slice().iter().map(|v| -v));
    let mut rhs = bx.clone();
    rhs.extend(bx.iter().map(|v| -v));
    let full = DenseMatrix::from_row_major(2 * rows, cols, data).unwrap();
    let sys = DenseSystem::new(full.clone(), rhs, 20).unwrap();

    let kappa = scaled_condition_number(&full).unwrap();
    let err0: f64 = xs.iter().map(|v| v * v).sum();
    println!("kappa = {kappa:.3}");

    let mut cfg = SolverConfig::new(Algorithm::Skm, 400);
    cfg.log_stride = 50;
    let (_, trace) = solve(&sys, &cfg, Some(&xs)).unwrap();
    for r in &trace.records {
        println!(
            "iter {:>4}: err {:.3e}  bound {:.3e}",
            r.iter,
            r.err_sq.unwrap(),
            skm_bound(kappa, 1.0, r.iter, err0)
        );
    }

    // the block rate has an unspecified constant; c = 1 for illustration
    let window = DenseMatrix::from_rows(&(0..8).map(|i| full.row(i).to_vec()).collect::<Vec<_>>()).unwrap();
    let sv = singular_values(&window.transpose());
    let frob: f64 = window.as_slice().iter().map(|v| v * v).sum();
    let sigma_min = sv.last().copied().unwrap();
    let rate = block_rate_bound(sigma_min * sigma_min, frob, 8, 1.0, 100, err0).unwrap();
    println!("block rate after 100 iterations (c = 1): {rate:.3e}");
}
