//! The four solvers on one plain linear one-bit system, same budget.
//! The Gaussian sketch mixes inequalities, and a mix of satisfied
//! inequalities need not be satisfied, so on one-sided systems like this
//! one it wanders; it is meant for equality-like (two-sided) systems.

use onebit_feas::qcs::{generate_linear_instance, Polyhedron, ThresholdConfig};
use onebit_feas::solvers::{solve, Algorithm, SolverConfig};

fn main() {
    let lin = generate_linear_instance(10, 10, 100, 5).unwrap();
    let poly = Polyhedron::from_measurements(lin.operator.clone(), &lin.y, 40, &ThresholdConfig::default(), 6).unwrap();
    let norm_sq: f64 = lin.x_true.iter().map(|v| v * v).sum();

    for alg in Algorithm::ALL {
        let mut cfg = SolverConfig::new(alg, 500);
        cfg.k_prime = Some(8);
        cfg.log_stride = 100;
        cfg.seed = 11;
        let (_, trace) = solve(&poly, &cfg, Some(&lin.x_true)).unwrap();
        let curve: Vec<String> = trace
            .records
            .iter()
            .map(|r| format!("{:.2e}", r.err_sq.unwrap() / norm_sq))
            .collect();
        println!("{:<26} {}", alg.name(), curve.join("  "));
    }
}
