//! End to end: quadratic measurements, one-bit data, Block SKM on the
//! lifted polyhedron, then the signal from the dominant eigenpair.

use onebit_feas::qcs::{build_polyhedron, generate_instance, SensingKind, ThresholdConfig};
use onebit_feas::recovery::LiftedEstimate;
use onebit_feas::solvers::{solve_with_monitor, Algorithm, SolverConfig};

fn main() {
    let n = 12;
    let inst = generate_instance(n, 3, 1500, SensingKind::RankOne, 3).unwrap();
    let poly = build_polyhedron(&inst, 40, &ThresholdConfig::default(), 4).unwrap();
    let x_star = inst.x_true().as_slice();

    let mut cfg = SolverConfig::new(Algorithm::BlockSkm, 3000);
    cfg.k_prime = Some(24);
    cfg.log_stride = 50;
    let (x, trace) = solve_with_monitor(&poly, &cfg, Some(&inst.lifted_truth()), vec![0.0; n * n], |_, x| {
        LiftedEstimate::from_lifted(x, x_star).is_ok_and(|e| e.nmse_signal <= 5e-5)
    })
    .unwrap();

    let est = LiftedEstimate::from_lifted(&x, x_star).unwrap();
    println!("stopped after {} iterations ({:?})", trace.iterations, trace.termination);
    println!("matrix NMSE {:.3e}, signal NMSE {:.3e}", est.nmse_matrix, est.nmse_signal);
    println!("lambda_max {:.4}", est.lambda_max);
    for (a, b) in x_star.iter().zip(est.x_bar.as_slice()) {
        if *a != 0.0 {
            println!("  {a:+.4}  {b:+.4}");
        }
    }
}
