//! Lifting: a quadratic measurement Tr(A X) becomes a linear one in vec(X).
//! The one-bit polyhedron built from those rows contains vec(x xᵀ).

use onebit_feas::linalg;
use onebit_feas::qcs::{build_polyhedron, generate_instance, lift, lifted_row, SensingKind, ThresholdConfig};
use onebit_feas::solvers::InequalitySystem;

fn main() {
    let inst = generate_instance(6, 2, 50, SensingKind::RankOne, 1).unwrap();
    let x = inst.x_true().as_slice();
    println!("x* = {:?} (support {:?})", x, inst.support());

    let lifted = lift(x);
    for j in 0..3 {
        let row = lifted_row(inst.ensemble(), j).unwrap();
        println!("y[{j}] = {:.6}, lifted row · vec(X*) = {:.6}", inst.y()[j], linalg::dot(row.as_slice(), &lifted));
    }

    let poly = build_polyhedron(&inst, 8, &ThresholdConfig::default(), 2).unwrap();
    println!(
        "{} inequalities in {} unknowns, {} blocks, {} bytes held",
        poly.rows(),
        poly.unknowns(),
        poly.blocks(),
        poly.storage_bytes()
    );
    let margin = poly.feasibility_margin(&inst.lifted_truth()).unwrap();
    println!("vec(X*): min margin {:.3e}, {} violated", margin.min_margin, margin.violated_count);
    let origin = poly.feasibility_margin(&vec![0.0; 36]).unwrap();
    println!("origin:  min margin {:.3e}, {} violated", origin.min_margin, origin.violated_count);
}
