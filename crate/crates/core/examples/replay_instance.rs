//! Writes an instance and its one-bit record to disk, reads them back and
//! solves the rebuilt polyhedron.

use onebit_feas::io::{read_instance_dump, write_instance_dump};
use onebit_feas::qcs::{build_polyhedron, generate_instance, Polyhedron, SensingKind, ThresholdConfig};
use onebit_feas::solvers::{solve, Algorithm, SolverConfig};

fn main() {
    let dir = std::env::temp_dir().join("onebit_replay");
    let inst = generate_instance(8, 2, 200, SensingKind::FullRank, 12).unwrap();
    let poly = build_polyhedron(&inst, 10, &ThresholdConfig::default(), 13).unwrap();
    write_instance_dump(&dir, &inst, poly.record()).unwrap();
    println!("dumped to {}", dir.display());

    let (inst2, record) = read_instance_dump(&dir).unwrap();
    let replayed = Polyhedron::from_record(inst2.ensemble().operator().clone(), record).unwrap();

    let mut cfg = SolverConfig::new(Algorithm::BlockSkm, 300);
    cfg.k_prime = Some(16);
    cfg.log_stride = 300;
    let (a, _) = solve(&poly, &cfg, None).unwrap();
    let (b, _) = solve(&replayed, &cfg, None).unwrap();
    println!("identical iterates after replay: {}", a == b);
}
