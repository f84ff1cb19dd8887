//! Runs a shipped experiment config from code and prints its summary.
//!
//! cargo run --release --example run_experiment -- configs/fig3_desk.toml /tmp/fig3

use std::path::PathBuf;

use onebit_feas::experiment::{run, ExperimentConfig, RunReport};

fn main() {
    let mut args = std::env::args().skip(1);
    let config = args.next().unwrap_or_else(|| "configs/fig3_desk.toml".into());
    let out = args.next().map(PathBuf::from);

    let mut cfg = ExperimentConfig::load(config.as_ref()).unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(2);
    });
    if let Some(out) = out {
        cfg.out_dir = out;
    }
    match run(&cfg).unwrap() {
        RunReport::Sweep(r) => {
            for (m1, v) in r.m1.iter().zip(r.final_mean_nmse()) {
                println!("m1 = {m1:>4}: final mean matrix NMSE {v:.3e}");
            }
        }
        RunReport::Compare(r) => {
            for (alg, c) in r.solvers.iter().zip(&r.curves) {
                println!("{:<10} final mean signal NMSE {:.3e}", alg.name(), c.last().unwrap().mean_nmse);
            }
        }
        RunReport::Table1(s, t) => {
            println!("{} samples, {} iterations, NMSE {:.3e}, converged {}", s.samples, t.iterations, s.nmse, s.converged);
        }
    }
    println!("outputs in {}", cfg.out_dir.display());
}
