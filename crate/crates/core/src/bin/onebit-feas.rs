use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use onebit_feas::experiment::{self, ConfigError, ExperimentConfig, RunReport};

/// Experiment runner for one-bit quadratic compressed sensing.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides `out_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for independent trials (overrides `workers`).
        #[arg(long)]
        workers: Option<usize>,
        /// Master seed (overrides `seed`).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a config file and print its canonical form.
    Validate { config: PathBuf },
}

const EXIT_ERROR: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_BUDGET: u8 = 3;

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    ExperimentConfig::load(path).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        ExitCode::from(match e {
            ConfigError::Io { .. } => EXIT_ERROR,
            _ => EXIT_INVALID,
        })
    })
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                print!("{}", cfg.to_canonical_toml());
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Run {
            config,
            out,
            workers,
            seed,
        } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            cfg.out_dir = out.unwrap_or(cfg.out_dir);
            cfg.workers = workers.unwrap_or(cfg.workers);
            cfg.seed = seed.unwrap_or(cfg.seed);
            if let Err(e) = cfg.revalidate() {
                eprintln!("{e}");
                return ExitCode::from(EXIT_INVALID);
            }
            match experiment::run(&cfg) {
                Ok(report) => {
                    summarize(&report);
                    if report.budget_exceeded() {
                        eprintln!("target NMSE not reached within max_iters");
                        ExitCode::from(EXIT_BUDGET)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_ERROR)
                }
            }
        }
    }
}

fn summarize(report: &RunReport) {
    match report {
        RunReport::Sweep(r) => {
            for (m1, nmse) in r.m1.iter().zip(r.final_mean_nmse()) {
                println!("m1={m1:<5} final mean NMSE {nmse:.4e}");
            }
        }
        RunReport::Compare(r) => {
            for (alg, curve) in r.solvers.iter().zip(&r.curves) {
                let last = curve.last().map_or(f64::NAN, |p| p.mean_nmse);
                println!("{:<26} final mean NMSE {last:.4e}", alg.name());
            }
        }
        RunReport::Table1(s, trace) => {
            println!(
                "samples={} iterations={} cpu_seconds={:.4} nmse={:.4e} converged={}",
                s.samples, trace.iterations, s.cpu_seconds, s.nmse, s.converged
            );
        }
    }
}
