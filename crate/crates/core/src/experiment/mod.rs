//! Config-driven experiment runs and their CSV/JSON outputs.
//!
//! Every trial draws its randomness from `derive_seed(seed, trial)`, so
//! results do not depend on how trials are scheduled across workers.
//! Trials run (optionally in parallel) to completion first; all files are
//! then written from the collected results by the calling thread.
//!
//! Output files, relative to the output directory:
//!
//! | experiment | files |
//! |---|---|
//! | fig1, fig2 | `nmse_vs_iter_m1.csv` (`m1,iter,mean_nmse`), `traces/m1_<m1>_trial_<t>.csv` |
//! | fig3 | `fig3_<solver>.csv` (`iter,mean_nmse`), `traces/<solver>_trial_<t>.csv` |
//! | table1 | `table1.json` (`samples`, `cpu_seconds`, `nmse`, `converged`), `traces/table1.csv` |
//!
//! Each run also writes its canonical `config.toml`.

mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{ConfigError, ExperimentConfig, ExperimentId, Violations, DEFAULT_TARGET_NMSE};

use crate::io::{self, fmt_float, IoError};
use crate::linalg;
use crate::qcs::{self, build_polyhedron, generate_instance, Polyhedron, QcsError};
use crate::recovery::{LiftedEstimate, RecoveryError};
use crate::rng::derive_seed;
use crate::solvers::{self, Algorithm, SolverConfig, SolverError, SolverTrace};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Qcs(#[from] QcsError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{path}: {source}")]
    Fs {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// One point of a trial-averaged curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub iter: usize,
    pub mean_nmse: f64,
}

/// NMSE at each logged iteration of one trial.
pub type NmseCurve = Vec<(usize, f64)>;

/// `fig1`/`fig2` result: one curve per `m1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub m1: Vec<usize>,
    /// `curves[i]`: trial-averaged matrix NMSE for `m1[i]`.
    pub curves: Vec<Vec<CurvePoint>>,
    /// `trials[i][t]`: per-iteration matrix NMSE of trial `t` at `m1[i]`.
    pub trials: Vec<Vec<NmseCurve>>,
    pub traces: Vec<Vec<SolverTrace>>,
}

impl SweepResult {
    /// Trial-averaged final matrix NMSE per `m1`.
    pub fn final_mean_nmse(&self) -> Vec<f64> {
        self.trials.iter().map(|t| mean(t.iter().map(final_value))).collect()
    }
}

/// `fig3` result: one curve per solver.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareResult {
    pub solvers: Vec<Algorithm>,
    pub curves: Vec<Vec<CurvePoint>>,
    /// `trials[s][t]`: per-iteration signal NMSE of solver `s` on trial `t`.
    pub trials: Vec<Vec<NmseCurve>>,
    pub traces: Vec<Vec<SolverTrace>>,
}

impl CompareResult {
    /// Final signal NMSE of each trial, per solver.
    pub fn final_nmse(&self) -> Vec<Vec<f64>> {
        self.trials.iter().map(|t| t.iter().map(final_value).collect()).collect()
    }
}

/// Contents of `table1.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table1Summary {
    /// One-bit samples `m · m1`.
    pub samples: usize,
    /// Time inside solver iterations; zero unless wall time is recorded.
    pub cpu_seconds: f64,
    /// Signal NMSE at the last check.
    pub nmse: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunReport {
    Sweep(SweepResult),
    Compare(CompareResult),
    Table1(Table1Summary, SolverTrace),
}

impl RunReport {
    /// `table1` that missed its NMSE target within the iteration budget.
    pub fn budget_exceeded(&self) -> bool {
        matches!(self, Self::Table1(s, _) if !s.converged)
    }
}

fn final_value(curve: &NmseCurve) -> f64 {
    curve.last().map_or(f64::NAN, |p| p.1)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    sum / count as f64
}

/// Average of per-trial curves on the union of their logged iterations. A
/// trial that stopped early contributes its last value to later points.
pub fn mean_curve(trials: &[NmseCurve]) -> Vec<CurvePoint> {
    let mut grid: Vec<usize> = trials.iter().flat_map(|c| c.iter().map(|p| p.0)).collect();
    grid.sort_unstable();
    grid.dedup();
    let mut cursors = vec![0usize; trials.len()];
    grid.into_iter()
        .map(|iter| {
            let values = trials.iter().zip(cursors.iter_mut()).map(|(curve, pos)| {
                while *pos + 1 < curve.len() && curve[*pos + 1].0 <= iter {
                    *pos += 1;
                }
                curve[*pos].1
            });
            CurvePoint {
                iter,
                mean_nmse: mean(values),
            }
        })
        .collect()
}

fn nmse_curve(trace: &SolverTrace, truth_norm_sq: f64) -> NmseCurve {
    trace
        .records
        .iter()
        .map(|r| (r.iter, r.err_sq.unwrap_or(f64::NAN) / truth_norm_sq))
        .collect()
}

/// Seeds of one trial: problem, thresholds, solver.
#[derive(Debug, Clone, Copy)]
struct TrialSeeds {
    instance: u64,
    thresholds: u64,
    solver: u64,
}

impl TrialSeeds {
    fn new(master: u64, trial: usize) -> Self {
        let t = derive_seed(master, trial as u64);
        Self {
            instance: derive_seed(t, 0),
            thresholds: derive_seed(t, 1),
            solver: derive_seed(t, 2),
        }
    }
}

fn trial_solver(cfg: &ExperimentConfig, base: &SolverConfig, seed: u64) -> SolverConfig {
    let mut s = base.clone();
    s.seed = derive_seed(seed, base.seed);
    s.log_stride = cfg.log_stride;
    s.record_wall_time = cfg.record_wall_time;
    s
}

fn run_jobs<T, F>(workers: usize, count: usize, job: F) -> Result<Vec<T>, ExperimentError>
where
    T: Send,
    F: Fn(usize) -> Result<T, ExperimentError> + Send + Sync,
{
    if workers <= 1 {
        return (0..count).map(job).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    pool.install(|| (0..count).into_par_iter().map(job).collect())
}

/// Runs whichever experiment `cfg` names and writes its outputs.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport, ExperimentError> {
    match cfg.experiment {
        ExperimentId::Fig1 | ExperimentId::Fig2 => run_sweep(cfg).map(RunReport::Sweep),
        ExperimentId::Fig3 => run_fig3(cfg).map(RunReport::Compare),
        ExperimentId::Table1 => run_table1(cfg).map(|(s, t)| RunReport::Table1(s, t)),
    }
}

/// `fig1`: rank-one sensing, matrix NMSE against iterations per `m1`.
pub fn run_fig1(cfg: &ExperimentConfig) -> Result<SweepResult, ExperimentError> {
    expect_experiment(cfg, ExperimentId::Fig1)?;
    run_sweep(cfg)
}

/// `fig2`: as [`run_fig1`] with full-rank sensing.
pub fn run_fig2(cfg: &ExperimentConfig) -> Result<SweepResult, ExperimentError> {
    expect_experiment(cfg, ExperimentId::Fig2)?;
    run_sweep(cfg)
}

fn expect_experiment(cfg: &ExperimentConfig, id: ExperimentId) -> Result<(), ExperimentError> {
    if cfg.experiment != id {
        return Err(ConfigError::Validation(Violations(vec![format!(
            "config is for {}, not {}",
            cfg.experiment.name(),
            id.name()
        )]))
        .into());
    }
    Ok(())
}

struct SweepTrial {
    curve: NmseCurve,
    trace: SolverTrace,
    dump: Option<(qcs::ProblemInstance, Polyhedron)>,
}

/// For every `m1` and trial: a fresh instance and polyhedron solved by the
/// configured solver. Within one trial the instance and the threshold
/// sequences are shared across the `m1` sweep, so a larger `m1` adds
/// sequences to the smaller system instead of replacing them.
fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult, ExperimentError> {
    let base = &cfg.solvers[0];
    let jobs = cfg.m1.len() * cfg.trials;
    let outcomes = run_jobs(cfg.workers, jobs, |job| {
        let (i, trial) = (job / cfg.trials, job % cfg.trials);
        let seeds = TrialSeeds::new(cfg.seed, trial);
        let inst = generate_instance(cfg.n, cfg.k, cfg.m, cfg.kind, seeds.instance)?;
        let poly = build_polyhedron(&inst, cfg.m1[i], &cfg.thresholds, seeds.thresholds)?;
        let truth = inst.lifted_truth();
        let (_, trace) = solvers::solve(&poly, &trial_solver(cfg, base, seeds.solver), Some(&truth))?;
        let curve = nmse_curve(&trace, linalg::norm_sq(&truth));
        let dump = (cfg.dump_instances && trial == 0).then_some((inst, poly));
        Ok(SweepTrial { curve, trace, dump })
    })?;

    let out = &cfg.out_dir;
    create_dir(&out.join("traces"))?;
    write_config(cfg)?;
    let mut result = SweepResult {
        m1: cfg.m1.clone(),
        curves: Vec::new(),
        trials: Vec::new(),
        traces: Vec::new(),
    };
    let mut outcomes = outcomes.into_iter();
    for &m1 in &cfg.m1 {
        let mut curves = Vec::new();
        let mut traces = Vec::new();
        for trial in 0..cfg.trials {
            let o = outcomes.next().expect("one outcome per job");
            write_trace(&out.join(format!("traces/m1_{m1}_trial_{trial:03}.csv")), &o.trace)?;
            if let Some((inst, poly)) = &o.dump {
                io::write_instance_dump(&out.join(format!("instances/m1_{m1}")), inst, poly.record())?;
            }
            curves.push(o.curve);
            traces.push(o.trace);
        }
        result.curves.push(mean_curve(&curves));
        result.trials.push(curves);
        result.traces.push(traces);
    }
    write_csv(
        &out.join("nmse_vs_iter_m1.csv"),
        ["m1", "iter", "mean_nmse"],
        result.m1.iter().zip(&result.curves).flat_map(|(m1, curve)| {
            curve
                .iter()
                .map(move |p| vec![m1.to_string(), p.iter.to_string(), fmt_float(p.mean_nmse)])
        }),
    )?;
    Ok(result)
}

/// `fig3`: every configured solver on the same plain linear one-bit system
/// per trial; signal NMSE against iterations.
pub fn run_fig3(cfg: &ExperimentConfig) -> Result<CompareResult, ExperimentError> {
    expect_experiment(cfg, ExperimentId::Fig3)?;
    let outcomes = run_jobs(cfg.workers, cfg.trials, |trial| {
        let seeds = TrialSeeds::new(cfg.seed, trial);
        let lin = qcs::generate_linear_instance(cfg.n, cfg.k, cfg.m, seeds.instance)?;
        let poly = Polyhedron::from_measurements(lin.operator.clone(), &lin.y, cfg.m1[0], &cfg.thresholds, seeds.thresholds)?;
        let norm_sq = linalg::norm_sq(&lin.x_true);
        let mut runs = Vec::new();
        for base in &cfg.solvers {
            let (_, trace) = solvers::solve(&poly, &trial_solver(cfg, base, seeds.solver), Some(&lin.x_true))?;
            runs.push((nmse_curve(&trace, norm_sq), trace));
        }
        let dump = (cfg.dump_instances && trial == 0).then_some(poly);
        Ok((runs, dump))
    })?;

    let out = &cfg.out_dir;
    create_dir(&out.join("traces"))?;
    write_config(cfg)?;
    let solvers: Vec<Algorithm> = cfg.solvers.iter().map(|s| s.algorithm).collect();
    let mut trials = vec![Vec::new(); solvers.len()];
    let mut traces = vec![Vec::new(); solvers.len()];
    for (trial, (runs, dump)) in outcomes.into_iter().enumerate() {
        if let Some(poly) = dump {
            io::write_record(&out.join("instances"), poly.record())?;
        }
        for (s, (curve, trace)) in runs.into_iter().enumerate() {
            write_trace(&out.join(format!("traces/{}_trial_{trial:03}.csv", solvers[s].name())), &trace)?;
            trials[s].push(curve);
            traces[s].push(trace);
        }
    }
    let curves: Vec<Vec<CurvePoint>> = trials.iter().map(|t| mean_curve(t)).collect();
    for (alg, curve) in solvers.iter().zip(&curves) {
        write_csv(
            &out.join(format!("fig3_{}.csv", alg.name())),
            ["iter", "mean_nmse"],
            curve.iter().map(|p| vec![p.iter.to_string(), fmt_float(p.mean_nmse)]),
        )?;
    }
    Ok(CompareResult {
        solvers,
        curves,
        trials,
        traces,
    })
}

/// `table1`: the configured solver run until the signal NMSE reaches
/// `target_nmse` (checked every `log_stride` iterations) or the iteration
/// budget runs out. A missed target is reported in the summary, not as an
/// error.
pub fn run_table1(cfg: &ExperimentConfig) -> Result<(Table1Summary, SolverTrace), ExperimentError> {
    expect_experiment(cfg, ExperimentId::Table1)?;
    let seeds = TrialSeeds::new(cfg.seed, 0);
    let inst = generate_instance(cfg.n, cfg.k, cfg.m, cfg.kind, seeds.instance)?;
    let poly = build_polyhedron(&inst, cfg.m1[0], &cfg.thresholds, seeds.thresholds)?;
    let x_true = inst.x_true().as_slice();
    let mut last_nmse = f64::NAN;
    let signal_nmse = |x: &[f64]| LiftedEstimate::from_lifted(x, x_true).map(|e| e.nmse_signal);
    let scfg = trial_solver(cfg, &cfg.solvers[0], seeds.solver);
    let (x, trace) = solvers::solve_with_monitor(&poly, &scfg, Some(&inst.lifted_truth()), vec![0.0; cfg.n * cfg.n], |_, x| {
        // an unconverged eigen-solve just means "not there yet"
        match signal_nmse(x) {
            Ok(v) => {
                last_nmse = v;
                v <= cfg.target_nmse
            }
            Err(_) => false,
        }
    })?;
    let converged = trace.termination == solvers::Termination::Monitor;
    let nmse = if converged { last_nmse } else { signal_nmse(&x)? };
    let summary = Table1Summary {
        samples: cfg.samples(0),
        cpu_seconds: trace.wall_time.as_secs_f64(),
        nmse,
        converged,
    };

    let out = &cfg.out_dir;
    create_dir(&out.join("traces"))?;
    write_config(cfg)?;
    write_trace(&out.join("traces/table1.csv"), &trace)?;
    if cfg.dump_instances {
        io::write_instance_dump(&out.join("instances/table1"), &inst, poly.record())?;
    }
    let path = out.join("table1.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, json + "\n").map_err(|source| ExperimentError::Fs { path, source })?;
    Ok((summary, trace))
}

fn create_dir(path: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(path).map_err(|source| ExperimentError::Fs {
        path: path.to_path_buf(),
        source,
    })
}

fn write_config(cfg: &ExperimentConfig) -> Result<(), ExperimentError> {
    let path = cfg.out_dir.join("config.toml");
    fs::write(&path, cfg.to_canonical_toml()).map_err(|source| ExperimentError::Fs { path, source })
}

fn write_trace(path: &Path, trace: &SolverTrace) -> Result<(), ExperimentError> {
    let file = File::create(path).map_err(|source| ExperimentError::Fs {
        path: path.to_path_buf(),
        source,
    })?;
    trace.write_csv(BufWriter::new(file)).map_err(|source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn write_csv<const N: usize>(
    path: &Path,
    header: [&str; N],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), ExperimentError> {
    let csv_err = |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(|source| ExperimentError::Fs {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| ExperimentError::Fs {
        path: path.to_path_buf(),
        source,
    })
}
