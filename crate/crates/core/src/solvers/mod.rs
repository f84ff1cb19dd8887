//! Kaczmarz-family solvers for linear feasibility problems `B x ⪯ b`.
//!
//! [`solve`] drives one of four step rules (see [`Algorithm`]) over any
//! [`InequalitySystem`] and records a [`SolverTrace`] at a fixed stride.

pub mod bounds;
pub mod steps;
pub mod system;
pub mod trace;

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, LinalgError};

pub use bounds::{block_rate_bound, skm_bound};
pub use steps::{projection_coefficient, Kaczmarz, StepOutcome};
pub use system::{DenseSystem, InequalitySystem, SystemError};
pub use trace::{SolverTrace, Termination, TraceRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid rate: {0}")]
    InvalidRate(String),
    #[error("iterate became non-finite at iteration {iter}")]
    NonFinite { iter: usize },
    #[error("ground truth has length {got}, system has {expected} unknowns")]
    TruthLength { expected: usize, got: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Rka,
    Skm,
    BlockSkm,
    GaussianSketchBlockSkm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Self::Rka, Self::Skm, Self::BlockSkm, Self::GaussianSketchBlockSkm];

    pub fn name(self) -> &'static str {
        match self {
            Self::Rka => "rka",
            Self::Skm => "skm",
            Self::BlockSkm => "block_skm",
            Self::GaussianSketchBlockSkm => "gaussian_sketch_block_skm",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }
}

fn default_lambda() -> f64 {
    1.0
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// SKM sample size; `min(rows, unknowns)` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<usize>,
    /// Block row-selection size; `max(1, min(unknowns/8, 128))` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_prime: Option<usize>,
    pub max_iters: usize,
    /// Stop once the largest positive residual is at most this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_margin: Option<f64>,
    /// Stop once `‖x − x_true‖² / ‖x_true‖²` is at most this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_nmse: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_stride")]
    pub log_stride: usize,
    /// Wall-clock measurements make outputs run-dependent, so they are off
    /// unless asked for.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, max_iters: usize) -> Self {
        Self {
            algorithm,
            lambda: default_lambda(),
            gamma: None,
            k_prime: None,
            max_iters,
            tol_margin: None,
            tol_nmse: None,
            seed: 0,
            log_stride: default_stride(),
            record_wall_time: false,
        }
    }

    /// Checks that do not depend on the system. Returns every violation.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.lambda > 0.0 && self.lambda < 2.0) {
            v.push(format!("lambda = {} must lie in (0, 2)", self.lambda));
        }
        if self.gamma == Some(0) {
            v.push("gamma must be at least 1".into());
        }
        if self.k_prime == Some(0) {
            v.push("k_prime must be at least 1".into());
        }
        if self.log_stride == 0 {
            v.push("log_stride must be at least 1".into());
        }
        if let Some(t) = self.tol_margin {
            if !(t >= 0.0) {
                v.push(format!("tol_margin = {t} must be non-negative"));
            }
        }
        if let Some(t) = self.tol_nmse {
            if !(t >= 0.0) {
                v.push(format!("tol_nmse = {t} must be non-negative"));
            }
        }
        v
    }

    pub fn gamma_for<S: InequalitySystem + ?Sized>(&self, sys: &S) -> usize {
        self.gamma.unwrap_or_else(|| sys.rows().min(sys.unknowns()).max(1))
    }

    pub fn k_prime_for<S: InequalitySystem + ?Sized>(&self, sys: &S) -> usize {
        self.k_prime.unwrap_or_else(|| (sys.unknowns() / 8).clamp(1, 128))
    }

    /// Full validation against a concrete system.
    pub fn validate_for<S: InequalitySystem + ?Sized>(&self, sys: &S) -> Result<(), SolverError> {
        let mut v = self.violations();
        match self.algorithm {
            Algorithm::Skm => {
                let g = self.gamma_for(sys);
                if g > sys.rows() {
                    v.push(format!("gamma = {g} exceeds the {} rows", sys.rows()));
                }
            }
            Algorithm::BlockSkm | Algorithm::GaussianSketchBlockSkm => {
                let k = self.k_prime_for(sys);
                if k >= sys.unknowns() && sys.unknowns() > 1 {
                    v.push(format!("k_prime = {k} must be below the {} unknowns", sys.unknowns()));
                }
                if self.algorithm == Algorithm::GaussianSketchBlockSkm && k > sys.rows() {
                    v.push(format!("k_prime = {k} exceeds the {} rows", sys.rows()));
                }
            }
            Algorithm::Rka => {}
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(SolverError::InvalidConfig(v.join("; ")))
        }
    }
}

/// Solve from the origin.
pub fn solve<S: InequalitySystem + ?Sized>(
    sys: &S,
    cfg: &SolverConfig,
    truth: Option<&[f64]>,
) -> Result<(Vec<f64>, SolverTrace), SolverError> {
    solve_from(sys, cfg, truth, vec![0.0; sys.unknowns()])
}

pub fn solve_from<S: InequalitySystem + ?Sized>(
    sys: &S,
    cfg: &SolverConfig,
    truth: Option<&[f64]>,
    x0: Vec<f64>,
) -> Result<(Vec<f64>, SolverTrace), SolverError> {
    solve_with_monitor(sys, cfg, truth, x0, |_, _| false)
}

/// Solve with a caller check run at every logged iteration; returning
/// `true` stops the run with [`Termination::Monitor`].
pub fn solve_with_monitor<S, F>(
    sys: &S,
    cfg: &SolverConfig,
    truth: Option<&[f64]>,
    mut x: Vec<f64>,
    mut monitor: F,
) -> Result<(Vec<f64>, SolverTrace), SolverError>
where
    S: InequalitySystem + ?Sized,
    F: FnMut(usize, &[f64]) -> bool,
{
    cfg.validate_for(sys)?;
    if x.len() != sys.unknowns() {
        return Err(SolverError::InvalidConfig(format!(
            "start vector has length {}, system has {} unknowns",
            x.len(),
            sys.unknowns()
        )));
    }
    if let Some(t) = truth {
        if t.len() != sys.unknowns() {
            return Err(SolverError::TruthLength {
                expected: sys.unknowns(),
                got: t.len(),
            });
        }
    }
    let truth_norm_sq = truth.map(linalg::norm_sq);
    let gamma = cfg.gamma_for(sys);
    let k_prime = cfg.k_prime_for(sys);
    let mut stepper = Kaczmarz::new(sys, cfg.lambda)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::new();
    let mut elapsed = Duration::ZERO;

    let mut check = |iter: usize, x: &[f64], selected: Option<usize>, elapsed: Duration| {
        let err_sq = truth.map(|t| linalg::dist_sq(x, t));
        let max_pos = sys.max_positive_residual(x);
        records.push(TraceRecord {
            iter,
            err_sq,
            max_pos_residual: max_pos,
            selected,
            wall_ns: elapsed.as_nanos() as u64,
        });
        if cfg.tol_margin.is_some_and(|t| max_pos <= t) {
            return Some(Termination::Feasible);
        }
        if let (Some(tol), Some(e), Some(nrm)) = (cfg.tol_nmse, err_sq, truth_norm_sq) {
            if nrm > 0.0 && e / nrm <= tol {
                return Some(Termination::NmseReached);
            }
        }
        if monitor(iter, x) {
            return Some(Termination::Monitor);
        }
        None
    };

    let mut termination = check(0, &x, None, elapsed);
    let mut iterations = 0;
    while termination.is_none() && iterations < cfg.max_iters {
        iterations += 1;
        let start = cfg.record_wall_time.then(Instant::now);
        let outcome = match cfg.algorithm {
            Algorithm::Rka => stepper.rka_step(&mut x, &mut rng),
            Algorithm::Skm => stepper.skm_step(&mut x, gamma, &mut rng),
            Algorithm::BlockSkm => stepper.block_skm_step(&mut x, k_prime, &mut rng)?,
            Algorithm::GaussianSketchBlockSkm => stepper.gaussian_sketch_step(&mut x, k_prime, &mut rng)?,
        };
        if let Some(s) = start {
            elapsed += s.elapsed();
        }
        if outcome.updated && !x.iter().all(|v| v.is_finite()) {
            return Err(SolverError::NonFinite { iter: iterations });
        }
        if iterations % cfg.log_stride == 0 || iterations == cfg.max_iters {
            termination = check(iterations, &x, Some(outcome.selected), elapsed);
        }
    }
    let trace = SolverTrace {
        records,
        iterations,
        wall_time: elapsed,
        termination: termination.unwrap_or(Termination::MaxIters),
    };
    Ok((x, trace))
}
