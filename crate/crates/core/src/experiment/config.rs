use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::qcs::{SensingKind, ThresholdConfig};
use crate::solvers::{Algorithm, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    /// NMSE against iterations for several `m1`, rank-one sensing.
    Fig1,
    /// As `Fig1` with full-rank sensing.
    Fig2,
    /// RKA, SKM and Block SKM on one plain linear one-bit system.
    Fig3,
    /// Block SKM run to a signal NMSE target, with samples and time.
    Table1,
}

impl ExperimentId {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fig1 => "fig1",
            Self::Fig2 => "fig2",
            Self::Fig3 => "fig3",
            Self::Table1 => "table1",
        }
    }
}

pub const DEFAULT_TARGET_NMSE: f64 = 5e-5;

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub m1: Vec<usize>,
    pub kind: SensingKind,
    pub trials: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub log_stride: usize,
    pub workers: usize,
    pub record_wall_time: bool,
    pub dump_instances: bool,
    /// Signal NMSE that counts as success in `table1`.
    pub target_nmse: f64,
    pub thresholds: ThresholdConfig,
    pub solvers: Vec<SolverConfig>,
}

/// Everything optional, so that missing fields are reported together with
/// the other violations instead of as a parse error.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<ExperimentId>,
    n: Option<usize>,
    k: Option<usize>,
    m: Option<usize>,
    m1: Option<Vec<usize>>,
    kind: Option<SensingKind>,
    trials: Option<usize>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    log_stride: Option<usize>,
    workers: Option<usize>,
    record_wall_time: Option<bool>,
    dump_instances: Option<bool>,
    target_nmse: Option<f64>,
    thresholds: Option<ThresholdConfig>,
    solvers: Option<Vec<SolverConfig>>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Validation(Violations),
}

/// All violations found in one config.
#[derive(Debug, Clone, PartialEq)]
pub struct Violations(pub Vec<String>);

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} validation error(s)", self.0.len())?;
        for v in &self.0 {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

impl ConfigError {
    pub fn violations(&self) -> &[String] {
        match self {
            Self::Validation(v) => &v.0,
            _ => &[],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        raw.validate()
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Canonical TOML: every field spelled out, fixed order.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Re-runs validation, e.g. after command-line overrides.
    pub fn revalidate(&self) -> Result<(), ConfigError> {
        Self::from_toml_str(&self.to_canonical_toml()).map(|_| ())
    }

    /// One-bit samples `m · m1` for the `i`-th sweep point.
    pub fn samples(&self, i: usize) -> usize {
        self.m * self.m1[i]
    }
}

impl RawConfig {
    fn validate(self) -> Result<ExperimentConfig, ConfigError> {
        let mut v = Vec::new();
        let mut need = |name: &str, present: bool| {
            if !present {
                v.push(format!("missing field `{name}`"));
            }
        };
        need("experiment", self.experiment.is_some());
        need("n", self.n.is_some());
        need("m", self.m.is_some());
        need("m1", self.m1.is_some());
        need("trials", self.trials.is_some());
        need("seed", self.seed.is_some());
        need("solvers", self.solvers.is_some());

        let (has_m1, has_solvers) = (self.m1.is_some(), self.solvers.is_some());
        let experiment = self.experiment.unwrap_or(ExperimentId::Fig1);
        let n = self.n.unwrap_or(1);
        let k = self.k.unwrap_or(n);
        let m = self.m.unwrap_or(1);
        let m1 = self.m1.unwrap_or_default();
        let kind = self.kind.unwrap_or(match experiment {
            ExperimentId::Fig2 => SensingKind::FullRank,
            _ => SensingKind::RankOne,
        });
        let trials = self.trials.unwrap_or(1);
        let solvers = self.solvers.unwrap_or_default();
        let thresholds = self.thresholds.unwrap_or_default();
        let target_nmse = self.target_nmse.unwrap_or(DEFAULT_TARGET_NMSE);
        let log_stride = self.log_stride.unwrap_or(1);
        let workers = self.workers.unwrap_or(1);

        if n == 0 {
            v.push("n must be at least 1".into());
        }
        if k == 0 || k > n {
            v.push(format!("k = {k} must satisfy 1 <= k <= n = {n}"));
        }
        if m == 0 {
            v.push("m must be at least 1".into());
        }
        if has_m1 && m1.is_empty() {
            v.push("m1 list must be non-empty".into());
        }
        if m1.contains(&0) {
            v.push("m1 entries must be at least 1".into());
        }
        if trials == 0 {
            v.push("trials must be at least 1".into());
        }
        if log_stride == 0 {
            v.push("log_stride must be at least 1".into());
        }
        if workers == 0 {
            v.push("workers must be at least 1".into());
        }
        if !(target_nmse > 0.0) {
            v.push(format!("target_nmse = {target_nmse} must be positive"));
        }
        if let Some(r) = thresholds.dynamic_range {
            if !(r > 0.0 && r.is_finite()) {
                v.push(format!("thresholds.dynamic_range = {r} must be positive and finite"));
            }
        }
        if !(thresholds.noise_std >= 0.0 && thresholds.noise_std.is_finite()) {
            v.push(format!("thresholds.noise_std = {} must be non-negative", thresholds.noise_std));
        }
        if has_solvers && solvers.is_empty() {
            v.push("solvers list must be non-empty".into());
        }
        for (i, s) in solvers.iter().enumerate() {
            for msg in s.violations() {
                v.push(format!("solvers[{i}]: {msg}"));
            }
        }

        match experiment {
            ExperimentId::Fig1 | ExperimentId::Fig2 | ExperimentId::Table1 => {
                if experiment == ExperimentId::Fig1 && kind != SensingKind::RankOne {
                    v.push("fig1 requires kind = \"rank_one\"".into());
                }
                if experiment == ExperimentId::Fig2 && kind != SensingKind::FullRank {
                    v.push("fig2 requires kind = \"full_rank\"".into());
                }
                if solvers.len() > 1 {
                    v.push(format!("{} takes a single solver", experiment.name()));
                }
                if experiment == ExperimentId::Table1 {
                    if m1.len() > 1 {
                        v.push("table1 takes a single m1 value".into());
                    }
                    if trials != 1 {
                        v.push("table1 takes trials = 1".into());
                    }
                }
            }
            ExperimentId::Fig3 => {
                if m1.len() > 1 {
                    v.push("fig3 takes a single m1 value".into());
                }
                let mut seen = Vec::new();
                for s in &solvers {
                    if seen.contains(&s.algorithm) {
                        v.push(format!("solver `{}` listed twice", s.algorithm.name()));
                    }
                    seen.push(s.algorithm);
                }
            }
        }
        for (i, s) in solvers.iter().enumerate() {
            let unknowns = if experiment == ExperimentId::Fig3 { n } else { n * n };
            if let Some(kp) = s.k_prime {
                if matches!(s.algorithm, Algorithm::BlockSkm | Algorithm::GaussianSketchBlockSkm)
                    && unknowns > 1
                    && kp >= unknowns
                {
                    v.push(format!("solvers[{i}]: k_prime = {kp} must be below the {unknowns} unknowns"));
                }
            }
        }

        if !v.is_empty() {
            return Err(ConfigError::Validation(Violations(v)));
        }
        Ok(ExperimentConfig {
            experiment,
            n,
            k,
            m,
            m1,
            kind,
            trials,
            seed: self.seed.unwrap_or_default(),
            out_dir: self
                .out_dir
                .unwrap_or_else(|| PathBuf::from(format!("out/{}", experiment.name()))),
            log_stride,
            workers,
            record_wall_time: self.record_wall_time.unwrap_or(false),
            dump_instances: self.dump_instances.unwrap_or(false),
            target_nmse,
            thresholds,
            solvers,
        })
    }
}
