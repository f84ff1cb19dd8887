use std::io::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::io::fmt_float;

/// Header of the per-run trace CSV.
pub const TRACE_HEADER: [&str; 5] = ["iter", "err_sq", "max_pos_residual", "selected_block", "wall_ns"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    /// `‖x − x_true‖²` when the truth is known.
    pub err_sq: Option<f64>,
    pub max_pos_residual: f64,
    pub selected: Option<usize>,
    /// Cumulative time spent inside solver steps; zero when timing is off.
    pub wall_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxIters,
    Feasible,
    NmseReached,
    /// Stopped by a caller-supplied monitor.
    Monitor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
    pub iterations: usize,
    pub wall_time: Duration,
    pub termination: Termination,
}

impl SolverTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.iter.to_string(),
                r.err_sq.map(fmt_float).unwrap_or_default(),
                fmt_float(r.max_pos_residual),
                r.selected.map(|s| s.to_string()).unwrap_or_default(),
                r.wall_ns.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
