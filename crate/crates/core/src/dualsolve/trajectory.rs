use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::io::{fmt_f64, write_comment_header, write_f64_array};

/// Column names of the trajectory CSV, in order.
pub const CSV_COLUMNS: [&str; 6] = [
    "t",
    "objective",
    "constraint_residual_estimate",
    "mu_or_lambda_norm",
    "smoothed_mu",
    "wall_ms",
];

/// One solver iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub t: usize,
    /// Unregularized dual objective after the update (`b·λ` or `kμ`).
    pub objective: f64,
    /// Constraint residual of the estimate that drove this step:
    /// `max_i |a_i − b_i|` or `|t₁ − k|`.
    pub residual: f64,
    /// `‖λ‖₂` for the diagonal solver, raw `μ` for the trace solver.
    pub dual_norm: f64,
    pub smoothed_mu: Option<f64>,
    /// Estimate of `Tr X` (trace solver only).
    pub trace_estimate: Option<f64>,
    /// Estimate of `g''(μ)` (trace solver only).
    pub curvature: Option<f64>,
    pub wall_ms: f64,
}

/// Final dual variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DualPoint {
    Lambda(Vec<f64>),
    Mu(f64),
}

/// Per-iteration log of a solve, plus the final dual point.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveTrajectory {
    pub records: Vec<IterationRecord>,
    /// Configuration echo written into every output header.
    pub echo: Vec<(String, String)>,
    pub final_point: DualPoint,
    /// Average of `λ` over the last `⌊T/2⌋` iterates (diagonal solver).
    pub lambda_average: Option<Vec<f64>>,
    /// Raw `μ` after every iteration (trace solver).
    pub mu_history: Vec<f64>,
    /// `λ` after every iteration, when requested.
    pub snapshots: Option<Vec<Vec<f64>>>,
}

impl SolveTrajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_lambda(&self) -> Option<&[f64]> {
        match &self.final_point {
            DualPoint::Lambda(l) => Some(l),
            DualPoint::Mu(_) => None,
        }
    }

    pub fn final_mu(&self) -> Option<f64> {
        match self.final_point {
            DualPoint::Mu(m) => Some(m),
            DualPoint::Lambda(_) => None,
        }
    }

    pub fn final_smoothed_mu(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.smoothed_mu)
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn smoothed_mus(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.smoothed_mu).collect()
    }

    /// CSV with `# key=value` header lines, a column header row, then one
    /// row per iteration. `extra_echo` is written before the solver's echo.
    pub fn write_csv<W: Write>(&self, w: &mut W, extra_echo: &[(String, String)]) -> Result<()> {
        write_comment_header(w, extra_echo)?;
        write_comment_header(w, &self.echo)?;
        writeln!(w, "{}", CSV_COLUMNS.join(","))?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.t,
                fmt_f64(r.objective),
                fmt_f64(r.residual),
                fmt_f64(r.dual_norm),
                r.smoothed_mu.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.wall_ms),
            )?;
        }
        Ok(())
    }

    /// `λ` snapshots as a `T × n` little-endian array.
    pub fn write_snapshots<W: Write>(&self, w: &mut W) -> Result<()> {
        let snaps = self
            .snapshots
            .as_ref()
            .ok_or_else(|| invalid("snapshots", "solve was run without keep_snapshots"))?;
        let cols = snaps.first().map_or(0, Vec::len);
        let data: Vec<f64> = snaps.iter().flatten().copied().collect();
        write_f64_array(w, snaps.len(), cols, &data)
    }
}

/// Mean of the last `⌊t/2⌋` entries of `history[..t]` (1-based `t`); the
/// whole prefix when `t < 2`.
pub fn smooth_trajectory(history: &[f64], t: usize) -> Result<f64> {
    if t == 0 || t > history.len() {
        return Err(invalid("t", format!("need 1 <= t <= {}, got {t}", history.len())));
    }
    let window = if t < 2 { t } else { t / 2 };
    let slice = &history[t - window..t];
    Ok(slice.iter().sum::<f64>() / window as f64)
}

/// Accumulates the `⌊T/2⌋`-window average of vector iterates for a run of
/// known length `T`.
#[derive(Clone, Debug)]
pub struct WindowAverage {
    total: usize,
    count: usize,
    sum: Vec<f64>,
}

impl WindowAverage {
    pub fn new(total: usize, dim: usize) -> Self {
        Self {
            total,
            count: 0,
            sum: vec![0.0; dim],
        }
    }

    fn window(&self) -> usize {
        if self.total < 2 {
            self.total
        } else {
            self.total / 2
        }
    }

    /// Offers the iterate of (1-based) iteration `t`.
    pub fn push(&mut self, t: usize, x: &[f64]) {
        if t + self.window() > self.total {
            self.sum.iter_mut().zip(x).for_each(|(s, v)| *s += v);
            self.count += 1;
        }
    }

    pub fn mean(&self) -> Option<Vec<f64>> {
        (self.count > 0).then(|| self.sum.iter().map(|s| s / self.count as f64).collect())
    }
}
