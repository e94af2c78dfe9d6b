//! Dual optimizers for the two structured problem classes.
//!
//! * Diagonal constraint `diag X = b`: noncommutative matrix scaling,
//!   `λ ← λ + β⁻¹(log b − log a)` with `a ≈ diag X(λ)` ([`solve_diagonal`]).
//! * Trace constraint `Tr X = k`, `0 ⪯ X ⪯ I`: Newton's method on the scalar
//!   chemical potential `μ` ([`solve_trace`]).
//!
//! Both run in a stochastic mode (square-root Hutchinson estimates from
//! matrix-free matvecs) or an exact mode (dense eigendecomposition) that is
//! used as the reference in tests.

mod diagonal;
mod trace;
mod trajectory;

use serde::{Deserialize, Serialize};

pub use diagonal::{
    dual_gradient_exact, dual_objective_exact, minorizer_exact, scaling_step, solve_diagonal, DiagonalProblem,
};
pub use trace::{newton_step, solve_trace, TraceDerivatives, TraceProblem, TraceSpectrum};
pub use trajectory::{smooth_trajectory, DualPoint, IterationRecord, SolveTrajectory, WindowAverage};

use crate::error::{invalid, Error, Result};
use crate::matfunc::{DEFAULT_CHEB_TOL, DEFAULT_DENSE_CAP, DEFAULT_EXPMV_TOL};
use crate::sketch::{ProbeDistribution, DEFAULT_BATCH};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMode {
    #[default]
    Stochastic,
    Exact,
}

impl std::str::FromStr for SolveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stochastic" => Ok(Self::Stochastic),
            "exact" => Ok(Self::Exact),
            other => Err(invalid("mode", format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for SolveMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Stochastic => "stochastic",
            Self::Exact => "exact",
        })
    }
}

/// Settings shared by both solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Probe batch size `N`.
    pub batch: usize,
    pub iters: usize,
    pub seed: u64,
    pub mode: SolveMode,
    pub distribution: ProbeDistribution,
    pub expmv_tol: f64,
    pub cheb_tol: f64,
    /// Largest `n` for which exact mode is allowed.
    pub dense_cap: usize,
    /// Keep a copy of the dual variable after every iteration.
    pub keep_snapshots: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            batch: DEFAULT_BATCH,
            iters: 400,
            seed: 0,
            mode: SolveMode::Stochastic,
            distribution: ProbeDistribution::Gaussian,
            expmv_tol: DEFAULT_EXPMV_TOL,
            cheb_tol: DEFAULT_CHEB_TOL,
            dense_cap: DEFAULT_DENSE_CAP,
            keep_snapshots: false,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(invalid("batch", "must be at least 1"));
        }
        if self.iters == 0 {
            return Err(invalid("iters", "must be at least 1"));
        }
        if !(self.expmv_tol > 0.0) {
            return Err(invalid("expmv_tol", "must be positive"));
        }
        if !(self.cheb_tol > 0.0) {
            return Err(invalid("cheb_tol", "must be positive"));
        }
        Ok(())
    }

    pub(crate) fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("batch".into(), self.batch.to_string()),
            ("iters".into(), self.iters.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("mode".into(), self.mode.to_string()),
            ("distribution".into(), format!("{:?}", self.distribution).to_lowercase()),
            ("expmv_tol".into(), self.expmv_tol.to_string()),
            ("cheb_tol".into(), self.cheb_tol.to_string()),
        ]
    }
}
