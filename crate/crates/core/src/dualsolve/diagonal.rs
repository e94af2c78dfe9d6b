use std::sync::Arc;
use std::time::Instant;

use super::trajectory::{DualPoint, IterationRecord, SolveTrajectory, WindowAverage};
use super::{SolveConfig, SolveMode};
use crate::error::{invalid, Error, Result};
use crate::linop::{DualShiftedOperator, SparseSymMatrix};
use crate::matfunc::{check_beta, dense_reference, FactorKind, GibbsFactorOperator};
use crate::rng::{derive_seed, tag};
use crate::sketch::{diag_estimate, draw_probes};

/// `min Tr[CX] + β⁻¹S(X)` subject to `diag X = b`.
#[derive(Clone, Debug)]
pub struct DiagonalProblem {
    c: Arc<SparseSymMatrix>,
    b: Vec<f64>,
    beta: f64,
}

impl DiagonalProblem {
    pub fn new(c: Arc<SparseSymMatrix>, b: Vec<f64>, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        if b.len() != c.n() {
            return Err(Error::DimensionMismatch {
                expected: c.n(),
                got: b.len(),
            });
        }
        if let Some(bad) = b.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
            return Err(invalid("b", format!("entries must be positive, found {bad}")));
        }
        Ok(Self { c, b, beta })
    }

    pub fn c(&self) -> &Arc<SparseSymMatrix> {
        &self.c
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n(&self) -> usize {
        self.c.n()
    }

    pub fn operator(&self, lambda: &[f64]) -> Result<DualShiftedOperator> {
        DualShiftedOperator::diagonal(self.c.clone(), lambda.to_vec())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `λ + β⁻¹(log b − log a)`, entrywise.
pub fn scaling_step(lambda: &[f64], a: &[f64], b: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_beta(beta)?;
    let n = lambda.len();
    for len in [a.len(), b.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    if let Some((i, x)) = a.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
        return Err(Error::Estimator(format!(
            "diagonal estimate a[{i}] = {x} is not positive"
        )));
    }
    if let Some((i, x)) = b.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
        return Err(invalid("b", format!("b[{i}] = {x} is not positive")));
    }
    Ok(lambda
        .iter()
        .zip(a)
        .zip(b)
        .map(|((l, a), b)| l + (b.ln() - a.ln()) / beta)
        .collect())
}

/// Exact `g(λ) = b·λ − β⁻¹ Tr exp(−β(C − diag λ))`.
pub fn dual_objective_exact(problem: &DiagonalProblem, lambda: &[f64], cap: usize) -> Result<f64> {
    let r = dense_reference(
        &problem.operator(lambda)?,
        problem.beta,
        FactorKind::HalfExponential,
        cap,
    )?;
    Ok(dot(&problem.b, lambda) - r.trace_gibbs / problem.beta)
}

/// Exact `∇g(λ) = b − diag X(λ)`.
pub fn dual_gradient_exact(problem: &DiagonalProblem, lambda: &[f64], cap: usize) -> Result<Vec<f64>> {
    let r = dense_reference(
        &problem.operator(lambda)?,
        problem.beta,
        FactorKind::HalfExponential,
        cap,
    )?;
    Ok(problem.b.iter().zip(r.diag_x()).map(|(b, x)| b - x).collect())
}

/// Exact minorizer about `λ⁰`:
/// `g⁰(λ) = b·λ − β⁻¹ Σ_i exp(β(λ_i − λ⁰_i)) X(λ⁰)_ii`.
pub fn minorizer_exact(problem: &DiagonalProblem, lambda0: &[f64], lambda: &[f64], cap: usize) -> Result<f64> {
    if lambda.len() != lambda0.len() {
        return Err(Error::DimensionMismatch {
            expected: lambda0.len(),
            got: lambda.len(),
        });
    }
    let r = dense_reference(
        &problem.operator(lambda0)?,
        problem.beta,
        FactorKind::HalfExponential,
        cap,
    )?;
    let beta = problem.beta;
    let trace: f64 = lambda
        .iter()
        .zip(lambda0)
        .zip(r.diag_x())
        .map(|((l, l0), x)| (beta * (l - l0)).exp() * x)
        .sum();
    Ok(dot(&problem.b, lambda) - trace / beta)
}

/// Noncommutative matrix scaling from `λ⁰ = 0` (or `lambda0` if given).
///
/// Each iteration draws `Z`, forms `V = Y(λ)Z` with `Y = exp(−β/2 (C − diag λ))`,
/// estimates `a = (1/N)(V⊙V)1` and applies [`scaling_step`]. Exact mode uses
/// `a = diag X(λ)` from the dense reference instead.
pub fn solve_diagonal(
    problem: &DiagonalProblem,
    config: &SolveConfig,
    lambda0: Option<Vec<f64>>,
) -> Result<SolveTrajectory> {
    config.validate()?;
    let n = problem.n();
    if config.mode == SolveMode::Exact && n > config.dense_cap {
        return Err(Error::DenseCapExceeded {
            n,
            cap: config.dense_cap,
        });
    }
    let mut lambda = lambda0.unwrap_or_else(|| vec![0.0; n]);
    if lambda.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: lambda.len(),
        });
    }
    let probe_seed = derive_seed(config.seed, &[tag::SOLVER]);
    let mut records = Vec::with_capacity(config.iters);
    let mut average = WindowAverage::new(config.iters, n);
    let mut snapshots = config.keep_snapshots.then(Vec::new);

    for t in 1..=config.iters {
        let start = Instant::now();
        let op = problem.operator(&lambda)?;
        let a = match config.mode {
            SolveMode::Exact => {
                dense_reference(&op, problem.beta, FactorKind::HalfExponential, config.dense_cap)?.diag_x()
            }
            SolveMode::Stochastic => {
                let y = GibbsFactorOperator::half_exponential(op, problem.beta)?.with_expmv_tol(config.expmv_tol)?;
                let z = draw_probes(n, config.batch, probe_seed, t as u64, config.distribution)?;
                diag_estimate(&y, &z)?.diag
            }
        };
        let residual = a.iter().zip(&problem.b).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        lambda = scaling_step(&lambda, &a, &problem.b, problem.beta)?;
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("diagonal solver iterate"));
        }
        average.push(t, &lambda);
        if let Some(s) = snapshots.as_mut() {
            s.push(lambda.clone());
        }
        records.push(IterationRecord {
            t,
            objective: dot(&problem.b, &lambda),
            residual,
            dual_norm: dot(&lambda, &lambda).sqrt(),
            smoothed_mu: None,
            trace_estimate: None,
            curvature: None,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }

    let mut echo = vec![
        ("solver".to_string(), "diagonal".to_string()),
        ("n".to_string(), n.to_string()),
        ("beta".to_string(), problem.beta.to_string()),
    ];
    echo.extend(config.echo());
    Ok(SolveTrajectory {
        records,
        echo,
        final_point: DualPoint::Lambda(lambda),
        lambda_average: average.mean(),
        mu_history: Vec::new(),
        snapshots,
    })
}
