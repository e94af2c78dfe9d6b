//! Max-Cut through the entropically regularized Goemans–Williamson relaxation.
//!
//! The cost is `C = A/n` and the relaxation is `min Tr[CX]` over `X ⪰ 0` with
//! `diag X = 1`. A dual point `λ` certifies the lower bound `1·λ + nμ` with
//! `μ = λ_min(C − diag λ)`; sign rounding of Gaussian samples `Yz` gives
//! feasible sign vectors and therefore upper bounds.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dualsolve::{solve_diagonal, DiagonalProblem, SolveConfig, SolveMode, SolveTrajectory};
use crate::eigs::{min_eigenpair, DEFAULT_EIG_MAX_ITER, DEFAULT_EIG_TOL};
use crate::error::{invalid, Error, Result};
use crate::linop::{DualShiftedOperator, SparseSymMatrix};
use crate::matfunc::{dense_reference, FactorKind, GibbsFactorOperator};
use crate::rng::{column_rng, derive_seed, tag, tagged_rng};

/// Reference Goemans–Williamson approximation constant, reported alongside
/// measured ratios.
pub const GW_CONSTANT: f64 = 0.878;

/// Rounding samples drawn per block.
const ROUNDING_BLOCK: usize = 64;

#[derive(Clone, Debug)]
pub struct MaxCutInstance {
    adjacency: Arc<SparseSymMatrix>,
    cost: Arc<SparseSymMatrix>,
}

impl MaxCutInstance {
    /// Builds `C = A/n`. `A` must have a zero diagonal and nonnegative weights.
    pub fn from_adjacency(adjacency: SparseSymMatrix) -> Result<Self> {
        let n = adjacency.n();
        if n == 0 {
            return Err(invalid("n", "graph has no vertices"));
        }
        if adjacency.diagonal().iter().any(|&d| d != 0.0) {
            return Err(invalid("adjacency", "self-loops are not allowed"));
        }
        if adjacency.values().iter().any(|&w| w < 0.0) {
            return Err(invalid("adjacency", "edge weights must be nonnegative"));
        }
        let cost = adjacency.scaled(1.0 / n as f64);
        Ok(Self {
            adjacency: Arc::new(adjacency),
            cost: Arc::new(cost),
        })
    }

    pub fn n(&self) -> usize {
        self.adjacency.n()
    }

    pub fn adjacency(&self) -> &Arc<SparseSymMatrix> {
        &self.adjacency
    }

    pub fn cost(&self) -> &Arc<SparseSymMatrix> {
        &self.cost
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    /// `xᵀCx`.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        let cx = self.cost.matvec(x)?;
        Ok(x.iter().zip(&cx).map(|(a, b)| a * b).sum())
    }

    /// Weight of the edges cut by the sign vector `x`.
    pub fn cut_weight(&self, x: &[f64]) -> Result<f64> {
        Ok(self.cut_from_objective(self.objective(x)?))
    }

    /// Cut weight `n(1ᵀC1 − v)/4` corresponding to the objective value `v`.
    pub fn cut_from_objective(&self, v: f64) -> f64 {
        self.n() as f64 * (self.cost.total_sum() - v) / 4.0
    }
}

/// `G(n, p)` with `C = A/n`; pairs are visited in row-major order from one
/// stream keyed by `seed`.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<MaxCutInstance> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("p", format!("must lie in [0, 1], got {p}")));
    }
    let mut rng = tagged_rng(seed, tag::GRAPH);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    MaxCutInstance::from_adjacency(SparseSymMatrix::from_edges(n, &edges)?)
}

/// Certified lower bound from a dual point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    /// `1·λ + n(μ − r)`.
    pub value: f64,
    /// Computed `λ_min(C − diag λ)`.
    pub mu: f64,
    /// Eigen-residual `r`; subtracted from `μ` so that `μ − r` is a lower
    /// bound on the eigenvalue the solver converged to.
    pub residual: f64,
    pub eig_iterations: usize,
}

/// Lower bound on `min_x xᵀCx` over sign vectors, valid for any `λ`.
pub fn lower_bound(instance: &MaxCutInstance, lambda: &[f64], eig_tol: f64, seed: u64) -> Result<LowerBound> {
    lower_bound_with(instance, lambda, eig_tol, DEFAULT_EIG_MAX_ITER, seed)
}

pub fn lower_bound_with(
    instance: &MaxCutInstance,
    lambda: &[f64],
    eig_tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<LowerBound> {
    let op = DualShiftedOperator::diagonal(instance.cost.clone(), lambda.to_vec())?;
    let eig = min_eigenpair(&op, eig_tol, max_iter, seed)?;
    let shift = eig.eigenvalue - eig.residual;
    Ok(LowerBound {
        value: lambda.iter().sum::<f64>() + instance.n() as f64 * shift,
        mu: eig.eigenvalue,
        residual: eig.residual,
        eig_iterations: eig.iterations,
    })
}

/// `sign(y)` with `sign(0) = +1`.
pub fn sign_vector(y: &[f64]) -> Vec<f64> {
    y.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect()
}

/// Gaussian probe of rounding sample `sample` under `seed`.
fn rounding_probe(n: usize, seed: u64, sample: u64) -> Vec<f64> {
    let mut rng = column_rng(seed, sample, 0);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// One rounding: `x = sign(Yz)` for the probe of sample `iteration`, and `xᵀCx`.
pub fn gw_round(y: &GibbsFactorOperator, c: &SparseSymMatrix, seed: u64, iteration: u64) -> Result<(Vec<f64>, f64)> {
    let n = c.n();
    if y.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.n(),
        });
    }
    let z = DMatrix::from_vec(n, 1, rounding_probe(n, seed, iteration));
    let yz = y.apply(&z)?;
    let x = sign_vector(yz.as_slice());
    let value = quad_form(c, &x);
    Ok((x, value))
}

fn quad_form(c: &SparseSymMatrix, x: &[f64]) -> f64 {
    let mut cx = vec![0.0; x.len()];
    c.matvec_into(x, &mut cx);
    x.iter().zip(&cx).map(|(a, b)| a * b).sum()
}

/// Mean and minimum of the rounding values over samples `0..samples`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundingSummary {
    pub mean: f64,
    pub best: f64,
    pub best_sample: u64,
}

/// Sample `s` uses the same probe as `gw_round(.., seed, s)`.
pub fn expected_upper_bound(
    y: &GibbsFactorOperator,
    c: &SparseSymMatrix,
    samples: usize,
    seed: u64,
) -> Result<RoundingSummary> {
    if y.n() != c.n() {
        return Err(Error::DimensionMismatch {
            expected: c.n(),
            got: y.n(),
        });
    }
    rounding_summary(|z| y.apply(z), c, samples, seed)
}

fn rounding_summary(
    apply: impl Fn(&DMatrix<f64>) -> Result<DMatrix<f64>>,
    c: &SparseSymMatrix,
    samples: usize,
    seed: u64,
) -> Result<RoundingSummary> {
    if samples == 0 {
        return Err(invalid("samples", "must be at least 1"));
    }
    let n = c.n();
    let mut values = Vec::with_capacity(samples);
    for start in (0..samples).step_by(ROUNDING_BLOCK) {
        let end = (start + ROUNDING_BLOCK).min(samples);
        let cols: Vec<Vec<f64>> = (start..end)
            .into_par_iter()
            .map(|s| rounding_probe(n, seed, s as u64))
            .collect();
        let z = DMatrix::from_iterator(n, end - start, cols.into_iter().flatten());
        let yz = apply(&z)?;
        let block: Vec<f64> = yz
            .as_slice()
            .par_chunks(n)
            .map(|col| quad_form(c, &sign_vector(col)))
            .collect();
        values.extend(block);
    }
    let mean = values.iter().sum::<f64>() / samples as f64;
    let (best_sample, best) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    Ok(RoundingSummary {
        mean,
        best,
        best_sample: best_sample as u64,
    })
}

/// Result of one Max-Cut experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub n: usize,
    pub edges: usize,
    pub beta: f64,
    /// Certified lower bound on `min xᵀCx`, from the averaged dual point.
    pub lower: f64,
    /// Mean rounding value.
    pub upper_expected: f64,
    /// Best rounding value.
    pub upper_best: f64,
    /// `cut(upper_expected) / cut(lower)`: expected rounded cut weight over
    /// the certified upper bound on the maximum cut.
    pub ratio: f64,
    /// `cut(upper_best) / cut(lower)`.
    pub ratio_best: f64,
    /// Plain quotient `lower / upper_expected` of the objective values.
    pub objective_ratio: f64,
    /// Shift `μ = λ_min(C − diag λ)` at the certified dual point.
    pub mu: f64,
    pub eig_residual: f64,
    /// Lower bound from the last solver iterate instead of the average.
    pub lower_final_iterate: f64,
    /// `1·λ` at the certified dual point.
    pub dual_objective: f64,
    pub samples: usize,
    pub gw_reference: f64,
}

impl BoundsReport {
    /// `upper_best ≥ lower` and `upper_expected ≥ upper_best`.
    pub fn is_consistent(&self) -> bool {
        self.lower <= self.upper_best && self.upper_best <= self.upper_expected
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxCutConfig {
    pub beta: f64,
    pub solve: SolveConfig,
    pub samples: usize,
    pub eig_tol: f64,
    pub eig_max_iter: usize,
}

impl Default for MaxCutConfig {
    fn default() -> Self {
        Self {
            beta: 10.0,
            solve: SolveConfig::default(),
            samples: 1000,
            eig_tol: DEFAULT_EIG_TOL,
            eig_max_iter: 20 * DEFAULT_EIG_MAX_ITER,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MaxCutOutcome {
    pub report: BoundsReport,
    pub trajectory: SolveTrajectory,
}

/// Solves `diag X = 1` on `instance`, then certifies and rounds at the
/// `⌊T/2⌋`-window average of the dual iterates.
pub fn run_maxcut(instance: &MaxCutInstance, config: &MaxCutConfig) -> Result<MaxCutOutcome> {
    let n = instance.n();
    if !(config.eig_tol > 0.0) {
        return Err(invalid("eig_tol", "must be positive"));
    }
    let problem = DiagonalProblem::new(instance.cost.clone(), vec![1.0; n], config.beta)?;
    let trajectory = solve_diagonal(&problem, &config.solve, None)?;
    let last = trajectory
        .final_lambda()
        .ok_or_else(|| invalid("trajectory", "diagonal solve returned no λ"))?
        .to_vec();
    let lambda = trajectory.lambda_average.clone().unwrap_or_else(|| last.clone());

    let seed = config.solve.seed;
    let eig_seed = derive_seed(seed, &[tag::EIGS]);
    let lb = lower_bound_with(instance, &lambda, config.eig_tol, config.eig_max_iter, eig_seed)?;
    let lb_last = lower_bound_with(instance, &last, config.eig_tol, config.eig_max_iter, eig_seed)?;

    let op = problem.operator(&lambda)?;
    let round_seed = derive_seed(seed, &[tag::ROUNDING]);
    let rounding = match config.solve.mode {
        SolveMode::Stochastic => {
            let y = GibbsFactorOperator::half_exponential(op, config.beta)?.with_expmv_tol(config.solve.expmv_tol)?;
            expected_upper_bound(&y, &instance.cost, config.samples, round_seed)?
        }
        SolveMode::Exact => {
            let r = dense_reference(&op, config.beta, FactorKind::HalfExponential, config.solve.dense_cap)?;
            rounding_summary(|z| Ok(&r.y * z), &instance.cost, config.samples, round_seed)?
        }
    };

    let cut_lower = instance.cut_from_objective(lb.value);
    let report = BoundsReport {
        n,
        edges: instance.edge_count(),
        beta: config.beta,
        lower: lb.value,
        upper_expected: rounding.mean,
        upper_best: rounding.best,
        ratio: instance.cut_from_objective(rounding.mean) / cut_lower,
        ratio_best: instance.cut_from_objective(rounding.best) / cut_lower,
        objective_ratio: lb.value / rounding.mean,
        mu: lb.mu,
        eig_residual: lb.residual,
        lower_final_iterate: lb_last.value,
        dual_objective: lambda.iter().sum(),
        samples: config.samples,
        gw_reference: GW_CONSTANT,
    };
    Ok(MaxCutOutcome { report, trajectory })
}

/// Generates `G(n, p)` from `graph_seed` and runs [`run_maxcut`].
pub fn run_maxcut_experiment(n: usize, p: f64, graph_seed: u64, config: &MaxCutConfig) -> Result<MaxCutOutcome> {
    let instance = erdos_renyi(n, p, graph_seed)?;
    run_maxcut(&instance, config)
}
