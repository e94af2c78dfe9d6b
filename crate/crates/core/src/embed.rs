//! Randomized spectral embedding of clustered graphs.
//!
//! The trace-constrained problem with `C = L` (normalized Laplacian) and
//! `k` = number of clusters is solved for the chemical potential `μ*`; the
//! embedding is `Ψ = Y(μ*) Z / √k̃` with `Y = F_β^{1/2}(L − μ*I)`, so that
//! `E[ΨΨᵀ] = X(μ*)`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dualsolve::{solve_trace, SolveConfig, SolveTrajectory, TraceProblem};
use crate::error::{invalid, Error, Result};
use crate::linop::{SparseSymMatrix, SpectralInterval};
use crate::matfunc::{dense_reference, FactorKind, GibbsFactorOperator};
use crate::rng::{derive_seed, tag, tagged_rng};
use crate::sketch::{draw_probes, mean_sum_squares, ProbeDistribution};

/// Planted-partition graph: complete blocks of size `m`, plus independent
/// edges between blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteredGraphConfig {
    pub n: usize,
    pub m: usize,
    /// Probability of each inter-block edge; `1/n` when absent.
    pub inter_prob: Option<f64>,
    pub seed: u64,
}

impl ClusteredGraphConfig {
    pub fn new(n: usize, m: usize, seed: u64) -> Self {
        Self {
            n,
            m,
            inter_prob: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(invalid("m", format!("block size must be at least 2, got {}", self.m)));
        }
        if self.n == 0 || !self.n.is_multiple_of(self.m) {
            return Err(invalid(
                "m",
                format!("block size {} does not divide n = {}", self.m, self.n),
            ));
        }
        let p = self.inter_probability();
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("inter_prob", format!("must lie in [0, 1], got {p}")));
        }
        Ok(())
    }

    pub fn clusters(&self) -> usize {
        self.n / self.m
    }

    pub fn inter_probability(&self) -> f64 {
        self.inter_prob.unwrap_or(1.0 / self.n as f64)
    }
}

/// Adjacency of the clustered model. Vertex `i` belongs to block `i / m`.
pub fn clustered_graph(config: &ClusteredGraphConfig) -> Result<SparseSymMatrix> {
    config.validate()?;
    let (n, m) = (config.n, config.m);
    let p = config.inter_probability();
    let mut rng = tagged_rng(config.seed, tag::GRAPH);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let same = i / m == j / m;
            if same || (p > 0.0 && rng.random::<f64>() < p) {
                edges.push((i, j, 1.0));
            }
        }
    }
    SparseSymMatrix::from_edges(n, &edges)
}

/// `L = I − D^{-1/2} A D^{-1/2}` with `D = diag(A1)`.
pub fn normalized_laplacian(a: &SparseSymMatrix) -> Result<SparseSymMatrix> {
    let d = a.row_sums();
    if let Some(i) = d.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::IsolatedVertex(i));
    }
    let inv_sqrt: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    let mut triplets = Vec::with_capacity(a.nnz() + a.n());
    for i in 0..a.n() {
        triplets.push((i, i, 1.0));
        for (j, w) in a.row(i) {
            triplets.push((i, j, -w * inv_sqrt[i] * inv_sqrt[j]));
        }
    }
    SparseSymMatrix::from_triplets(a.n(), triplets)
}

/// Rows of `psi` are vertex coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingResult {
    pub psi: DMatrix<f64>,
    pub k_tilde: usize,
    pub mu_star: f64,
    /// Key of the probe block `Z`.
    pub seed: u64,
}

impl EmbeddingResult {
    pub fn n(&self) -> usize {
        self.psi.nrows()
    }

    /// `G = ΨΨᵀ`.
    pub fn gram(&self) -> DMatrix<f64> {
        &self.psi * self.psi.transpose()
    }
}

/// Default embedding dimension `⌈2k ln n⌉`.
pub fn default_k_tilde(k: usize, n: usize) -> usize {
    ((2.0 * k as f64 * (n as f64).ln()).ceil() as usize).max(1)
}

/// `F_β^{1/2}(C − μI)` fitted on `[B₁ − μ, B₂ − μ]`.
pub fn factor_at(problem: &TraceProblem, mu: f64, cheb_tol: f64) -> Result<GibbsFactorOperator> {
    let iv = problem.interval().shifted(mu);
    GibbsFactorOperator::sqrt_fermi_dirac(problem.operator(mu)?, problem.beta(), iv, cheb_tol)
}

/// `Ψ = Y(μ*) Z / √k̃` for a Gaussian `Z ∈ R^{n×k̃}` keyed by `seed`.
pub fn recover_embedding(
    problem: &TraceProblem,
    mu_star: f64,
    k_tilde: usize,
    seed: u64,
    cheb_tol: f64,
) -> Result<EmbeddingResult> {
    if k_tilde == 0 {
        return Err(invalid("k_tilde", "must be at least 1"));
    }
    let y = factor_at(problem, mu_star, cheb_tol)?;
    embedding_from_factor(&y, mu_star, k_tilde, seed)
}

pub fn embedding_from_factor(
    y: &GibbsFactorOperator,
    mu_star: f64,
    k_tilde: usize,
    seed: u64,
) -> Result<EmbeddingResult> {
    let z = draw_probes(y.n(), k_tilde, seed, 0, ProbeDistribution::Gaussian)?;
    let psi = y.apply(z.z())? / (k_tilde as f64).sqrt();
    Ok(EmbeddingResult {
        psi,
        k_tilde,
        mu_star,
        seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramValidation {
    /// `max_ij |G_ij − X_ij| / √(X_ii X_jj)`.
    pub max_scaled_deviation: f64,
    /// `max_ij |G_ij − X_ij|`.
    pub max_abs_deviation: f64,
    /// `‖G − X‖_F / ‖X‖_F`.
    pub relative_frobenius: f64,
}

/// Compares `G = ΨΨᵀ` against a dense `X`.
pub fn gram_validation(result: &EmbeddingResult, dense_x: &DMatrix<f64>) -> Result<GramValidation> {
    let n = result.n();
    if dense_x.nrows() != n || dense_x.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: dense_x.nrows(),
        });
    }
    let g = result.gram();
    let diff = &g - dense_x;
    let mut max_scaled = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let scale = (dense_x[(i, i)] * dense_x[(j, j)]).sqrt();
            let d = diff[(i, j)].abs();
            let s = if scale > 0.0 {
                d / scale
            } else if d > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            max_scaled = max_scaled.max(s);
        }
    }
    Ok(GramValidation {
        max_scaled_deviation: max_scaled,
        max_abs_deviation: diff.amax(),
        relative_frobenius: diff.norm() / dense_x.norm(),
    })
}

/// `|t₁ − k| / k` with `t₁ = (1/p) Σ ‖Y z_i‖²` over `p = probes` Gaussian probes.
pub fn verify_trace_constraint(y: &GibbsFactorOperator, k: f64, probes: usize, seed: u64) -> Result<f64> {
    if probes == 0 {
        return Err(invalid("probes", "must be at least 1"));
    }
    if !(k > 0.0) {
        return Err(invalid("k", "must be positive"));
    }
    let z = draw_probes(y.n(), probes, seed, 0, ProbeDistribution::Gaussian)?;
    let t1 = mean_sum_squares(&y.apply(z.z())?);
    Ok((t1 - k).abs() / k)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub graph: ClusteredGraphConfig,
    pub beta: f64,
    pub solve: SolveConfig,
    /// Embedding dimension; [`default_k_tilde`] when absent.
    pub k_tilde: Option<usize>,
    pub verify_probes: usize,
    /// Run the dense Gram check when `n ≤ solve.dense_cap`.
    pub validate_gram: bool,
}

impl EmbedConfig {
    pub fn new(n: usize, m: usize, beta: f64, seed: u64) -> Self {
        Self {
            graph: ClusteredGraphConfig::new(n, m, seed),
            beta,
            solve: SolveConfig {
                iters: 2000,
                seed,
                ..SolveConfig::default()
            },
            k_tilde: None,
            verify_probes: 1000,
            validate_gram: true,
        }
    }
}

/// Summary of an embedding run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedSummary {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub k_tilde: usize,
    pub beta: f64,
    pub edges: usize,
    /// Smoothed `μ` at the last iteration.
    pub mu_star: f64,
    /// Raw `μ` at the last iteration.
    pub mu_final: f64,
    pub trace_probes: usize,
    pub trace_relative_error: f64,
    pub gram: Option<GramValidation>,
}

#[derive(Clone, Debug)]
pub struct EmbedOutcome {
    pub summary: EmbedSummary,
    pub trajectory: SolveTrajectory,
    pub embedding: EmbeddingResult,
}

/// Graph → Laplacian → trace solve → embedding → trace check (and Gram check
/// when small enough).
pub fn run_embed_experiment(config: &EmbedConfig) -> Result<EmbedOutcome> {
    let adjacency = clustered_graph(&config.graph)?;
    run_embed_on(&adjacency, config.graph.clusters(), config)
}

/// Same as [`run_embed_experiment`] on a given adjacency with `k` clusters.
pub fn run_embed_on(adjacency: &SparseSymMatrix, k: usize, config: &EmbedConfig) -> Result<EmbedOutcome> {
    let n = adjacency.n();
    let l = Arc::new(normalized_laplacian(adjacency)?);
    let problem = TraceProblem::new(l, k as f64, config.beta, SpectralInterval::new(0.0, 2.0)?)?;
    let trajectory = solve_trace(&problem, &config.solve, None)?;
    let mu_star = trajectory
        .final_smoothed_mu()
        .ok_or_else(|| invalid("trajectory", "trace solve returned no smoothed μ"))?;
    let mu_final = trajectory.final_mu().unwrap_or(mu_star);

    let k_tilde = config.k_tilde.unwrap_or_else(|| default_k_tilde(k, n));
    let seed = config.solve.seed;
    let y = factor_at(&problem, mu_star, config.solve.cheb_tol)?;
    let embedding = embedding_from_factor(&y, mu_star, k_tilde, derive_seed(seed, &[tag::EMBED]))?;
    let trace_relative_error =
        verify_trace_constraint(&y, k as f64, config.verify_probes, derive_seed(seed, &[tag::VERIFY]))?;
    let gram = if config.validate_gram && n <= config.solve.dense_cap {
        let x = dense_reference(
            y.shifted(),
            config.beta,
            FactorKind::SqrtFermiDirac,
            config.solve.dense_cap,
        )?
        .x;
        Some(gram_validation(&embedding, &x)?)
    } else {
        None
    };

    let summary = EmbedSummary {
        n,
        m: config.graph.m,
        k,
        k_tilde,
        beta: config.beta,
        edges: adjacency.nnz() / 2,
        mu_star,
        mu_final,
        trace_probes: config.verify_probes,
        trace_relative_error,
        gram,
    };
    Ok(EmbedOutcome {
        summary,
        trajectory,
        embedding,
    })
}
