//! Square-root Hutchinson estimators.
//!
//! With probes `Z` and `V = Y Z`, the estimators are
//!
//! ```text
//! diag X ≈ (1/N) (V ⊙ V) 1_N
//! Tr X   ≈ (1/N) 1ᵀ (V ⊙ V) 1_N
//! Tr X²  ≈ (1/N) 1ᵀ (W ⊙ W) 1_N,   W = Y V
//! ```
//!
//! All reductions run in a fixed order so results do not depend on the
//! number of worker threads.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matfunc::{dense_reference, GibbsFactorOperator};
use crate::rng::{column_rng, derive_seed, tag};

/// Default batch size `N`.
pub const DEFAULT_BATCH: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeDistribution {
    #[default]
    Gaussian,
    Rademacher,
}

impl std::str::FromStr for ProbeDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "rademacher" => Ok(Self::Rademacher),
            other => Err(invalid("distribution", format!("unknown distribution `{other}`"))),
        }
    }
}

/// Probe matrix `Z ∈ R^{n×N}` with its provenance.
#[derive(Clone, Debug)]
pub struct ProbeBatch {
    z: DMatrix<f64>,
    seed: u64,
    iteration: u64,
    distribution: ProbeDistribution,
}

impl ProbeBatch {
    /// Wraps an explicit probe matrix (seed provenance is zeroed).
    pub fn from_matrix(z: DMatrix<f64>) -> Self {
        Self {
            z,
            seed: 0,
            iteration: 0,
            distribution: ProbeDistribution::Gaussian,
        }
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.z
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn batch(&self) -> usize {
        self.z.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn distribution(&self) -> ProbeDistribution {
        self.distribution
    }
}

/// Draws `Z ∈ R^{n×N}`. Column `i` comes from its own stream keyed by
/// `(seed, iteration, i)`.
pub fn draw_probes(
    n: usize,
    batch: usize,
    seed: u64,
    iteration: u64,
    distribution: ProbeDistribution,
) -> Result<ProbeBatch> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    if batch == 0 {
        return Err(invalid("batch", "must be at least 1"));
    }
    let mut z = DMatrix::zeros(n, batch);
    z.as_mut_slice().par_chunks_mut(n).enumerate().for_each(|(col, out)| {
        let mut rng = column_rng(seed, iteration, col as u64);
        match distribution {
            ProbeDistribution::Gaussian => {
                out.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
            }
            ProbeDistribution::Rademacher => {
                out.iter_mut()
                    .for_each(|x| *x = if rng.random::<bool>() { 1.0 } else { -1.0 });
            }
        }
    });
    Ok(ProbeBatch {
        z,
        seed,
        iteration,
        distribution,
    })
}

/// `(1/N)(V ⊙ V) 1_N`.
pub fn mean_row_squares(v: &DMatrix<f64>) -> Vec<f64> {
    let (n, cols) = v.shape();
    let mut out = vec![0.0; n];
    for j in 0..cols {
        for (o, x) in out.iter_mut().zip(v.column(j).iter()) {
            *o += x * x;
        }
    }
    let inv = 1.0 / cols.max(1) as f64;
    out.iter_mut().for_each(|o| *o *= inv);
    out
}

/// `(1/N) 1ᵀ(V ⊙ V) 1_N`.
pub fn mean_sum_squares(v: &DMatrix<f64>) -> f64 {
    mean_row_squares(v).iter().sum()
}

fn check_shapes(y: &GibbsFactorOperator, z: &ProbeBatch) -> Result<()> {
    if z.n() != y.n() {
        return Err(Error::DimensionMismatch {
            expected: y.n(),
            got: z.n(),
        });
    }
    Ok(())
}

/// Diagonal estimate with the block `V = YZ` it was computed from.
#[derive(Clone, Debug)]
pub struct DiagSketch {
    pub v: DMatrix<f64>,
    pub diag: Vec<f64>,
}

/// Trace-pair estimate with the blocks `V = YZ` and `W = YV`.
#[derive(Clone, Debug)]
pub struct TraceSketch {
    pub v: DMatrix<f64>,
    pub w: DMatrix<f64>,
    /// Estimate of `Tr X`.
    pub t1: f64,
    /// Estimate of `Tr X²`.
    pub t2: f64,
}

/// Unbiased estimate of `diag X = diag(Y²)`; nonnegative by construction.
pub fn diag_estimate(y: &GibbsFactorOperator, z: &ProbeBatch) -> Result<DiagSketch> {
    check_shapes(y, z)?;
    let v = y.apply(z.z())?;
    let diag = mean_row_squares(&v);
    Ok(DiagSketch { v, diag })
}

/// Unbiased estimates of `Tr X` and `Tr X²` from one extra block matvec.
pub fn trace_pair_estimate(y: &GibbsFactorOperator, z: &ProbeBatch) -> Result<TraceSketch> {
    check_shapes(y, z)?;
    let v = y.apply(z.z())?;
    let w = y.apply(&v)?;
    let t1 = mean_sum_squares(&v);
    let t2 = mean_sum_squares(&w);
    Ok(TraceSketch { v, w, t1, t2 })
}

/// Empirical and analytic covariance of the single-probe diagonal estimator.
#[derive(Clone, Debug)]
pub struct CovarianceCheck {
    pub empirical: DMatrix<f64>,
    /// `2 Tr[A_i X A_j X] = 2 X_ij²` for `A_k = e_k e_kᵀ`.
    pub analytic: DMatrix<f64>,
    /// Standard error of each empirical entry.
    pub standard_error: DMatrix<f64>,
    pub trials: usize,
}

impl CovarianceCheck {
    /// Largest `|empirical - analytic|` in units of the standard error.
    pub fn max_z_score(&self) -> f64 {
        self.empirical
            .iter()
            .zip(self.analytic.iter())
            .zip(self.standard_error.iter())
            .map(|((e, a), s)| {
                if *s > 0.0 {
                    (e - a).abs() / s
                } else if e == a {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Monte Carlo covariance of `(Yz)^{⊙2}` for the diagonal constraint pattern,
/// against `2 X_ij²` from the dense reference.
pub fn covariance_check(y: &GibbsFactorOperator, trials: usize, seed: u64, cap: usize) -> Result<CovarianceCheck> {
    if trials < 2 {
        return Err(invalid("trials", "need at least 2 trials"));
    }
    let n = y.n();
    let reference = dense_reference(y.shifted(), y.beta(), y.kind(), cap)?;
    let analytic = reference.x.map(|x| 2.0 * x * x);

    const CHUNK: usize = 4096;
    let mut samples: Vec<f64> = Vec::with_capacity(trials * n);
    let mut done = 0usize;
    let mut chunk_index = 0u64;
    while done < trials {
        let cols = CHUNK.min(trials - done);
        let z = draw_probes(n, cols, seed, chunk_index, ProbeDistribution::Gaussian)?;
        let v = y.apply(z.z())?;
        samples.extend(v.iter().map(|x| x * x));
        done += cols;
        chunk_index += 1;
    }
    // samples is column-major n × trials
    let u = DMatrix::from_vec(n, trials, samples);
    let mean: Vec<f64> = (0..n).map(|i| u.row(i).iter().sum::<f64>() / trials as f64).collect();
    let centered = DMatrix::from_fn(n, trials, |i, t| u[(i, t)] - mean[i]);
    let mut empirical = DMatrix::zeros(n, n);
    let mut standard_error = DMatrix::zeros(n, n);
    let tf = trials as f64;
    for i in 0..n {
        for j in i..n {
            let ri = centered.row(i);
            let rj = centered.row(j);
            let prods: Vec<f64> = ri.iter().zip(rj.iter()).map(|(a, b)| a * b).collect();
            let cov = prods.iter().sum::<f64>() / (tf - 1.0);
            let pm = prods.iter().sum::<f64>() / tf;
            let var = prods.iter().map(|p| (p - pm).powi(2)).sum::<f64>() / (tf - 1.0);
            let se = (var / tf).sqrt();
            empirical[(i, j)] = cov;
            empirical[(j, i)] = cov;
            standard_error[(i, j)] = se;
            standard_error[(j, i)] = se;
        }
    }
    Ok(CovarianceCheck {
        empirical,
        analytic,
        standard_error,
        trials,
    })
}

/// One row of the variance-versus-batch-size table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub batch: usize,
    pub trials: usize,
    /// Mean over `i` of the sample variance of `a_i / X_ii`.
    pub relative_variance: f64,
    /// Exact value of the same quantity for the probe distribution.
    pub theory: f64,
    /// Median over trials of `‖a − diag X‖₂ / ‖diag X‖₂`.
    pub median_relative_error: f64,
}

/// Relative variance of the diagonal estimator for each batch size, against
/// the dense reference. Trial `t` at batch size `N` draws its probes from
/// iteration `t` of a stream keyed by `(seed, N)`.
pub fn estimator_bench(
    y: &GibbsFactorOperator,
    batches: &[usize],
    trials: usize,
    seed: u64,
    distribution: ProbeDistribution,
    cap: usize,
) -> Result<Vec<BenchRow>> {
    if trials < 2 {
        return Err(invalid("trials", "need at least 2 trials"));
    }
    let n = y.n();
    let reference = dense_reference(y.shifted(), y.beta(), y.kind(), cap)?;
    let d = reference.diag_x();
    if d.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Estimator("reference diagonal is not positive".into()));
    }
    let d_norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    // Per-entry single-probe relative variance.
    let single: Vec<f64> = (0..n)
        .map(|i| {
            let row = reference.y.row(i);
            let quartic: f64 = row.iter().map(|v| v.powi(4)).sum();
            let correction = match distribution {
                ProbeDistribution::Gaussian => 0.0,
                ProbeDistribution::Rademacher => 2.0 * quartic / (d[i] * d[i]),
            };
            2.0 - correction
        })
        .collect();
    let single_mean = single.iter().sum::<f64>() / n as f64;

    let mut rows = Vec::with_capacity(batches.len());
    for &batch in batches {
        if batch == 0 {
            return Err(invalid("batch", "must be at least 1"));
        }
        let key = derive_seed(seed, &[tag::BENCH, batch as u64]);
        let mut sums = vec![0.0; n];
        let mut sq = vec![0.0; n];
        let mut errors = Vec::with_capacity(trials);
        for t in 0..trials {
            let z = draw_probes(n, batch, key, t as u64, distribution)?;
            let a = mean_row_squares(&y.apply(z.z())?);
            let mut err = 0.0;
            for i in 0..n {
                let r = a[i] / d[i];
                sums[i] += r;
                sq[i] += r * r;
                err += (a[i] - d[i]).powi(2);
            }
            errors.push(err.sqrt() / d_norm);
        }
        let tf = trials as f64;
        let relative_variance = (0..n)
            .map(|i| (sq[i] - sums[i] * sums[i] / tf) / (tf - 1.0))
            .sum::<f64>()
            / n as f64;
        errors.sort_by(f64::total_cmp);
        rows.push(BenchRow {
            batch,
            trials,
            relative_variance,
            theory: single_mean / batch as f64,
            median_relative_error: median_sorted(&errors),
        });
    }
    Ok(rows)
}

fn median_sorted(xs: &[f64]) -> f64 {
    let m = xs.len();
    if m % 2 == 1 {
        xs[m / 2]
    } else {
        0.5 * (xs[m / 2 - 1] + xs[m / 2])
    }
}
