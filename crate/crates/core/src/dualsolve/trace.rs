use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;

use super::trajectory::{smooth_trajectory, DualPoint, IterationRecord, SolveTrajectory};
use super::{SolveConfig, SolveMode};
use crate::error::{invalid, Error, Result};
use crate::linop::{DualShiftedOperator, SparseSymMatrix, SpectralInterval};
use crate::matfunc::dense::{check_cap, softplus, sorted_eigen};
use crate::matfunc::{check_beta, fermi_dirac, sqrt_fermi_dirac_approx, GibbsFactorOperator};
use crate::rng::{derive_seed, tag};
use crate::sketch::{draw_probes, trace_pair_estimate};

/// `min Tr[CX] + β⁻¹S_bin(X)` subject to `Tr X = k`, `0 ⪯ X ⪯ I`.
#[derive(Clone, Debug)]
pub struct TraceProblem {
    c: Arc<SparseSymMatrix>,
    k: f64,
    beta: f64,
    interval: SpectralInterval,
}

impl TraceProblem {
    /// `interval` must enclose the spectrum of `c`.
    pub fn new(c: Arc<SparseSymMatrix>, k: f64, beta: f64, interval: SpectralInterval) -> Result<Self> {
        check_beta(beta)?;
        let n = c.n() as f64;
        if !(k > 0.0 && k < n) {
            return Err(invalid("k", format!("need 0 < k < n = {n}, got {k}")));
        }
        Ok(Self { c, k, beta, interval })
    }

    /// Uses the Gershgorin interval of `c`.
    pub fn with_gershgorin(c: Arc<SparseSymMatrix>, k: f64, beta: f64) -> Result<Self> {
        let interval = c.gershgorin_interval();
        Self::new(c, k, beta, interval)
    }

    pub fn c(&self) -> &Arc<SparseSymMatrix> {
        &self.c
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn interval(&self) -> SpectralInterval {
        self.interval
    }

    pub fn n(&self) -> usize {
        self.c.n()
    }

    /// Range of admissible `μ`: `[B₁ − R, B₂ + R]`.
    pub fn mu_bounds(&self) -> (f64, f64) {
        let r = self.interval.range();
        (self.interval.lower - r, self.interval.upper + r)
    }

    /// Interval enclosing the spectrum of `C − μI` for every admissible `μ`.
    pub fn shifted_interval(&self) -> Result<SpectralInterval> {
        let r = self.interval.range();
        if r > 0.0 {
            SpectralInterval::symmetric(2.0 * r)
        } else {
            SpectralInterval::symmetric(1.0)
        }
    }

    pub fn operator(&self, mu: f64) -> Result<DualShiftedOperator> {
        DualShiftedOperator::scalar(self.c.clone(), mu)
    }
}

/// Dual value and derivatives at one `μ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceDerivatives {
    /// `g(μ) = kμ − β⁻¹ Σ log(1 + e^{−β(c_i − μ)})`.
    pub g: f64,
    /// `g'(μ) = k − Tr X(μ)`.
    pub grad: f64,
    /// `g''(μ) = −β Tr[(I − X)X]`.
    pub hess: f64,
    pub trace_x: f64,
}

/// Eigenvalues of `C`, from which every exact quantity of the trace
/// problem follows in closed form.
#[derive(Clone, Debug)]
pub struct TraceSpectrum {
    eigenvalues: DVector<f64>,
    k: f64,
    beta: f64,
}

impl TraceSpectrum {
    pub fn new(problem: &TraceProblem, cap: usize) -> Result<Self> {
        check_cap(problem.n(), cap)?;
        let (eigenvalues, _) = sorted_eigen(problem.c.to_dense());
        Ok(Self {
            eigenvalues,
            k: problem.k,
            beta: problem.beta,
        })
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn trace_x(&self, mu: f64) -> f64 {
        self.eigenvalues.iter().map(|&c| fermi_dirac(c - mu, self.beta)).sum()
    }

    pub fn derivatives(&self, mu: f64) -> TraceDerivatives {
        let beta = self.beta;
        let mut log_sum = 0.0;
        let mut trace = 0.0;
        let mut var = 0.0;
        for &c in self.eigenvalues.iter() {
            let f = fermi_dirac(c - mu, beta);
            log_sum += softplus(-beta * (c - mu));
            trace += f;
            var += f * fermi_dirac(mu - c, beta);
        }
        TraceDerivatives {
            g: self.k * mu - log_sum / beta,
            grad: self.k - trace,
            hess: -beta * var,
            trace_x: trace,
        }
    }
}

/// `μ − (k − a₁)/a₂`, with `a₁ ≈ Tr X` and `a₂ ≈ g''(μ) < 0`.
pub fn newton_step(mu: f64, a1: f64, a2: f64, k: f64) -> Result<f64> {
    if !(a2 < 0.0) {
        return Err(Error::Estimator(format!(
            "curvature estimate a2 = {a2} is not negative"
        )));
    }
    Ok(mu - (k - a1) / a2)
}

/// Newton's method on the chemical potential from `μ⁰ = (B₁ + B₂)/2`.
///
/// Stochastic mode estimates `a₁ = t₁ ≈ Tr X` and `a₂ = −β(t₁ − t₂)` from
/// `V = YZ`, `W = YV` with `Y = F_β^{1/2}(C − μI)`; the Chebyshev fit of
/// `F_β^{1/2}` is computed once on [`TraceProblem::shifted_interval`] and `μ`
/// is clamped to [`TraceProblem::mu_bounds`]. Exact mode uses the closed-form
/// derivatives and falls back to bisection when a Newton step leaves the
/// current bracket.
pub fn solve_trace(problem: &TraceProblem, config: &SolveConfig, mu0: Option<f64>) -> Result<SolveTrajectory> {
    config.validate()?;
    let n = problem.n();
    let k = problem.k;
    let beta = problem.beta;
    let (mu_lo, mu_hi) = problem.mu_bounds();
    let mut mu = mu0.unwrap_or_else(|| problem.interval.midpoint());
    if !mu.is_finite() {
        return Err(invalid("mu0", "must be finite"));
    }

    let mut records = Vec::with_capacity(config.iters);
    let mut history = Vec::with_capacity(config.iters);

    match config.mode {
        SolveMode::Stochastic => {
            let approx = Arc::new(sqrt_fermi_dirac_approx(
                beta,
                problem.shifted_interval()?,
                config.cheb_tol,
            )?);
            let probe_seed = derive_seed(config.seed, &[tag::SOLVER]);
            mu = mu.clamp(mu_lo, mu_hi);
            for t in 1..=config.iters {
                let start = Instant::now();
                let y = GibbsFactorOperator::with_approx(problem.operator(mu)?, beta, approx.clone())?;
                let z = draw_probes(n, config.batch, probe_seed, t as u64, config.distribution)?;
                let sketch = trace_pair_estimate(&y, &z)?;
                let a1 = sketch.t1;
                let a2 = -beta * (sketch.t1 - sketch.t2);
                mu = newton_step(mu, a1, a2, k)?.clamp(mu_lo, mu_hi);
                if !mu.is_finite() {
                    return Err(Error::NonFinite("trace solver iterate"));
                }
                history.push(mu);
                records.push(IterationRecord {
                    t,
                    objective: k * mu,
                    residual: (a1 - k).abs(),
                    dual_norm: mu,
                    smoothed_mu: Some(smooth_trajectory(&history, t)?),
                    trace_estimate: Some(a1),
                    curvature: Some(a2),
                    wall_ms: start.elapsed().as_secs_f64() * 1e3,
                });
            }
        }
        SolveMode::Exact => {
            let spectrum = TraceSpectrum::new(problem, config.dense_cap)?;
            let (mut lo, mut hi) = initial_bracket(&spectrum, k, problem.interval);
            for t in 1..=config.iters {
                let start = Instant::now();
                let d = spectrum.derivatives(mu);
                if d.grad > 0.0 {
                    lo = lo.max(mu);
                } else if d.grad < 0.0 {
                    hi = hi.min(mu);
                }
                let next = match newton_step(mu, d.trace_x, d.hess, k) {
                    Ok(m) if m > lo && m < hi => m,
                    _ if d.grad == 0.0 => mu,
                    _ => 0.5 * (lo + hi),
                };
                mu = next;
                history.push(mu);
                records.push(IterationRecord {
                    t,
                    objective: k * mu,
                    residual: d.grad.abs(),
                    dual_norm: mu,
                    smoothed_mu: Some(smooth_trajectory(&history, t)?),
                    trace_estimate: Some(d.trace_x),
                    curvature: Some(d.hess),
                    wall_ms: start.elapsed().as_secs_f64() * 1e3,
                });
            }
        }
    }

    let mut echo = vec![
        ("solver".to_string(), "trace".to_string()),
        ("n".to_string(), n.to_string()),
        ("k".to_string(), k.to_string()),
        ("beta".to_string(), beta.to_string()),
    ];
    echo.extend(config.echo());
    Ok(SolveTrajectory {
        records,
        echo,
        final_point: DualPoint::Mu(mu),
        lambda_average: None,
        mu_history: history,
        snapshots: None,
    })
}

/// `[lo, hi]` with `Tr X(lo) < k < Tr X(hi)`, widened geometrically from
/// the spectral interval.
fn initial_bracket(spectrum: &TraceSpectrum, k: f64, interval: SpectralInterval) -> (f64, f64) {
    let mut width = interval.range().max(1.0);
    let mut lo = interval.lower - width;
    while spectrum.trace_x(lo) >= k {
        width *= 2.0;
        lo = interval.lower - width;
    }
    width = interval.range().max(1.0);
    let mut hi = interval.upper + width;
    while spectrum.trace_x(hi) <= k {
        width *= 2.0;
        hi = interval.upper + width;
    }
    (lo, hi)
}
