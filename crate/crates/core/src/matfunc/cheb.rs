use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linop::{DualShiftedOperator, SpectralInterval};

/// Highest degree [`cheb_fit`] will try before giving up.
pub const DEFAULT_MAX_DEGREE: usize = 4096;

/// Number of points in the uniform grid the fit is certified on.
pub const CHECK_GRID: usize = 10_000;

const START_DEGREE: usize = 8;

/// Chebyshev expansion `Σ c_k T_k((2x - a - b)/(b - a))` on `[a, b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebApprox {
    lower: f64,
    upper: f64,
    coeffs: Vec<f64>,
    sup_error: f64,
}

impl ChebApprox {
    pub fn interval(&self) -> SpectralInterval {
        SpectralInterval {
            lower: self.lower,
            upper: self.upper,
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Largest deviation from the target observed on a uniform grid of
    /// `2(CHECK_GRID - 1) + 1` points, which contains the `CHECK_GRID`-point
    /// grid.
    pub fn sup_error(&self) -> f64 {
        self.sup_error
    }

    fn scale(&self, x: f64) -> f64 {
        if self.upper > self.lower {
            (2.0 * x - self.lower - self.upper) / (self.upper - self.lower)
        } else {
            0.0
        }
    }

    /// Scalar evaluation with the same three-term recurrence used on vectors.
    pub fn eval(&self, x: f64) -> f64 {
        let t = self.scale(x);
        let mut prev = 1.0;
        let mut acc = self.coeffs[0];
        if self.coeffs.len() == 1 {
            return acc;
        }
        let mut cur = t;
        acc += self.coeffs[1] * cur;
        for &c in &self.coeffs[2..] {
            let next = 2.0 * t * cur - prev;
            prev = cur;
            cur = next;
            acc += c * cur;
        }
        acc
    }
}

/// Interpolation coefficients at the `degree + 1` Chebyshev points of the
/// first kind.
fn interpolate<F: Fn(f64) -> f64>(f: &F, lower: f64, upper: f64, degree: usize) -> Vec<f64> {
    let m = degree + 1;
    let mid = 0.5 * (lower + upper);
    let half = 0.5 * (upper - lower);
    let theta: Vec<f64> = (0..m)
        .map(|j| std::f64::consts::PI * (j as f64 + 0.5) / m as f64)
        .collect();
    let fx: Vec<f64> = theta.iter().map(|&t| f(mid + half * t.cos())).collect();
    (0..m)
        .map(|k| {
            let s: f64 = theta.iter().zip(&fx).map(|(&t, &y)| y * (k as f64 * t).cos()).sum();
            let c = 2.0 * s / m as f64;
            if k == 0 {
                0.5 * c
            } else {
                c
            }
        })
        .collect()
}

fn grid_error<F: Fn(f64) -> f64>(f: &F, approx: &ChebApprox) -> f64 {
    let points = 2 * (CHECK_GRID - 1);
    let (a, b) = (approx.lower, approx.upper);
    (0..=points)
        .map(|i| {
            let x = a + (b - a) * (i as f64 / points as f64);
            (approx.eval(x) - f(x)).abs()
        })
        .fold(0.0, f64::max)
}

/// Adaptive Chebyshev interpolation of `f` on `interval` to sup error `tol`.
///
/// The degree doubles from 8 until the interpolant is within `tol/2` on the
/// check grid; trailing coefficients whose absolute sum stays below `tol/4`
/// are then dropped and the error is re-measured.
pub fn cheb_fit<F>(f: F, interval: SpectralInterval, tol: f64, max_degree: usize) -> Result<ChebApprox>
where
    F: Fn(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("must be positive, got {tol}")));
    }
    let (lower, upper) = (interval.lower, interval.upper);
    if upper == lower {
        let c0 = f(lower);
        if !c0.is_finite() {
            return Err(Error::NonFinite("Chebyshev fit"));
        }
        return Ok(ChebApprox {
            lower,
            upper,
            coeffs: vec![c0],
            sup_error: 0.0,
        });
    }

    let mut best_error = f64::INFINITY;
    let mut degree = START_DEGREE.min(max_degree);
    loop {
        let coeffs = interpolate(&f, lower, upper, degree);
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("Chebyshev fit"));
        }
        let tail = coeffs.iter().rev().take(3).fold(0.0f64, |m, c| m.max(c.abs()));
        if tail < tol {
            let mut approx = ChebApprox {
                lower,
                upper,
                coeffs,
                sup_error: 0.0,
            };
            let err = grid_error(&f, &approx);
            best_error = best_error.min(err);
            if err <= 0.5 * tol {
                let mut dropped = 0.0;
                while approx.coeffs.len() > 1 {
                    let last = approx.coeffs[approx.coeffs.len() - 1].abs();
                    if dropped + last > 0.25 * tol {
                        break;
                    }
                    dropped += last;
                    approx.coeffs.pop();
                }
                approx.sup_error = grid_error(&f, &approx);
                return Ok(approx);
            }
        }
        if degree >= max_degree {
            if !best_error.is_finite() {
                let approx = ChebApprox {
                    lower,
                    upper,
                    coeffs: interpolate(&f, lower, upper, degree),
                    sup_error: 0.0,
                };
                best_error = grid_error(&f, &approx);
            }
            return Err(Error::ChebDegreeExceeded {
                cap: max_degree,
                best_error,
            });
        }
        degree = (2 * degree).min(max_degree);
    }
}

/// `Σ c_k T_k(H̃) V` with `H̃` the operator affinely mapped from the fitted
/// interval to `[-1, 1]`. Each term is built with the three-term recurrence
/// and accumulated directly, costing one operator application per degree
/// per column.
pub fn cheb_apply(approx: &ChebApprox, op: &DualShiftedOperator, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = op.n();
    if v.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.nrows(),
        });
    }
    let mut out = DMatrix::zeros(n, v.ncols());
    if n == 0 {
        return Ok(out);
    }
    let (a, b) = (approx.lower, approx.upper);
    let coeffs = &approx.coeffs;
    if coeffs.len() == 1 || b == a {
        return Ok(v * coeffs[0]);
    }
    let alpha = 2.0 / (b - a);
    let shift = (a + b) / (b - a);

    out.as_mut_slice()
        .par_chunks_mut(n)
        .zip(v.as_slice().par_chunks(n))
        .for_each(|(acc, u)| {
            let mut prev = u.to_vec();
            let mut cur = vec![0.0; n];
            let mut next = vec![0.0; n];
            // cur = H̃ u
            op.apply_into(u, &mut cur);
            for (c, &x) in cur.iter_mut().zip(u) {
                *c = alpha * *c - shift * x;
            }
            for ((o, &p), &c) in acc.iter_mut().zip(&prev).zip(&cur) {
                *o = coeffs[0] * p + coeffs[1] * c;
            }
            for &ck in &coeffs[2..] {
                op.apply_into(&cur, &mut next);
                for ((nx, &c), &p) in next.iter_mut().zip(&cur).zip(&prev) {
                    *nx = 2.0 * (alpha * *nx - shift * c) - p;
                }
                for (o, &x) in acc.iter_mut().zip(&next) {
                    *o += ck * x;
                }
                std::mem::swap(&mut prev, &mut cur);
                std::mem::swap(&mut cur, &mut next);
            }
        });
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("Chebyshev matvec"));
    }
    Ok(out)
}
