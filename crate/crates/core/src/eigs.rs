//! Smallest eigenpair of a [`DualShiftedOperator`] by single-vector LOBPCG.

use nalgebra::{Matrix3, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::linop::DualShiftedOperator;
use crate::rng::{derive_seed, tag, tagged_rng};

pub const DEFAULT_EIG_TOL: f64 = 1e-8;
pub const DEFAULT_EIG_MAX_ITER: usize = 2000;

#[derive(Clone, Debug, PartialEq)]
pub struct EigResult {
    pub eigenvalue: f64,
    /// Unit-norm eigenvector.
    pub eigenvector: Vec<f64>,
    /// `‖Hv − μv‖₂`.
    pub residual: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Orthonormalizes `v` against `basis` (two passes of Gram–Schmidt) and
/// appends it unless it is numerically dependent.
fn push_orthonormal(basis: &mut Vec<Vec<f64>>, mut v: Vec<f64>) {
    let original = norm(&v);
    if !(original > 0.0) || !original.is_finite() {
        return;
    }
    for _ in 0..2 {
        for b in basis.iter() {
            let c = dot(b, &v);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    let nv = norm(&v);
    if nv > 1e-10 * original {
        v.iter_mut().for_each(|x| *x /= nv);
        basis.push(v);
    }
}

/// Smallest eigenvalue of `op` with a unit eigenvector.
///
/// Converged when `‖Hv − μv‖₂ ≤ tol · s`, where `s` is the largest absolute
/// endpoint of the Gershgorin interval of `op` (or 1 if that is zero).
pub fn min_eigenpair(op: &DualShiftedOperator, tol: f64, max_iter: usize, seed: u64) -> Result<EigResult> {
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("must be positive, got {tol}")));
    }
    let n = op.n();
    if n == 0 {
        return Err(invalid("n", "operator is empty"));
    }
    let g = op.gershgorin_interval();
    let scale = g.lower.abs().max(g.upper.abs());
    let threshold = tol * if scale > 0.0 { scale } else { 1.0 };

    let mut rng = tagged_rng(derive_seed(seed, &[n as u64]), tag::EIGS);
    let mut x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut p: Option<Vec<f64>> = None;

    let apply = |v: &[f64]| {
        let mut out = vec![0.0; n];
        op.apply_into(v, &mut out);
        out
    };

    let mut ax = apply(&x);
    let mut rho = dot(&x, &ax);
    let mut r: Vec<f64> = ax.iter().zip(&x).map(|(a, b)| a - rho * b).collect();
    let mut res = norm(&r);

    for it in 0..=max_iter {
        if !res.is_finite() || !rho.is_finite() {
            return Err(Error::NonFinite("eigensolver iterate"));
        }
        if res <= threshold {
            return Ok(EigResult {
                eigenvalue: rho,
                eigenvector: x,
                residual: res,
                iterations: it,
            });
        }
        if it == max_iter {
            break;
        }

        let mut basis = vec![x.clone()];
        push_orthonormal(&mut basis, r.clone());
        if let Some(p) = p.take() {
            push_orthonormal(&mut basis, p);
        }
        let mut images = vec![ax.clone()];
        images.extend(basis[1..].iter().map(|b| apply(b)));
        let m = basis.len();
        let mut h = Matrix3::<f64>::zeros();
        for i in 0..m {
            for j in i..m {
                let v = 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]));
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let e = SymmetricEigen::new(h.view((0, 0), (m, m)).into_owned());
        let idx = (0..m)
            .min_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]))
            .unwrap_or(0);
        let coeffs: Vec<f64> = e.eigenvectors.column(idx).iter().copied().collect();

        let mut new_x = vec![0.0; n];
        let mut new_p = vec![0.0; n];
        for (k, c) in coeffs.iter().enumerate() {
            for i in 0..n {
                new_x[i] += c * basis[k][i];
                if k > 0 {
                    new_p[i] += c * basis[k][i];
                }
            }
        }
        let nrm = norm(&new_x);
        new_x.iter_mut().for_each(|v| *v /= nrm);
        x = new_x;
        ax = apply(&x);
        rho = dot(&x, &ax);
        r = ax.iter().zip(&x).map(|(a, b)| a - rho * b).collect();
        res = norm(&r);
        p = (m > 1).then_some(new_p);
    }

    let exact = apply(&x);
    let rho = dot(&x, &exact);
    let residual = norm(&exact.iter().zip(&x).map(|(a, b)| a - rho * b).collect::<Vec<_>>());
    Err(Error::EigNotConverged {
        iterations: max_iter,
        eigenvalue: rho,
        residual,
        eigenvector: x,
    })
}
