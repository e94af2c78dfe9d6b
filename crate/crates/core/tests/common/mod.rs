//! Independent oracles shared by the integration tests. Everything here is
//! computed from a dense symmetric eigendecomposition or by enumeration,
//! without going through the library's own reference paths.

#![allow(dead_code)]

use entsdp::linop::SparseSymMatrix;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Symmetric matrix with about `degree` Gaussian off-diagonal entries per
/// row and a Gaussian diagonal, all multiplied by `scale`.
pub fn random_sparse(n: usize, degree: f64, scale: f64, seed: u64) -> SparseSymMatrix {
    let mut r = rng(seed);
    let p = (degree / n as f64).min(1.0);
    let mut trip = Vec::new();
    for i in 0..n {
        let d: f64 = r.sample(StandardNormal);
        trip.push((i, i, scale * d));
        for j in i + 1..n {
            if r.random::<f64>() < p {
                let v: f64 = r.sample(StandardNormal);
                trip.push((i, j, scale * v));
                trip.push((j, i, scale * v));
            }
        }
    }
    SparseSymMatrix::from_triplets(n, trip).unwrap()
}

pub fn eig(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::new(m.clone());
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

/// `f(H)` for symmetric `H`.
pub fn matfun(h: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (w, q) = eig(h);
    let mut scaled = q.clone();
    for (j, &wj) in w.iter().enumerate() {
        let fj = f(wj);
        scaled.column_mut(j).iter_mut().for_each(|x| *x *= fj);
    }
    scaled * q.transpose()
}

pub fn logistic(x: f64) -> f64 {
    // 1/(1+e^x)
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// `log(1 + e^x)`.
pub fn log1pexp(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Dual free energy of the trace problem from the eigenvalues of `C`.
pub fn trace_dual(c_eigs: &[f64], k: f64, beta: f64, mu: f64) -> f64 {
    k * mu - c_eigs.iter().map(|&c| log1pexp(-beta * (c - mu))).sum::<f64>() / beta
}

pub fn trace_x(c_eigs: &[f64], beta: f64, mu: f64) -> f64 {
    c_eigs.iter().map(|&c| logistic(beta * (c - mu))).sum()
}

/// Root of `k − Σ F_β(c_i − μ)` by plain bisection.
pub fn bisect_mu(c_eigs: &[f64], k: f64, beta: f64) -> f64 {
    let mut lo = c_eigs.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = c_eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    while trace_x(c_eigs, beta, lo) > k {
        lo -= hi - lo;
    }
    while trace_x(c_eigs, beta, hi) < k {
        hi += hi - lo;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if trace_x(c_eigs, beta, mid) < k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `g(λ) = b·λ − β⁻¹ Tr exp(−β(C − diag λ))`.
pub fn diagonal_dual(c: &DMatrix<f64>, b: &[f64], beta: f64, lambda: &[f64]) -> f64 {
    let mut h = c.clone();
    for (i, l) in lambda.iter().enumerate() {
        h[(i, i)] -= l;
    }
    let (w, _) = eig(&h);
    let bl: f64 = b.iter().zip(lambda).map(|(x, y)| x * y).sum();
    bl - w.iter().map(|&x| (-beta * x).exp()).sum::<f64>() / beta
}

pub fn gibbs_diag(c: &DMatrix<f64>, beta: f64, lambda: &[f64]) -> Vec<f64> {
    let mut h = c.clone();
    for (i, l) in lambda.iter().enumerate() {
        h[(i, i)] -= l;
    }
    let x = matfun(&h, |w| (-beta * w).exp());
    (0..c.nrows()).map(|i| x[(i, i)]).collect()
}

/// `min_x xᵀCx` over `x ∈ {±1}ⁿ` by enumeration.
pub fn brute_force_min(c: &DMatrix<f64>) -> f64 {
    let n = c.nrows();
    assert!(n <= 20);
    let mut best = f64::INFINITY;
    for mask in 0..1u32 << n {
        let x: Vec<f64> = (0..n).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let mut v = 0.0;
        for i in 0..n {
            for j in 0..n {
                v += x[i] * c[(i, j)] * x[j];
            }
        }
        best = best.min(v);
    }
    best
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

pub fn gaussian_block(n: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_fn(n, cols, |_, _| r.sample(StandardNormal))
}
