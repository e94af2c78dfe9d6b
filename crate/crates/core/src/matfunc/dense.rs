//! Exact dense evaluation by full eigendecomposition, for small instances.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{check_beta, fermi_dirac, FactorKind};
use crate::error::{Error, Result};
use crate::linop::DualShiftedOperator;

/// Largest dimension the dense reference accepts by default.
pub const DEFAULT_DENSE_CAP: usize = 512;

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Exact `X`, `Y = X^{1/2}` and the scalar traces the solvers estimate.
#[derive(Clone, Debug)]
pub struct DenseReference {
    /// Eigenvalues of `H = C - λ·A`, ascending.
    pub eigenvalues: DVector<f64>,
    /// Matching orthonormal eigenvectors (columns).
    pub eigenvectors: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub trace_x: f64,
    pub trace_x2: f64,
    /// `Tr exp(-βH)`.
    pub trace_gibbs: f64,
    /// `Tr log(I + exp(-βH))`.
    pub trace_log_fermi: f64,
    /// `S(X) = Tr[X log X - X]`.
    pub entropy: f64,
    /// `Tr[X log X] + Tr[(I - X) log(I - X)]`; NaN unless `0 < X < I`.
    pub binary_entropy: f64,
}

impl DenseReference {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn diag_x(&self) -> Vec<f64> {
        self.x.diagonal().iter().copied().collect()
    }
}

/// Eigendecomposition of a dense symmetric matrix with ascending eigenvalues.
pub fn sorted_eigen(m: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `U diag(f(w)) Uᵀ`.
pub fn spectral_apply(values: &DVector<f64>, vectors: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (j, &w) in values.iter().enumerate() {
        let fw = f(w);
        scaled.column_mut(j).iter_mut().for_each(|x| *x *= fw);
    }
    scaled * vectors.transpose()
}

pub fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::DenseCapExceeded { n, cap });
    }
    Ok(())
}

/// Exact reference for `Y` of the given kind at the operator's dual point.
pub fn dense_reference(op: &DualShiftedOperator, beta: f64, kind: FactorKind, cap: usize) -> Result<DenseReference> {
    check_beta(beta)?;
    check_cap(op.n(), cap)?;
    let (values, vectors) = sorted_eigen(op.to_dense());
    Ok(reference_from_eigen(values, vectors, beta, kind))
}

/// Same as [`dense_reference`] from a precomputed eigendecomposition of `H`.
pub fn reference_from_eigen(
    values: DVector<f64>,
    vectors: DMatrix<f64>,
    beta: f64,
    kind: FactorKind,
) -> DenseReference {
    let x_of = |w: f64| match kind {
        FactorKind::HalfExponential => (-beta * w).exp(),
        FactorKind::SqrtFermiDirac => fermi_dirac(w, beta),
    };
    let x = spectral_apply(&values, &vectors, x_of);
    let y = spectral_apply(&values, &vectors, |w| x_of(w).sqrt());
    let xs: Vec<f64> = values.iter().map(|&w| x_of(w)).collect();
    let xlogx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    let binary_entropy = if xs.iter().all(|&x| x > 0.0 && x < 1.0) {
        xs.iter().map(|&x| xlogx(x) + xlogx(1.0 - x)).sum()
    } else {
        f64::NAN
    };
    DenseReference {
        trace_x: xs.iter().sum(),
        trace_x2: xs.iter().map(|x| x * x).sum(),
        trace_gibbs: values.iter().map(|&w| (-beta * w).exp()).sum(),
        trace_log_fermi: values.iter().map(|&w| softplus(-beta * w)).sum(),
        entropy: xs.iter().map(|&x| xlogx(x) - x).sum(),
        binary_entropy,
        eigenvalues: values,
        eigenvectors: vectors,
        x,
        y,
    }
}
