//! Matvecs by the Gibbs factor `Y(λ)`, the square root of the primal
//! optimizer `X(λ) = Y(λ)²`.
//!
//! Two families are supported:
//!
//! * ordinary entropy: `Y = exp(-β/2 (C - λ·A))`, applied with a scaled
//!   truncated-Taylor [`expmv`];
//! * binary entropy: `Y = F_β^{1/2}(C - λ·A)` with
//!   `F_β^{1/2}(x) = 1/√(1 + e^{βx})`, applied with a Chebyshev expansion
//!   ([`cheb_apply`]) fitted on an interval enclosing the spectrum.
//!
//! [`dense`] evaluates the same matrix functions by full eigendecomposition
//! and serves as the reference for small instances.

mod cheb;
pub mod dense;
mod expmv;

use std::sync::Arc;

use nalgebra::DMatrix;

pub use cheb::{cheb_apply, cheb_fit, ChebApprox, DEFAULT_MAX_DEGREE};
pub use dense::{dense_reference, DenseReference, DEFAULT_DENSE_CAP};
pub use expmv::expmv;

use crate::error::{invalid, Result};
use crate::linop::{DualShiftedOperator, SpectralInterval};

/// Default relative tolerance for [`expmv`].
pub const DEFAULT_EXPMV_TOL: f64 = 1e-8;
/// Default sup-norm tolerance for the Chebyshev fit of `F_β^{1/2}`.
pub const DEFAULT_CHEB_TOL: f64 = 1e-5;

/// `F_β(x) = 1/(1 + e^{βx})`, evaluated without overflow.
pub fn fermi_dirac(x: f64, beta: f64) -> f64 {
    let t = beta * x;
    if t > 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

/// `F_β^{1/2}(x) = 1/√(1 + e^{βx})`, evaluated without overflow.
pub fn fermi_dirac_sqrt(x: f64, beta: f64) -> f64 {
    let t = beta * x;
    if t > 0.0 {
        let e = (-t).exp();
        (-0.5 * t).exp() / (1.0 + e).sqrt()
    } else {
        1.0 / (1.0 + t.exp()).sqrt()
    }
}

/// Which matrix function `Y` represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorKind {
    /// `Y = exp(-β/2 H)`, `X = exp(-βH)`.
    HalfExponential,
    /// `Y = F_β^{1/2}(H)`, `X = F_β(H)`.
    SqrtFermiDirac,
}

/// Matvec-capable representation of `Y(λ)` for a fixed dual point.
#[derive(Clone, Debug)]
pub struct GibbsFactorOperator {
    shifted: DualShiftedOperator,
    beta: f64,
    kind: FactorKind,
    interval: Option<SpectralInterval>,
    cheb: Option<Arc<ChebApprox>>,
    expmv_tol: f64,
}

impl GibbsFactorOperator {
    /// `Y = exp(-β/2 H)`.
    pub fn half_exponential(shifted: DualShiftedOperator, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self {
            shifted,
            beta,
            kind: FactorKind::HalfExponential,
            interval: None,
            cheb: None,
            expmv_tol: DEFAULT_EXPMV_TOL,
        })
    }

    /// `Y = F_β^{1/2}(H)`, fitting a Chebyshev expansion on `interval` to
    /// sup error `tol`. The interval must enclose the spectrum of `shifted`.
    pub fn sqrt_fermi_dirac(
        shifted: DualShiftedOperator,
        beta: f64,
        interval: SpectralInterval,
        tol: f64,
    ) -> Result<Self> {
        check_beta(beta)?;
        let approx = sqrt_fermi_dirac_approx(beta, interval, tol)?;
        Self::with_approx(shifted, beta, Arc::new(approx))
    }

    /// `Y = F_β^{1/2}(H)` reusing an existing fit, so that iterating solvers
    /// whose spectrum stays inside the fitted interval fit only once.
    pub fn with_approx(shifted: DualShiftedOperator, beta: f64, approx: Arc<ChebApprox>) -> Result<Self> {
        check_beta(beta)?;
        let interval = approx.interval();
        Ok(Self {
            shifted,
            beta,
            kind: FactorKind::SqrtFermiDirac,
            interval: Some(interval),
            cheb: Some(approx),
            expmv_tol: DEFAULT_EXPMV_TOL,
        })
    }

    pub fn with_expmv_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(invalid("expmv_tol", format!("must be positive, got {tol}")));
        }
        self.expmv_tol = tol;
        Ok(self)
    }

    pub fn shifted(&self) -> &DualShiftedOperator {
        &self.shifted
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn interval(&self) -> Option<SpectralInterval> {
        self.interval
    }

    pub fn approx(&self) -> Option<&Arc<ChebApprox>> {
        self.cheb.as_ref()
    }

    pub fn n(&self) -> usize {
        self.shifted.n()
    }

    /// `Y V`, column by column.
    pub fn apply(&self, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match (self.kind, &self.cheb) {
            (FactorKind::HalfExponential, _) => expmv(&self.shifted, v, -0.5 * self.beta, self.expmv_tol),
            (FactorKind::SqrtFermiDirac, Some(approx)) => cheb_apply(approx, &self.shifted, v),
            (FactorKind::SqrtFermiDirac, None) => Err(invalid(
                "interval",
                "sqrt-fermi-dirac factor requires a spectral interval",
            )),
        }
    }
}

/// Chebyshev fit of `F_β^{1/2}` on `interval`.
pub fn sqrt_fermi_dirac_approx(beta: f64, interval: SpectralInterval, tol: f64) -> Result<ChebApprox> {
    check_beta(beta)?;
    cheb_fit(|x| fermi_dirac_sqrt(x, beta), interval, tol, DEFAULT_MAX_DEGREE)
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid("beta", format!("must be positive and finite, got {beta}")));
    }
    Ok(())
}
