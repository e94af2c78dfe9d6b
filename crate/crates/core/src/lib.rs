//! Matrix-free solvers for entropically regularized semidefinite programs.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dualsolve;
pub mod eigs;
pub mod embed;
pub mod error;
pub mod io;
pub mod linop;
pub mod matfunc;
pub mod maxcut;
pub mod rng;
pub mod sketch;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
