use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linop::DualShiftedOperator;

/// Target norm of each Taylor segment.
const SEGMENT_NORM: f64 = 1.0;
const MAX_TERMS: usize = 60;

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `exp(tH) V` for the shifted operator `H`.
///
/// `H` is recentred on the midpoint `c` of its Gershgorin interval, so that
/// `exp(tH) = exp(tc) exp(t(H - cI))` with `‖t(H - cI)‖ ≤ |t|·range/2`. The
/// exponential is split into `s` segments of norm at most one, and each
/// segment is a Taylor series truncated once two consecutive terms fall below
/// `tol/s` relative to the partial sum.
pub fn expmv(op: &DualShiftedOperator, v: &DMatrix<f64>, t: f64, tol: f64) -> Result<DMatrix<f64>> {
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("must be positive, got {tol}")));
    }
    if !t.is_finite() {
        return Err(invalid("t", "must be finite"));
    }
    let n = op.n();
    if v.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.nrows(),
        });
    }
    let mut out = v.clone();
    if n == 0 || t == 0.0 {
        return Ok(out);
    }
    let iv = op.gershgorin_interval();
    let center = iv.midpoint();
    let norm = t.abs() * 0.5 * iv.range();
    let segments = ((norm / SEGMENT_NORM).ceil() as usize).max(1);
    let h = t / segments as f64;
    let seg_scale = (h * center).exp();
    let seg_tol = tol / segments as f64;

    out.as_mut_slice().par_chunks_mut(n).for_each(|x| {
        let mut term = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        for _ in 0..segments {
            term.copy_from_slice(x);
            let mut small_prev = false;
            for k in 1..=MAX_TERMS {
                op.apply_into(&term, &mut tmp);
                let f = h / k as f64;
                for (tk, &ht) in term.iter_mut().zip(&tmp) {
                    *tk = f * (ht - center * *tk);
                }
                for (xi, &tk) in x.iter_mut().zip(&term) {
                    *xi += tk;
                }
                let small = inf_norm(&term) <= seg_tol * inf_norm(x);
                if small && small_prev {
                    break;
                }
                small_prev = small;
            }
            if seg_scale != 1.0 {
                x.iter_mut().for_each(|xi| *xi *= seg_scale);
            }
        }
    });
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("expmv"));
    }
    Ok(out)
}
