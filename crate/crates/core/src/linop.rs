//! Sparse symmetric matrices and the dual-shifted operator `C - λ·A`.
//!
//! Solvers never see an assembled `C - λ·A`; they see a [`DualShiftedOperator`]
//! that applies the cost matrix and subtracts the constraint terms on the fly.

use std::io::BufRead;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

/// Symmetric sparse matrix in compressed sparse row form.
///
/// Construction always symmetrizes, so the stored pattern and values are
/// exactly symmetric. Absent diagonal entries are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds `(M + Mᵀ)/2` from unordered triplets, summing duplicates first.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut upper: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            if j >= n {
                return Err(Error::IndexOutOfRange { index: j, n });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("matrix entry"));
            }
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            upper.push((a, b, v));
        }
        // Stable sort keeps the summation order of duplicates deterministic.
        upper.sort_by_key(|&(a, b, _)| (a, b));

        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(upper.len());
        for (a, b, v) in upper {
            match merged.last_mut() {
                Some(last) if last.0 == a && last.1 == b => last.2 += v,
                _ => merged.push((a, b, v)),
            }
        }

        let mut full: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * merged.len());
        for (a, b, sum) in merged {
            if a == b {
                if sum != 0.0 {
                    full.push((a, a, sum));
                }
            } else {
                let v = 0.5 * sum;
                if v != 0.0 {
                    full.push((a, b, v));
                    full.push((b, a, v));
                }
            }
        }
        full.sort_by_key(|&(a, b, _)| (a, b));
        Ok(Self::from_sorted(n, &full))
    }

    /// Undirected weighted adjacency: each `(i, j, w)` sets `A_ij = A_ji = w`.
    /// Repeated edges accumulate.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let triplets = edges.iter().flat_map(|&(i, j, w)| {
            if i == j {
                vec![(i, i, w)]
            } else {
                vec![(i, j, w), (j, i, w)]
            }
        });
        Self::from_triplets(n, triplets)
    }

    fn from_sorted(n: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut row_offsets = vec![0usize; n + 1];
        for &(i, _, _) in entries {
            row_offsets[i + 1] += 1;
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }
        Self {
            n,
            row_offsets,
            col_indices: entries.iter().map(|e| e.1).collect(),
            values: entries.iter().map(|e| e.2).collect(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_sorted(n, &[])
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let entries: Vec<_> = d
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, i, v))
            .collect();
        Self::from_sorted(d.len(), &entries)
    }

    /// Dense symmetric input; only used for small test instances.
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let n = m.nrows();
        let triplets = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| m[(i, j)] != 0.0)
            .map(|(i, j)| (i, j, m[(i, j)]));
        Self::from_triplets(n, triplets)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Stored entries of row `i` as `(column, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, v.len())?;
        let mut out = vec![0.0; self.n];
        self.matvec_into(v, &mut out);
        Ok(out)
    }

    /// `out = M v` without dimension checks.
    #[inline]
    pub(crate) fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc += self.values[k] * v[self.col_indices[k]];
            }
            *o = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Row sums `M 1`, i.e. weighted degrees for an adjacency matrix.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// `1ᵀ M 1`.
    pub fn total_sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Sum of absolute off-diagonal entries in each row.
    pub fn offdiag_abs_row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).filter(|&(j, _)| j != i).map(|(_, v)| v.abs()).sum())
            .collect()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        if alpha == 0.0 {
            return Self::zeros(self.n);
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn gershgorin_interval(&self) -> SpectralInterval {
        gershgorin(&self.diagonal(), &self.offdiag_abs_row_sums())
    }

    /// Reads a whitespace-delimited edge list (`i j [weight]`, 0-based,
    /// each undirected edge listed once). Blank lines and lines starting with
    /// `#` or `%` are skipped. The dimension is `n` if given, otherwise one
    /// more than the largest index seen.
    pub fn read_edge_list<R: BufRead>(reader: R, n: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max_index = None::<usize>;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
                continue;
            }
            let parse_err = |reason: String| Error::Parse {
                line: lineno + 1,
                reason,
            };
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(parse_err(format!(
                    "expected `i j [weight]`, found {} fields",
                    fields.len()
                )));
            }
            let i: usize = fields[0]
                .parse()
                .map_err(|e| parse_err(format!("bad index `{}`: {e}", fields[0])))?;
            let j: usize = fields[1]
                .parse()
                .map_err(|e| parse_err(format!("bad index `{}`: {e}", fields[1])))?;
            let w: f64 = match fields.get(2) {
                Some(s) => s.parse().map_err(|e| parse_err(format!("bad weight `{s}`: {e}")))?,
                None => 1.0,
            };
            max_index = Some(max_index.map_or(i.max(j), |m| m.max(i).max(j)));
            edges.push((i, j, w));
        }
        let n = match (n, max_index) {
            (Some(n), _) => n,
            (None, Some(m)) => m + 1,
            (None, None) => 0,
        };
        Self::from_edges(n, &edges)
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn gershgorin(centers: &[f64], radii: &[f64]) -> SpectralInterval {
    if centers.is_empty() {
        return SpectralInterval { lower: 0.0, upper: 0.0 };
    }
    let lower = centers
        .iter()
        .zip(radii)
        .map(|(c, r)| c - r)
        .fold(f64::INFINITY, f64::min);
    let upper = centers
        .iter()
        .zip(radii)
        .map(|(c, r)| c + r)
        .fold(f64::NEG_INFINITY, f64::max);
    SpectralInterval { lower, upper }
}

/// Closed interval `[lower, upper]` that encloses a spectrum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralInterval {
    pub lower: f64,
    pub upper: f64,
}

impl SpectralInterval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower > upper {
            return Err(invalid(
                "interval",
                format!("need finite lower <= upper, got [{lower}, {upper}]"),
            ));
        }
        Ok(Self { lower, upper })
    }

    /// `[-r, r]`.
    pub fn symmetric(r: f64) -> Result<Self> {
        Self::new(-r, r)
    }

    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    /// Interval of `M - μI` given this interval for `M`.
    pub fn shifted(&self, mu: f64) -> Self {
        Self {
            lower: self.lower - mu,
            upper: self.upper - mu,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn contains_interval(&self, other: &SpectralInterval) -> bool {
        self.lower <= other.lower && other.upper <= self.upper
    }
}

/// The `λ·A` part of `C - λ·A`.
#[derive(Clone, Debug)]
pub enum Shift {
    /// `A_k = e_k e_kᵀ`, so `λ·A = diag(λ)`.
    Diagonal(Vec<f64>),
    /// `λ·A = μI`.
    Scalar(f64),
    /// Arbitrary symmetric `A_k` with multipliers `λ_k`.
    General(Vec<(Arc<SparseSymMatrix>, f64)>),
}

/// The implicit operator `C - λ·A`.
#[derive(Clone, Debug)]
pub struct DualShiftedOperator {
    base: Arc<SparseSymMatrix>,
    shift: Shift,
}

impl DualShiftedOperator {
    pub fn new(base: Arc<SparseSymMatrix>, shift: Shift) -> Result<Self> {
        let n = base.n();
        match &shift {
            Shift::Diagonal(lambda) => {
                check_len(n, lambda.len())?;
                if lambda.iter().any(|l| !l.is_finite()) {
                    return Err(Error::NonFinite("diagonal shift"));
                }
            }
            Shift::Scalar(mu) => {
                if !mu.is_finite() {
                    return Err(Error::NonFinite("scalar shift"));
                }
            }
            Shift::General(terms) => {
                for (a, l) in terms {
                    check_len(n, a.n())?;
                    if !l.is_finite() {
                        return Err(Error::NonFinite("constraint multiplier"));
                    }
                }
            }
        }
        Ok(Self { base, shift })
    }

    /// `C` itself.
    pub fn unshifted(base: Arc<SparseSymMatrix>) -> Self {
        Self {
            base,
            shift: Shift::Scalar(0.0),
        }
    }

    /// `C - diag(λ)`.
    pub fn diagonal(base: Arc<SparseSymMatrix>, lambda: Vec<f64>) -> Result<Self> {
        Self::new(base, Shift::Diagonal(lambda))
    }

    /// `C - μI`.
    pub fn scalar(base: Arc<SparseSymMatrix>, mu: f64) -> Result<Self> {
        Self::new(base, Shift::Scalar(mu))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn base(&self) -> &Arc<SparseSymMatrix> {
        &self.base
    }

    pub fn shift(&self) -> &Shift {
        &self.shift
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), v.len())?;
        let mut out = vec![0.0; self.n()];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// `out = (C - λ·A) v` without dimension checks.
    pub(crate) fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        self.base.matvec_into(v, out);
        match &self.shift {
            Shift::Diagonal(lambda) => {
                for ((o, &l), &x) in out.iter_mut().zip(lambda).zip(v) {
                    *o -= l * x;
                }
            }
            Shift::Scalar(mu) => {
                if *mu != 0.0 {
                    for (o, &x) in out.iter_mut().zip(v) {
                        *o -= mu * x;
                    }
                }
            }
            Shift::General(terms) => {
                let mut tmp = vec![0.0; v.len()];
                for (a, l) in terms {
                    a.matvec_into(v, &mut tmp);
                    for (o, t) in out.iter_mut().zip(&tmp) {
                        *o -= l * t;
                    }
                }
            }
        }
    }

    /// Applies the operator to every column of `v`.
    pub fn apply_block(&self, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_len(self.n(), v.nrows())?;
        let n = self.n();
        let mut out = DMatrix::zeros(n, v.ncols());
        if n == 0 {
            return Ok(out);
        }
        out.as_mut_slice()
            .par_chunks_mut(n)
            .zip(v.as_slice().par_chunks(n))
            .for_each(|(o, x)| self.apply_into(x, o));
        Ok(out)
    }

    /// Gershgorin enclosure of the spectrum. Diagonal and scalar shifts are
    /// folded into the disc centers; general shifts are bounded by interval
    /// arithmetic on each term.
    pub fn gershgorin_interval(&self) -> SpectralInterval {
        let mut centers = self.base.diagonal();
        let radii = self.base.offdiag_abs_row_sums();
        match &self.shift {
            Shift::Diagonal(lambda) => {
                centers.iter_mut().zip(lambda).for_each(|(c, l)| *c -= l);
                gershgorin(&centers, &radii)
            }
            Shift::Scalar(mu) => gershgorin(&centers, &radii).shifted(*mu),
            Shift::General(terms) => {
                let mut iv = gershgorin(&centers, &radii);
                for (a, l) in terms {
                    let t = a.gershgorin_interval();
                    let (lo, hi) = if *l >= 0.0 {
                        (-l * t.upper, -l * t.lower)
                    } else {
                        (-l * t.lower, -l * t.upper)
                    };
                    iv.lower += lo;
                    iv.upper += hi;
                }
                iv
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = self.base.to_dense();
        match &self.shift {
            Shift::Diagonal(lambda) => {
                for (i, l) in lambda.iter().enumerate() {
                    m[(i, i)] -= l;
                }
            }
            Shift::Scalar(mu) => {
                for i in 0..self.n() {
                    m[(i, i)] -= mu;
                }
            }
            Shift::General(terms) => {
                for (a, l) in terms {
                    m -= a.to_dense() * *l;
                }
            }
        }
        m
    }
}
