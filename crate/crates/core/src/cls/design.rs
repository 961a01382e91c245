//! Design matrices for conditional least squares.
//!
//! For a sample `x_1, ..., x_n` and order `p`, column `k` of `Z` stacks the
//! `p` preceding count vectors newest first followed by a one:
//! `(x_{k-1}ᵀ, ..., x_{k-p}ᵀ, 1)ᵀ`, and `Y` holds the targets `x_{p+1..n}`.
//! [`SparseDesign`] exposes the same columns as non-zero lists without
//! materialising `Z`, which matters for very small bin widths.

use nalgebra::DMatrix;

use crate::error::{HawkesError, Result};
use crate::events::BinCountSequence;

/// Rows beyond the parameter count required before a fit is attempted.
pub const ESTIMABILITY_MARGIN: usize = 5;

/// Dense `Z ∈ R^{(dp+1)×(n-p)}` and `Y ∈ R^{d×(n-p)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrices {
    pub d: usize,
    pub p: usize,
    pub n: usize,
    pub z: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

impl DesignMatrices {
    pub fn regressors(&self) -> usize {
        self.d * self.p + 1
    }

    pub fn rows(&self) -> usize {
        self.n - self.p
    }
}

pub(crate) fn check_order(d: usize, p: usize, n: usize) -> Result<()> {
    if p == 0 || p >= n {
        return Err(HawkesError::InvalidOrder { p, n });
    }
    let rows = n - p;
    let required = d * p + 1 + ESTIMABILITY_MARGIN;
    if rows < required {
        return Err(HawkesError::Underdetermined { rows, required });
    }
    Ok(())
}

/// Builds `Z` and `Y` from a bin-count sequence.
pub fn build_design(bc: &BinCountSequence, p: usize) -> Result<DesignMatrices> {
    check_order(bc.dim(), p, bc.len())?;
    build_design_unchecked(bc, p)
}

/// Same layout as [`build_design`] without the estimability margin; only
/// `1 <= p < n` is enforced.
pub fn build_design_unchecked(bc: &BinCountSequence, p: usize) -> Result<DesignMatrices> {
    let d = bc.dim();
    let n = bc.len();
    if p == 0 || p >= n {
        return Err(HawkesError::InvalidOrder { p, n });
    }
    let m = d * p + 1;
    let cols = n - p;
    let mut z = DMatrix::zeros(m, cols);
    let mut y = DMatrix::zeros(d, cols);
    for c in 0..cols {
        let t = p + c;
        for lag in 1..=p {
            let x = bc.bin(t - lag);
            for j in 0..d {
                z[((lag - 1) * d + j, c)] = x[j] as f64;
            }
        }
        z[(m - 1, c)] = 1.0;
        for (i, &v) in bc.bin(t).iter().enumerate() {
            y[(i, c)] = v as f64;
        }
    }
    Ok(DesignMatrices { d, p, n, z, y })
}

/// Column-wise non-zero view of the design over a bin-count sequence.
#[derive(Debug, Clone)]
pub struct SparseDesign<'a> {
    bc: &'a BinCountSequence,
    p: usize,
    /// For each bin: non-zero `(component, count)` pairs.
    nonzero: Vec<Vec<(usize, f64)>>,
    /// Ascending indices of bins with at least one event.
    active: Vec<usize>,
}

impl<'a> SparseDesign<'a> {
    pub fn new(bc: &'a BinCountSequence, p: usize) -> Result<Self> {
        check_order(bc.dim(), p, bc.len())?;
        let nonzero: Vec<Vec<(usize, f64)>> = bc
            .iter()
            .map(|x| {
                x.iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(j, &c)| (j, c as f64))
                    .collect()
            })
            .collect();
        let active = nonzero
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_empty())
            .map(|(t, _)| t)
            .collect();
        Ok(SparseDesign {
            bc,
            p,
            nonzero,
            active,
        })
    }

    pub fn dim(&self) -> usize {
        self.bc.dim()
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.bc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bc.is_empty()
    }

    pub fn regressors(&self) -> usize {
        self.dim() * self.p + 1
    }

    pub fn rows(&self) -> usize {
        self.len() - self.p
    }

    /// Calls `f(column, nonzeros, target)` for every design column in order.
    /// `nonzeros` lists `(row, value)` pairs, the ones row last.
    pub fn for_each_column(&self, mut f: impl FnMut(usize, &[(usize, f64)], &[u32])) {
        let d = self.dim();
        let p = self.p;
        let m = self.regressors();
        let mut buf: Vec<(usize, f64)> = Vec::new();
        let mut lo = 0usize; // first active index >= t - p
        for c in 0..self.rows() {
            let t = p + c;
            while lo < self.active.len() && self.active[lo] < t - p {
                lo += 1;
            }
            buf.clear();
            let mut idx = lo;
            while idx < self.active.len() && self.active[idx] < t {
                let s = self.active[idx];
                let lag = t - s;
                for &(j, v) in &self.nonzero[s] {
                    buf.push(((lag - 1) * d + j, v));
                }
                idx += 1;
            }
            buf.push((m - 1, 1.0));
            f(c, &buf, self.bc.bin(t));
        }
    }
}
