//! Sandwich covariance of `vec(Ĥ)`.
//!
//! With `G = Z Zᵀ`, count-scale residual `u_k` and design column `Z_k`, the
//! estimate is `(1/Δ²) (G⁻¹ ⊗ I_d) Σ_k w_k w_kᵀ (G⁻¹ ⊗ I_d)` where
//! `w_k = vec(u_k Z_kᵀ)`. Entry `(c·d + i, c'·d + i')` of the result equals
//! `(G⁻¹ M_{ii'} G⁻¹)[c, c'] / Δ²` with `M_{ii'} = Σ_k u_{ki} u_{ki'} Z_k Z_kᵀ`,
//! so the Kronecker products are never formed.

use nalgebra::DMatrix;

use super::design::{DesignMatrices, SparseDesign};
use super::ClsFit;
use crate::error::{HawkesError, Result};

fn check_delta(delta: f64) -> Result<()> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(HawkesError::InvalidParameter(format!(
            "bin size must be positive, got {delta}"
        )));
    }
    Ok(())
}

/// Assembles the sandwich from the per-pair meat matrices `M_{ii'}` (`i <= i'`).
fn assemble(
    d: usize,
    gram_inverse: &DMatrix<f64>,
    meats: &[((usize, usize), DMatrix<f64>)],
    delta: f64,
) -> DMatrix<f64> {
    let m = gram_inverse.nrows();
    let dim = m * d;
    let scale = 1.0 / (delta * delta);
    let mut s2 = DMatrix::zeros(dim, dim);
    for ((i, i2), meat) in meats {
        let block = gram_inverse * meat * gram_inverse * scale;
        for c in 0..m {
            for c2 in 0..m {
                let v = block[(c, c2)];
                s2[(c * d + i, c2 * d + i2)] = v;
                s2[(c2 * d + i2, c * d + i)] = v;
            }
        }
    }
    // symmetrize away rounding in the triple product
    for a in 0..dim {
        for b in 0..a {
            let v = 0.5 * (s2[(a, b)] + s2[(b, a)]);
            s2[(a, b)] = v;
            s2[(b, a)] = v;
        }
    }
    s2
}

/// Covariance estimate of `vec(Ĥ_1, ..., Ĥ_p, η̂)` from a dense design.
pub fn covariance_estimate(dm: &DesignMatrices, fit: &ClsFit, delta: f64) -> Result<DMatrix<f64>> {
    check_delta(delta)?;
    let d = dm.d;
    let mut meats = Vec::with_capacity(d * (d + 1) / 2);
    let mut scaled = dm.z.clone();
    for i in 0..d {
        for i2 in i..d {
            scaled.copy_from(&dm.z);
            for (c, mut col) in scaled.column_iter_mut().enumerate() {
                col *= fit.residuals[(i, c)] * fit.residuals[(i2, c)];
            }
            meats.push(((i, i2), &scaled * dm.z.transpose()));
        }
    }
    Ok(assemble(d, &fit.gram_inverse, &meats, delta))
}

/// Same estimate as [`covariance_estimate`] through the sparse column view.
pub fn covariance_estimate_sparse(
    design: &SparseDesign<'_>,
    fit: &ClsFit,
    delta: f64,
) -> Result<DMatrix<f64>> {
    check_delta(delta)?;
    let d = design.dim();
    let m = design.regressors();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |i2| (i, i2))).collect();
    let mut meats: Vec<((usize, usize), DMatrix<f64>)> = pairs
        .iter()
        .map(|&pair| (pair, DMatrix::zeros(m, m)))
        .collect();
    let mut weights = vec![0.0; pairs.len()];
    design.for_each_column(|c, nz, _| {
        for (w, &(i, i2)) in weights.iter_mut().zip(&pairs) {
            *w = fit.residuals[(i, c)] * fit.residuals[(i2, c)];
        }
        for (a, &(ra, va)) in nz.iter().enumerate() {
            for &(rb, vb) in &nz[..=a] {
                let prod = va * vb;
                let cell = (ra.max(rb), ra.min(rb));
                for (meat, &w) in meats.iter_mut().zip(&weights) {
                    meat.1[cell] += w * prod;
                }
            }
        }
    });
    for (_, meat) in meats.iter_mut() {
        meat.fill_upper_triangle_with_lower_triangle();
    }
    Ok(assemble(d, &fit.gram_inverse, &meats, delta))
}
