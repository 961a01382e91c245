//! Conditional least squares for INAR(p)/VAR(p) count models and the Hawkes
//! estimator built on top of it.
//!
//! `B̂ = Y Zᵀ (Z Zᵀ)⁻¹` is obtained from a Cholesky solve of the normal
//! equations. The Gram inverse is formed once because the sandwich
//! covariance consumes it.

mod covariance;
mod design;
mod estimator;

pub use covariance::{covariance_estimate, covariance_estimate_sparse};
pub use design::{
    build_design, build_design_unchecked, DesignMatrices, SparseDesign, ESTIMABILITY_MARGIN,
};
pub use estimator::{
    confidence_interval, hawkes_estimator, hawkes_estimator_with, DesignStorage, EstimatorOptions,
    HawkesFit, Interval, Target,
};

use nalgebra::{Cholesky, DMatrix};

use crate::error::{HawkesError, Result};
use crate::events::BinCountSequence;
use crate::linalg::norm1;

/// Fits with a 1-norm condition estimate of `Z Zᵀ` above this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Result of a conditional least-squares fit on the count scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ClsFit {
    /// `B̂ ∈ R^{d×(dp+1)}`: lag blocks `Â_1 .. Â_p`, then the intercept column.
    pub coefficients: DMatrix<f64>,
    /// `Û = Y - B̂ Z ∈ R^{d×(n-p)}`.
    pub residuals: DMatrix<f64>,
    /// `(Z Zᵀ)⁻¹`.
    pub gram_inverse: DMatrix<f64>,
    /// `‖Z Zᵀ‖₁ ‖(Z Zᵀ)⁻¹‖₁`.
    pub condition: f64,
}

impl ClsFit {
    pub fn dim(&self) -> usize {
        self.coefficients.nrows()
    }
}

/// Solves the normal equations `G B̂ᵀ = Z Yᵀ` for symmetric positive definite `G = Z Zᵀ`.
fn solve_normal_equations(
    gram: DMatrix<f64>,
    cross: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    let g_norm = norm1(&gram);
    let chol = Cholesky::new(gram).ok_or(HawkesError::SingularDesign {
        condition: f64::INFINITY,
    })?;
    let inverse = chol.inverse();
    let condition = g_norm * norm1(&inverse);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(HawkesError::SingularDesign { condition });
    }
    let bt = chol.solve(cross);
    Ok((bt.transpose(), inverse, condition))
}

/// CLS fit on a dense design.
pub fn cls_fit(dm: &DesignMatrices) -> Result<ClsFit> {
    let gram = &dm.z * dm.z.transpose();
    let cross = &dm.z * dm.y.transpose();
    let (coefficients, gram_inverse, condition) = solve_normal_equations(gram, &cross)?;
    let residuals = &dm.y - &coefficients * &dm.z;
    Ok(ClsFit {
        coefficients,
        residuals,
        gram_inverse,
        condition,
    })
}

/// CLS fit of order `p` straight from bin counts, on the requested storage.
pub fn cls_fit_counts(bc: &BinCountSequence, p: usize, storage: DesignStorage) -> Result<ClsFit> {
    match storage.resolve(bc, p) {
        DesignStorage::Sparse => cls_fit_sparse(&SparseDesign::new(bc, p)?),
        _ => cls_fit(&build_design(bc, p)?),
    }
}

/// CLS fit through the sparse column view; agrees with [`cls_fit`] up to rounding.
pub fn cls_fit_sparse(design: &SparseDesign<'_>) -> Result<ClsFit> {
    let d = design.dim();
    let m = design.regressors();
    let mut gram = DMatrix::<f64>::zeros(m, m);
    let mut cross = DMatrix::<f64>::zeros(m, d);
    design.for_each_column(|_, nz, target| {
        for (a, &(ra, va)) in nz.iter().enumerate() {
            for &(rb, vb) in &nz[..=a] {
                gram[(ra.max(rb), ra.min(rb))] += va * vb;
            }
            for (i, &y) in target.iter().enumerate() {
                if y > 0 {
                    cross[(ra, i)] += va * y as f64;
                }
            }
        }
    });
    gram.fill_upper_triangle_with_lower_triangle();
    let (coefficients, gram_inverse, condition) = solve_normal_equations(gram, &cross)?;
    let mut residuals = DMatrix::<f64>::zeros(d, design.rows());
    design.for_each_column(|c, nz, target| {
        for i in 0..d {
            let fitted: f64 = nz.iter().map(|&(r, v)| coefficients[(i, r)] * v).sum();
            residuals[(i, c)] = target[i] as f64 - fitted;
        }
    });
    Ok(ClsFit {
        coefficients,
        residuals,
        gram_inverse,
        condition,
    })
}
