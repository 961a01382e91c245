//! Hawkes model parameters: baseline, excitation matrix, branching matrix and stability.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cls::{HawkesFit, Target};
use crate::error::{HawkesError, Result};
use crate::kernel::{Excitation, Kernel};
use crate::linalg::spectral_radius;
use crate::smoothing::integrate_pointwise;

/// Stability margin: a model passes when `spr(K) < 1 - STABILITY_TOL`.
pub const STABILITY_TOL: f64 = 1e-9;

/// Default number of midpoint cells across a kernel's support.
pub const DEFAULT_QUADRATURE_CELLS: f64 = 10_000.0;

/// Ground-truth multivariate Hawkes model: baseline `eta` and excitation `H`.
///
/// `excitation[i][j]` is `h_{i,j}`, the effect of a component-`j` event on
/// the intensity of component `i`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HawkesSpec {
    pub eta: Vec<f64>,
    pub excitation: Vec<Vec<Excitation>>,
}

impl HawkesSpec {
    pub fn new(eta: Vec<f64>, excitation: Vec<Vec<Excitation>>) -> Result<Self> {
        let spec = HawkesSpec { eta, excitation };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.eta.len();
        if d == 0 {
            return Err(HawkesError::InvalidParameter(
                "empty baseline vector".into(),
            ));
        }
        if self.eta.iter().any(|&e| !(e.is_finite() && e >= 0.0)) {
            return Err(HawkesError::InvalidParameter(
                "baseline intensities must be finite and non-negative".into(),
            ));
        }
        if self.eta.iter().all(|&e| e == 0.0) {
            return Err(HawkesError::InvalidParameter(
                "baseline vector must not be identically zero".into(),
            ));
        }
        if self.excitation.len() != d || self.excitation.iter().any(|row| row.len() != d) {
            return Err(HawkesError::InvalidParameter(format!(
                "excitation must be a {d}x{d} matrix of functions"
            )));
        }
        for (i, row) in self.excitation.iter().enumerate() {
            for (j, h) in row.iter().enumerate() {
                h.validate()?;
                if !matches!(h, Excitation::Custom(_)) && !h.is_nonnegative() {
                    return Err(HawkesError::InvalidParameter(format!(
                        "h_{{{},{}}} must be non-negative",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.eta.len()
    }

    pub fn kernel(&self, i: usize, j: usize) -> &Excitation {
        &self.excitation[i][j]
    }

    /// Largest declared support, `None` if some kernel is unbounded.
    pub fn max_support(&self) -> Option<f64> {
        self.excitation
            .iter()
            .flatten()
            .map(|h| h.support())
            .try_fold(0.0f64, |acc, s| s.map(|s| acc.max(s)))
    }

    /// Branching matrix from closed-form primitives, where every kernel has one.
    pub fn exact_branching_matrix(&self) -> Option<DMatrix<f64>> {
        let d = self.dim();
        let mut k = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let h = &self.excitation[i][j];
                k[(i, j)] = h.primitive(h.support().unwrap_or(f64::INFINITY))?;
            }
        }
        Some(k)
    }

    /// Copy with the baseline multiplied by `c`.
    pub fn with_scaled_baseline(&self, c: f64) -> HawkesSpec {
        HawkesSpec {
            eta: self.eta.iter().map(|e| e * c).collect(),
            excitation: self.excitation.clone(),
        }
    }
}

/// `K_{ij} = ∫ h_{i,j}` together with its spectral radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchingMatrix {
    pub matrix: DMatrix<f64>,
    pub spectral_radius: f64,
}

impl BranchingMatrix {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        let spectral_radius = spectral_radius(&matrix);
        BranchingMatrix {
            matrix,
            spectral_radius,
        }
    }
}

/// Midpoint-rule branching matrix over each kernel's declared support.
///
/// `quadrature_step` defaults to `support / 10_000` per kernel.
pub fn branching_matrix(
    spec: &HawkesSpec,
    quadrature_step: Option<f64>,
) -> Result<BranchingMatrix> {
    if let Some(step) = quadrature_step {
        if !(step > 0.0 && step.is_finite()) {
            return Err(HawkesError::InvalidParameter(format!(
                "quadrature step must be positive, got {step}"
            )));
        }
    }
    let d = spec.dim();
    let mut k = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let h = spec.kernel(i, j);
            let support = h.support().ok_or_else(|| {
                HawkesError::RejectedSpec(format!(
                    "h_{{{},{}}} has unbounded support; truncate it first",
                    i + 1,
                    j + 1
                ))
            })?;
            if support == 0.0 {
                continue;
            }
            let step = quadrature_step.unwrap_or(support / DEFAULT_QUADRATURE_CELLS);
            let cells = (support / step).ceil().max(1.0) as usize;
            let width = support / cells as f64;
            let mut acc = 0.0;
            for c in 0..cells {
                let v = h.try_eval((c as f64 + 0.5) * width)?;
                if v < 0.0 {
                    return Err(HawkesError::RejectedSpec(format!(
                        "h_{{{},{}}} is negative on its support",
                        i + 1,
                        j + 1
                    )));
                }
                acc += v;
            }
            k[(i, j)] = acc * width;
        }
    }
    Ok(BranchingMatrix::from_matrix(k))
}

/// `true` iff `spr(K) < 1 - 1e-9`.
pub fn stability_check(k: &BranchingMatrix) -> bool {
    k.spectral_radius < 1.0 - STABILITY_TOL
}

/// Branching-matrix estimate with 95% half-widths per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchingEstimate {
    pub matrix: DMatrix<f64>,
    pub half_widths: DMatrix<f64>,
    pub spectral_radius: f64,
}

impl BranchingEstimate {
    /// Renders `value (±half_width)` rows with two decimals.
    pub fn display_rows(&self) -> Vec<String> {
        (0..self.matrix.nrows())
            .map(|i| {
                (0..self.matrix.ncols())
                    .map(|j| {
                        format!(
                            "{:.2} (±{:.2})",
                            self.matrix[(i, j)],
                            self.half_widths[(i, j)]
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("  ")
            })
            .collect()
    }
}

/// `K̂_{ij} = Σ_k Δ (Ĥ_k)_{ij}` with variance `Δ² Σ_{k1,k2} Cov((Ĥ_{k1})_{ij}, (Ĥ_{k2})_{ij})`.
pub fn branching_from_fit(fit: &HawkesFit) -> Result<BranchingEstimate> {
    let s2 = fit.covariance().ok_or_else(|| {
        HawkesError::DiagnosticsUnavailable("fit carries no covariance estimate".into())
    })?;
    let d = fit.dim();
    let p = fit.p();
    let delta = fit.delta();
    let mut matrix = DMatrix::zeros(d, d);
    let mut half_widths = DMatrix::zeros(d, d);
    for i in 1..=d {
        for j in 1..=d {
            matrix[(i - 1, j - 1)] = integrate_pointwise(fit, i, j)?;
            let idx: Vec<usize> = (1..=p)
                .map(|k| Target::Excitation { k, i, j }.vec_index(d, p) - 1)
                .collect();
            let mut var = 0.0;
            for &a in &idx {
                for &b in &idx {
                    var += s2[(a, b)];
                }
            }
            var *= delta * delta;
            half_widths[(i - 1, j - 1)] = 1.96 * var.max(0.0).sqrt();
        }
    }
    let spectral_radius = spectral_radius(&matrix);
    Ok(BranchingEstimate {
        matrix,
        half_widths,
        spectral_radius,
    })
}
