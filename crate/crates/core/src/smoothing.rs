//! Function estimates from the pointwise grid values of a fit.
//!
//! The built-in smoother is the box moving average
//! `ĥ(t) = mean{ ĥ_k : kΔ ∈ [t - τ/2, t + τ/2] }`. Other smoothers plug in
//! through [`Smoother`]; every smoothed entry is exposed as a [`Kernel`] so
//! it can drive diagnostics like any parametric excitation.

use std::fmt;
use std::sync::Arc;

use crate::cls::HawkesFit;
use crate::error::{HawkesError, Result};
use crate::grid::{ceil_ratio, floor_ratio};
use crate::kernel::Kernel;

/// Turns grid values `v_k ≈ h(kΔ)`, `k = 1..=p`, into an evaluable curve on `[0, support]`.
pub trait Smoother {
    fn name(&self) -> &str;
    /// Window parameter reported alongside the curves, if any.
    fn window(&self) -> Option<f64> {
        None
    }
    fn smooth(&self, values: &[f64], delta: f64, support: f64) -> Result<Arc<dyn Kernel>>;
}

/// Box moving average with window width `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSmoother {
    pub tau: f64,
}

impl BoxSmoother {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(HawkesError::InvalidParameter(format!(
                "smoothing window must be positive, got {tau}"
            )));
        }
        Ok(BoxSmoother { tau })
    }
}

impl Smoother for BoxSmoother {
    fn name(&self) -> &str {
        "box"
    }

    fn window(&self) -> Option<f64> {
        Some(self.tau)
    }

    fn smooth(&self, values: &[f64], delta: f64, support: f64) -> Result<Arc<dyn Kernel>> {
        Ok(Arc::new(BoxCurve::new(values, delta, support, self.tau)?))
    }
}

/// Box-smoothed curve over grid values at `Δ, 2Δ, ..., pΔ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxCurve {
    delta: f64,
    support: f64,
    tau: f64,
    values: Vec<f64>,
    nonnegative: bool,
}

impl BoxCurve {
    pub fn new(values: &[f64], delta: f64, support: f64, tau: f64) -> Result<Self> {
        BoxSmoother::new(tau)?;
        if !(delta.is_finite() && delta > 0.0 && support.is_finite() && support > 0.0) {
            return Err(HawkesError::InvalidParameter(format!(
                "invalid grid: delta {delta}, support {support}"
            )));
        }
        Ok(BoxCurve {
            delta,
            support,
            tau,
            values: values.to_vec(),
            nonnegative: values.iter().all(|&v| v >= 0.0),
        })
    }

    fn grid_len(&self) -> usize {
        self.values.len()
    }

    /// Grid indices `lo..=hi` inside the closed window around `t`, if any.
    fn window_range(&self, t: f64) -> Option<(usize, usize)> {
        let half = self.tau / 2.0;
        let lo = ceil_ratio(t - half, self.delta).max(1.0);
        let hi = floor_ratio(t + half, self.delta).min(self.grid_len() as f64);
        (lo <= hi).then_some((lo as usize, hi as usize))
    }

    /// Value at `t` and whether the window held at least one grid point.
    pub fn eval_flagged(&self, t: f64) -> (f64, bool) {
        if !(0.0..=self.support).contains(&t) {
            return (0.0, true);
        }
        match self.window_range(t) {
            Some((lo, hi)) => {
                let sum: f64 = self.values[lo - 1..hi].iter().sum();
                (sum / (hi - lo + 1) as f64, true)
            }
            None => (0.0, false),
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

impl Kernel for BoxCurve {
    fn eval(&self, t: f64) -> f64 {
        self.eval_flagged(t).0
    }

    fn support(&self) -> Option<f64> {
        Some(self.support)
    }

    fn primitive(&self, _x: f64) -> Option<f64> {
        None
    }

    fn breakpoints(&self) -> Vec<f64> {
        let half = self.tau / 2.0;
        let mut pts: Vec<f64> = (1..=self.grid_len())
            .flat_map(|k| {
                let c = k as f64 * self.delta;
                [c - half, c + half]
            })
            .filter(|&x| x > 0.0 && x < self.support)
            .collect();
        pts.push(self.support);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    fn is_piecewise_constant(&self) -> bool {
        true
    }

    fn is_nonnegative(&self) -> bool {
        self.nonnegative
    }
}

/// Smoothed excitation matrix `ĥ_{ij}` on `[0, s]`.
#[derive(Clone)]
pub struct SmoothedExcitement {
    method: String,
    window: Option<f64>,
    support: f64,
    curves: Vec<Vec<Arc<dyn Kernel>>>,
}

impl fmt::Debug for SmoothedExcitement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothedExcitement")
            .field("method", &self.method)
            .field("window", &self.window)
            .field("support", &self.support)
            .field("dim", &self.dim())
            .finish_non_exhaustive()
    }
}

impl SmoothedExcitement {
    pub fn dim(&self) -> usize {
        self.curves.len()
    }

    pub fn method(&self) -> &str {
        &self.method
    }

    pub fn window(&self) -> Option<f64> {
        self.window
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    /// Curve for 1-based `(i, j)`.
    pub fn curve(&self, i: usize, j: usize) -> &Arc<dyn Kernel> {
        &self.curves[i - 1][j - 1]
    }

    /// `ĥ_{ij}(t)` for 1-based `(i, j)`; zero outside `[0, s]`.
    pub fn eval(&self, i: usize, j: usize, t: f64) -> f64 {
        if !(0.0..=self.support).contains(&t) {
            return 0.0;
        }
        self.curve(i, j).eval(t)
    }
}

/// Applies any smoother to every entry of a fit.
pub fn smooth_with(fit: &HawkesFit, smoother: &dyn Smoother) -> Result<SmoothedExcitement> {
    let d = fit.dim();
    let support = fit.support();
    let mut curves = Vec::with_capacity(d);
    for i in 1..=d {
        let mut row = Vec::with_capacity(d);
        for j in 1..=d {
            row.push(smoother.smooth(&fit.excitation_values(i, j), fit.delta(), support)?);
        }
        curves.push(row);
    }
    Ok(SmoothedExcitement {
        method: smoother.name().to_string(),
        window: smoother.window(),
        support,
        curves,
    })
}

/// Box moving average of every entry with window `tau`.
pub fn box_smooth(fit: &HawkesFit, tau: f64) -> Result<SmoothedExcitement> {
    smooth_with(fit, &BoxSmoother::new(tau)?)
}

/// `Σ_k Δ (Ĥ_k)_{ij}` for 1-based `(i, j)`.
pub fn integrate_pointwise(fit: &HawkesFit, i: usize, j: usize) -> Result<f64> {
    let d = fit.dim();
    if !(1..=d).contains(&i) || !(1..=d).contains(&j) {
        return Err(HawkesError::InvalidParameter(format!(
            "entry ({i}, {j}) out of range for d = {d}"
        )));
    }
    let delta = fit.delta();
    Ok(fit
        .excitation_blocks()
        .iter()
        .map(|h| delta * h[(i - 1, j - 1)])
        .sum())
}
