//! Goodness of fit through the random time change.
//!
//! Under the correct model the integrated intensity between consecutive
//! events of a component is standard exponential. Residuals are tested
//! against Exp(1) with a Kolmogorov-Smirnov test and for serial dependence
//! with a Ljung-Box portmanteau test.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::cls::HawkesFit;
use crate::error::{HawkesError, Result};
use crate::events::EventStream;
use crate::hawkes_model::HawkesSpec;
use crate::kernel::{Excitation, Kernel};
use crate::smoothing::SmoothedExcitement;

pub const DEFAULT_LAGS: usize = 20;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
const SIMPSON_MAX_DEPTH: u32 = 40;
const KOLMOGOROV_TERM_TOL: f64 = 1e-10;

/// How the integrated intensity is evaluated for one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegrationPath {
    /// Closed-form primitives of non-negative kernels.
    Analytic,
    /// Intensity constant between breakpoints; integrated exactly with the clamp.
    PiecewiseConstant,
    /// Adaptive Simpson between breakpoints.
    Adaptive,
}

/// Conditional intensity `max(η_i + Σ_j Σ_{T < t} h_ij(t - T), 0)`.
#[derive(Clone)]
pub struct IntensityModel {
    eta: Vec<f64>,
    kernels: Vec<Vec<Arc<dyn Kernel>>>,
    supports: Vec<Vec<f64>>,
    breakpoints: Vec<Vec<Vec<f64>>>,
    paths: Vec<IntegrationPath>,
}

impl std::fmt::Debug for IntensityModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IntensityModel")
            .field("eta", &self.eta)
            .field("supports", &self.supports)
            .field("paths", &self.paths)
            .finish_non_exhaustive()
    }
}

impl IntensityModel {
    pub fn new(eta: Vec<f64>, kernels: Vec<Vec<Arc<dyn Kernel>>>) -> Result<Self> {
        let d = eta.len();
        if d == 0 || kernels.len() != d || kernels.iter().any(|row| row.len() != d) {
            return Err(HawkesError::InvalidParameter(
                "baseline and excitation dimensions disagree".into(),
            ));
        }
        if eta.iter().any(|e| !e.is_finite()) {
            return Err(HawkesError::InvalidParameter(
                "baseline intensities must be finite".into(),
            ));
        }
        let mut supports = Vec::with_capacity(d);
        let mut breakpoints = Vec::with_capacity(d);
        let mut paths = Vec::with_capacity(d);
        for (i, row) in kernels.iter().enumerate() {
            let mut srow = Vec::with_capacity(d);
            let mut brow = Vec::with_capacity(d);
            for (j, h) in row.iter().enumerate() {
                let s = h.support().ok_or_else(|| {
                    HawkesError::RejectedSpec(format!(
                        "h_{{{},{}}} has unbounded support; truncate it first",
                        i + 1,
                        j + 1
                    ))
                })?;
                let mut bps = h.breakpoints();
                if s > 0.0 {
                    bps.push(s);
                }
                bps.retain(|&x| x > 0.0 && x <= s);
                bps.sort_by(f64::total_cmp);
                bps.dedup();
                srow.push(s);
                brow.push(bps);
            }
            let path = if eta[i] >= 0.0
                && row
                    .iter()
                    .all(|h| h.is_nonnegative() && h.primitive(1.0).is_some())
            {
                IntegrationPath::Analytic
            } else if row.iter().all(|h| h.is_piecewise_constant()) {
                IntegrationPath::PiecewiseConstant
            } else {
                IntegrationPath::Adaptive
            };
            supports.push(srow);
            breakpoints.push(brow);
            paths.push(path);
        }
        Ok(IntensityModel {
            eta,
            kernels,
            supports,
            breakpoints,
            paths,
        })
    }

    /// Ground-truth model.
    pub fn from_spec(spec: &HawkesSpec) -> Result<Self> {
        let kernels = spec
            .excitation
            .iter()
            .map(|row| {
                row.iter()
                    .map(|h| Arc::new(h.clone()) as Arc<dyn Kernel>)
                    .collect()
            })
            .collect();
        IntensityModel::new(spec.eta.clone(), kernels)
    }

    /// Fitted baseline with smoothed excitation curves.
    pub fn from_smoothed(eta: &[f64], smoothed: &SmoothedExcitement) -> Result<Self> {
        let d = smoothed.dim();
        let kernels = (1..=d)
            .map(|i| (1..=d).map(|j| smoothed.curve(i, j).clone()).collect())
            .collect();
        IntensityModel::new(eta.to_vec(), kernels)
    }

    /// Fitted baseline with the raw grid estimates as step functions:
    /// `ĥ_ij(t) = (Ĥ_k)_ij` on `((k-1)Δ, kΔ]`.
    pub fn from_fit_grid(fit: &HawkesFit) -> Result<Self> {
        let d = fit.dim();
        let kernels = (1..=d)
            .map(|i| {
                (1..=d)
                    .map(|j| {
                        Arc::new(Excitation::from_grid_values(
                            fit.delta(),
                            &fit.excitation_values(i, j),
                        )) as Arc<dyn Kernel>
                    })
                    .collect()
            })
            .collect();
        IntensityModel::new(fit.baseline().to_vec(), kernels)
    }

    /// Same excitation with the baseline multiplied by `c`.
    pub fn with_scaled_baseline(&self, c: f64) -> Result<Self> {
        IntensityModel::new(
            self.eta.iter().map(|e| e * c).collect(),
            self.kernels.clone(),
        )
    }

    pub fn dim(&self) -> usize {
        self.eta.len()
    }

    pub fn max_support(&self) -> f64 {
        self.supports.iter().flatten().fold(0.0, |a, &b| a.max(b))
    }

    pub fn path(&self, i: usize) -> IntegrationPath {
        self.paths[i]
    }

    /// Clamped intensity of 0-based component `i` at `t`, given the events of `stream`.
    pub fn intensity(&self, i: usize, t: f64, stream: &EventStream) -> f64 {
        let mut lambda = self.eta[i];
        for (j, events) in stream.components().iter().enumerate() {
            let s = self.supports[i][j];
            if s <= 0.0 {
                continue;
            }
            let lo = events.partition_point(|&x| x < t - s);
            let hi = events.partition_point(|&x| x < t);
            let h = &self.kernels[i][j];
            for &x in &events[lo..hi] {
                lambda += h.eval(t - x);
            }
        }
        lambda.max(0.0)
    }

    fn integral_analytic(&self, i: usize, a: f64, b: f64, stream: &EventStream) -> f64 {
        let mut acc = self.eta[i] * (b - a);
        for (j, events) in stream.components().iter().enumerate() {
            let s = self.supports[i][j];
            if s <= 0.0 {
                continue;
            }
            let lo = events.partition_point(|&x| x < a - s);
            let hi = events.partition_point(|&x| x < b);
            let h = &self.kernels[i][j];
            for &x in &events[lo..hi] {
                let upper = h.primitive(b - x).unwrap_or(0.0);
                let lower = h.primitive(a - x).unwrap_or(0.0);
                acc += upper - lower;
            }
        }
        acc
    }

    /// Points in `(a, b)` where the intensity of component `i` may jump.
    fn knots(&self, i: usize, a: f64, b: f64, stream: &EventStream) -> Vec<f64> {
        let mut knots = vec![a, b];
        for (j, events) in stream.components().iter().enumerate() {
            let s = self.supports[i][j];
            if s <= 0.0 {
                continue;
            }
            let lo = events.partition_point(|&x| x < a - s);
            let hi = events.partition_point(|&x| x < b);
            for &x in &events[lo..hi] {
                if x > a {
                    knots.push(x);
                }
                for &bp in &self.breakpoints[i][j] {
                    let y = x + bp;
                    if y > a && y < b {
                        knots.push(y);
                    }
                }
            }
        }
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        knots
    }

    /// `∫_a^b Λ_i(t) dt` for 0-based `i`.
    pub fn integrated_intensity(
        &self,
        i: usize,
        a: f64,
        b: f64,
        stream: &EventStream,
        tolerance: f64,
    ) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self.paths[i] {
            IntegrationPath::Analytic => self.integral_analytic(i, a, b, stream),
            IntegrationPath::PiecewiseConstant => self
                .knots(i, a, b, stream)
                .windows(2)
                .map(|w| (w[1] - w[0]) * self.intensity(i, 0.5 * (w[0] + w[1]), stream))
                .sum(),
            IntegrationPath::Adaptive => {
                self.knots(i, a, b, stream)
                    .windows(2)
                    .map(|w| {
                        let (l, r) = (w[0], w[1]);
                        // one-sided values at the jumps bounding the piece
                        let eps = 1e-12 * l.abs().max(r.abs()).max(1.0);
                        let (lo, hi) = (l + eps.min(0.25 * (r - l)), r - eps.min(0.25 * (r - l)));
                        let f = |t: f64| self.intensity(i, t.clamp(lo, hi), stream);
                        let share = tolerance * (r - l) / (b - a);
                        adaptive_simpson(&f, l, r, share)
                    })
                    .sum()
            }
        }
    }
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, SIMPSON_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsOptions {
    /// History length discarded before residuals are collected; defaults to the largest support.
    pub burn_in: Option<f64>,
    pub lags: usize,
    pub tolerance: f64,
    /// Also run the KS test on consecutive chunks of this many residuals.
    pub chunk: Option<usize>,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        DiagnosticsOptions {
            burn_in: None,
            lags: DEFAULT_LAGS,
            tolerance: DEFAULT_TOLERANCE,
            chunk: None,
        }
    }
}

fn resolve_burn_in(model: &IntensityModel, burn_in: Option<f64>) -> Result<f64> {
    let b = burn_in.unwrap_or_else(|| model.max_support());
    if !(b.is_finite() && b >= 0.0) {
        return Err(HawkesError::InvalidParameter(format!(
            "burn-in must be non-negative, got {b}"
        )));
    }
    Ok(b)
}

fn check_dims(stream: &EventStream, model: &IntensityModel) -> Result<()> {
    if stream.dim() != model.dim() {
        return Err(HawkesError::InvalidParameter(format!(
            "stream has {} components, model has {}",
            stream.dim(),
            model.dim()
        )));
    }
    Ok(())
}

/// Residuals of 0-based component `i` from events at or after `window.start + burn_in`.
pub fn component_residuals(
    stream: &EventStream,
    model: &IntensityModel,
    i: usize,
    burn_in: f64,
    tolerance: f64,
) -> Result<Vec<f64>> {
    let from = stream.window().start + burn_in;
    let events = stream.component(i);
    let first = events.partition_point(|&t| t < from);
    let kept = &events[first..];
    if kept.len() < 2 {
        return Err(HawkesError::InsufficientEvents(format!(
            "component {} has {} events after burn-in, need at least 2",
            i + 1,
            kept.len()
        )));
    }
    Ok(kept
        .windows(2)
        .map(|w| model.integrated_intensity(i, w[0], w[1], stream, tolerance))
        .collect())
}

/// Time-change residuals for every component.
pub fn time_change_residuals(
    stream: &EventStream,
    model: &IntensityModel,
    options: &DiagnosticsOptions,
) -> Result<Vec<Vec<f64>>> {
    check_dims(stream, model)?;
    let burn_in = resolve_burn_in(model, options.burn_in)?;
    (0..stream.dim())
        .into_par_iter()
        .map(|i| component_residuals(stream, model, i, burn_in, options.tolerance))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // P(K <= λ) = √(2π)/λ Σ exp(-(2k-1)² π² / (8λ²))
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1.. {
            let m = (2 * k - 1) as f64;
            let term = (-m * m * c).exp();
            sum += term;
            if term < KOLMOGOROV_TERM_TOL {
                break;
            }
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1.. {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < KOLMOGOROV_TERM_TOL {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// One-sample KS test against the Exp(1) distribution.
pub fn ks_exp1(residuals: &[f64]) -> Result<TestResult> {
    if residuals.is_empty() {
        return Err(HawkesError::InsufficientEvents(
            "KS test needs at least one residual".into(),
        ));
    }
    let mut x = residuals.to_vec();
    x.sort_by(f64::total_cmp);
    let m = x.len() as f64;
    let mut d = 0.0f64;
    for (k, &v) in x.iter().enumerate() {
        let f = -(-v.max(0.0)).exp_m1();
        d = d.max((k + 1) as f64 / m - f).max(f - k as f64 / m);
    }
    Ok(TestResult {
        statistic: d,
        p_value: kolmogorov_sf(m.sqrt() * d),
    })
}

/// Ljung-Box test over lags `1..=lags`, chi-square with `lags` degrees of freedom.
pub fn serial_independence(residuals: &[f64], lags: usize) -> Result<TestResult> {
    if lags == 0 {
        return Err(HawkesError::InvalidParameter(
            "Ljung-Box test needs at least one lag".into(),
        ));
    }
    let m = residuals.len();
    if m <= lags {
        return Err(HawkesError::InsufficientEvents(format!(
            "{m} residuals are too few for {lags} lags"
        )));
    }
    let mean = residuals.iter().sum::<f64>() / m as f64;
    let centered: Vec<f64> = residuals.iter().map(|x| x - mean).collect();
    let var: f64 = centered.iter().map(|x| x * x).sum();
    if var.is_nan() || var <= 0.0 {
        return Err(HawkesError::InsufficientEvents(
            "residuals have zero variance; autocorrelation undefined".into(),
        ));
    }
    let mut q = 0.0;
    for k in 1..=lags {
        let acf: f64 = centered[k..]
            .iter()
            .zip(&centered)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / var;
        q += acf * acf / (m - k) as f64;
    }
    q *= (m * (m + 2)) as f64;
    let chi = ChiSquared::new(lags as f64).expect("positive degrees of freedom");
    Ok(TestResult {
        statistic: q,
        p_value: chi.sf(q),
    })
}

/// Sorted residuals paired with Exp(1) quantiles at `(k - 0.5) / m`.
pub fn qq_pairs(residuals: &[f64]) -> Vec<(f64, f64)> {
    let mut x = residuals.to_vec();
    x.sort_by(f64::total_cmp);
    let m = x.len() as f64;
    x.into_iter()
        .enumerate()
        .map(|(k, v)| (v, -(-(k as f64 + 0.5) / m).ln_1p()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkSummary {
    pub chunk: usize,
    pub p_values: Vec<f64>,
    /// Share of chunks rejected at the 5% level.
    pub rejection_rate: f64,
    pub median_p_value: f64,
}

/// KS p-values over consecutive full chunks of `chunk` residuals.
pub fn chunked_ks(residuals: &[f64], chunk: usize) -> Result<ChunkSummary> {
    if chunk == 0 {
        return Err(HawkesError::InvalidParameter(
            "chunk size must be positive".into(),
        ));
    }
    let p_values = residuals
        .chunks_exact(chunk)
        .map(|c| ks_exp1(c).map(|r| r.p_value))
        .collect::<Result<Vec<_>>>()?;
    if p_values.is_empty() {
        return Err(HawkesError::InsufficientEvents(format!(
            "{} residuals do not fill one chunk of {chunk}",
            residuals.len()
        )));
    }
    let rejection_rate =
        p_values.iter().filter(|&&p| p < 0.05).count() as f64 / p_values.len() as f64;
    let mut sorted = p_values.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median_p_value = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    Ok(ChunkSummary {
        chunk,
        p_values,
        rejection_rate,
        median_p_value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDiagnostics {
    /// 1-based component index.
    pub component: usize,
    pub path: IntegrationPath,
    pub residuals: Vec<f64>,
    pub ks: TestResult,
    pub ljung_box: TestResult,
    pub qq: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunks: Option<ChunkSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub burn_in: f64,
    pub lags: usize,
    pub components: Vec<ComponentDiagnostics>,
}

/// Residuals, KS, Ljung-Box and QQ pairs for every component.
pub fn diagnose(
    stream: &EventStream,
    model: &IntensityModel,
    options: &DiagnosticsOptions,
) -> Result<DiagnosticsReport> {
    check_dims(stream, model)?;
    let burn_in = resolve_burn_in(model, options.burn_in)?;
    let components = (0..stream.dim())
        .into_par_iter()
        .map(|i| -> Result<ComponentDiagnostics> {
            let residuals = component_residuals(stream, model, i, burn_in, options.tolerance)?;
            let ks = ks_exp1(&residuals)?;
            let ljung_box = serial_independence(&residuals, options.lags)?;
            let chunks = options
                .chunk
                .map(|c| chunked_ks(&residuals, c))
                .transpose()?;
            Ok(ComponentDiagnostics {
                component: i + 1,
                path: model.path(i),
                qq: qq_pairs(&residuals),
                residuals,
                ks,
                ljung_box,
                chunks,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagnosticsReport {
        burn_in,
        lags: options.lags,
        components,
    })
}
