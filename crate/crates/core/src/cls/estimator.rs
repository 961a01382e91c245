//! The Hawkes estimator `Ĥ = B̂ / Δ` and confidence intervals for its entries.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::covariance::{covariance_estimate, covariance_estimate_sparse};
use super::design::{build_design, SparseDesign};
use super::{cls_fit, cls_fit_sparse, ClsFit};
use crate::error::{HawkesError, Result};
use crate::events::BinCountSequence;
use crate::grid::lag_count;

/// Below this fraction of non-zero counts `Auto` switches to the sparse path.
const SPARSE_DENSITY: f64 = 0.25;
/// Dense `Z` above this many entries is never materialised by `Auto`.
const MAX_DENSE_ENTRIES: usize = 40_000_000;

/// Storage used for the design matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignStorage {
    Dense,
    Sparse,
    #[default]
    Auto,
}

impl DesignStorage {
    pub(crate) fn resolve(self, bc: &BinCountSequence, p: usize) -> DesignStorage {
        match self {
            DesignStorage::Auto => {
                let d = bc.dim();
                let cells = (bc.len() * d).max(1);
                let nonzero = bc.iter().flatten().filter(|&&c| c > 0).count();
                let density = nonzero as f64 / cells as f64;
                let dense_entries = (d * p + 1) * bc.len().saturating_sub(p);
                if density < SPARSE_DENSITY || dense_entries > MAX_DENSE_ENTRIES {
                    DesignStorage::Sparse
                } else {
                    DesignStorage::Dense
                }
            }
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub storage: DesignStorage,
    /// Compute the sandwich covariance.
    pub covariance: bool,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            storage: DesignStorage::Auto,
            covariance: true,
        }
    }
}

/// Fitted Hawkes estimator on a `Δ`-grid with support `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "FitRecord", try_from = "FitRecord")]
pub struct HawkesFit {
    delta: f64,
    support: f64,
    p: usize,
    n: usize,
    d: usize,
    excitation: Vec<DMatrix<f64>>,
    baseline: Vec<f64>,
    covariance: Option<DMatrix<f64>>,
    condition: f64,
    dropped_tail: Vec<usize>,
}

impl HawkesFit {
    /// Assembles a fit from its parts, checking dimensions.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        delta: f64,
        support: f64,
        n: usize,
        excitation: Vec<DMatrix<f64>>,
        baseline: Vec<f64>,
        covariance: Option<DMatrix<f64>>,
        condition: f64,
        dropped_tail: Vec<usize>,
    ) -> Result<Self> {
        let d = baseline.len();
        let p = excitation.len();
        if d == 0 || p == 0 {
            return Err(HawkesError::InvalidParameter(
                "a fit needs at least one component and one lag".into(),
            ));
        }
        if !(delta.is_finite() && delta > 0.0 && support.is_finite() && support > 0.0) {
            return Err(HawkesError::InvalidParameter(format!(
                "invalid bin size {delta} or support {support}"
            )));
        }
        if excitation.iter().any(|h| h.nrows() != d || h.ncols() != d) {
            return Err(HawkesError::InvalidParameter(
                "excitation blocks must be d×d".into(),
            ));
        }
        let dim = d * d * p + d;
        if let Some(s2) = &covariance {
            if s2.nrows() != dim || s2.ncols() != dim {
                return Err(HawkesError::InvalidParameter(format!(
                    "covariance must be {dim}×{dim}"
                )));
            }
        }
        Ok(HawkesFit {
            delta,
            support,
            p,
            n,
            d,
            excitation,
            baseline,
            covariance,
            condition,
            dropped_tail,
        })
    }

    fn from_cls(
        bc: &BinCountSequence,
        support: f64,
        p: usize,
        cls: &ClsFit,
        covariance: Option<DMatrix<f64>>,
    ) -> Self {
        let d = bc.dim();
        let delta = bc.delta();
        let b = &cls.coefficients;
        let excitation = (0..p)
            .map(|k| b.columns(k * d, d).into_owned() / delta)
            .collect();
        let baseline = (0..d).map(|i| b[(i, d * p)] / delta).collect();
        HawkesFit {
            delta,
            support,
            p,
            n: bc.len(),
            d,
            excitation,
            baseline,
            covariance,
            condition: cls.condition,
            dropped_tail: bc.dropped_tail().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    /// Number of bins the fit was computed from.
    pub fn n(&self) -> usize {
        self.n
    }

    /// `Ĥ_k` for `k = 1..=p`.
    pub fn excitation(&self, k: usize) -> &DMatrix<f64> {
        &self.excitation[k - 1]
    }

    pub fn excitation_blocks(&self) -> &[DMatrix<f64>] {
        &self.excitation
    }

    /// Grid values `(Ĥ_1)_{ij}, ..., (Ĥ_p)_{ij}` for 1-based `i, j`.
    pub fn excitation_values(&self, i: usize, j: usize) -> Vec<f64> {
        self.excitation.iter().map(|h| h[(i - 1, j - 1)]).collect()
    }

    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    pub fn covariance(&self) -> Option<&DMatrix<f64>> {
        self.covariance.as_ref()
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn dropped_tail(&self) -> &[usize] {
        &self.dropped_tail
    }

    /// Checks that a target addresses an existing entry.
    pub fn check_target(&self, target: Target) -> Result<()> {
        let ok = match target {
            Target::Excitation { k, i, j } => {
                (1..=self.p).contains(&k) && (1..=self.d).contains(&i) && (1..=self.d).contains(&j)
            }
            Target::Baseline { i } => (1..=self.d).contains(&i),
        };
        if ok {
            Ok(())
        } else {
            Err(HawkesError::InvalidParameter(format!(
                "target {target:?} out of range for d = {}, p = {}",
                self.d, self.p
            )))
        }
    }

    /// Point estimate of a target.
    pub fn value(&self, target: Target) -> Result<f64> {
        self.check_target(target)?;
        Ok(match target {
            Target::Excitation { k, i, j } => self.excitation[k - 1][(i - 1, j - 1)],
            Target::Baseline { i } => self.baseline[i - 1],
        })
    }

    /// Entry-wise sum of two fits on the same grid; the covariance is dropped.
    pub fn sum(&self, other: &HawkesFit) -> Result<HawkesFit> {
        if self.d != other.d || self.p != other.p || self.delta != other.delta {
            return Err(HawkesError::InvalidParameter(
                "fits must share dimension, order and bin size".into(),
            ));
        }
        let excitation = self
            .excitation
            .iter()
            .zip(&other.excitation)
            .map(|(a, b)| a + b)
            .collect();
        let baseline = self
            .baseline
            .iter()
            .zip(&other.baseline)
            .map(|(a, b)| a + b)
            .collect();
        Ok(HawkesFit {
            excitation,
            baseline,
            covariance: None,
            ..self.clone()
        })
    }
}

/// Serialized form of a [`HawkesFit`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct FitRecord {
    delta: f64,
    support: f64,
    p: usize,
    n: usize,
    d: usize,
    eta_hat: Vec<f64>,
    /// `p` blocks, each a list of `d` rows.
    h_hat: Vec<Vec<Vec<f64>>>,
    /// Row-major flattening of the covariance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s2: Option<Vec<f64>>,
    condition_estimate: f64,
    #[serde(default)]
    dropped_tail: Vec<usize>,
}

impl From<HawkesFit> for FitRecord {
    fn from(fit: HawkesFit) -> Self {
        let h_hat = fit
            .excitation
            .iter()
            .map(|h| {
                (0..fit.d)
                    .map(|i| h.row(i).iter().copied().collect())
                    .collect()
            })
            .collect();
        let s2 = fit
            .covariance
            .as_ref()
            .map(|s| s.transpose().as_slice().to_vec());
        FitRecord {
            delta: fit.delta,
            support: fit.support,
            p: fit.p,
            n: fit.n,
            d: fit.d,
            eta_hat: fit.baseline,
            h_hat,
            s2,
            condition_estimate: fit.condition,
            dropped_tail: fit.dropped_tail,
        }
    }
}

impl TryFrom<FitRecord> for HawkesFit {
    type Error = HawkesError;

    fn try_from(r: FitRecord) -> Result<Self> {
        let d = r.d;
        let mut excitation = Vec::with_capacity(r.h_hat.len());
        for block in &r.h_hat {
            if block.len() != d || block.iter().any(|row| row.len() != d) {
                return Err(HawkesError::Parse("excitation block is not d×d".into()));
            }
            excitation.push(DMatrix::from_fn(d, d, |i, j| block[i][j]));
        }
        if excitation.len() != r.p || r.eta_hat.len() != d {
            return Err(HawkesError::Parse(
                "fit record dimensions disagree with d and p".into(),
            ));
        }
        let dim = d * d * r.p + d;
        let covariance = match r.s2 {
            Some(v) if v.len() == dim * dim => Some(DMatrix::from_row_slice(dim, dim, &v)),
            Some(_) => return Err(HawkesError::Parse("covariance has wrong length".into())),
            None => None,
        };
        HawkesFit::from_parts(
            r.delta,
            r.support,
            r.n,
            excitation,
            r.eta_hat,
            covariance,
            r.condition_estimate,
            r.dropped_tail,
        )
    }
}

/// An estimated quantity, with 1-based indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Target {
    /// `(Ĥ_k)_{ij}`, estimating `h_{ij}(kΔ)`.
    Excitation { k: usize, i: usize, j: usize },
    /// `η̂_i`.
    Baseline { i: usize },
}

impl Target {
    /// 1-based position in `vec(Ĥ_1, ..., Ĥ_p, η̂)`.
    pub fn vec_index(&self, d: usize, p: usize) -> usize {
        match *self {
            Target::Excitation { k, i, j } => (k - 1) * d * d + (j - 1) * d + i,
            Target::Baseline { i } => p * d * d + i,
        }
    }
}

/// Point estimate with a symmetric confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub point: f64,
    pub half_width: f64,
}

impl Interval {
    pub fn low(&self) -> f64 {
        self.point - self.half_width
    }

    pub fn high(&self) -> f64 {
        self.point + self.half_width
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.point).abs() <= self.half_width
    }
}

/// Two-sided standard normal quantile `z_{(1+level)/2}`.
pub(crate) fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(HawkesError::InvalidParameter(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf((1.0 + level) / 2.0))
}

/// Confidence interval for one entry of the fit from the diagonal of `Ŝ²`.
pub fn confidence_interval(fit: &HawkesFit, target: Target, level: f64) -> Result<Interval> {
    let point = fit.value(target)?;
    let z = normal_quantile(level)?;
    let s2 = fit.covariance().ok_or_else(|| {
        HawkesError::InvalidParameter("fit carries no covariance estimate".into())
    })?;
    let idx = target.vec_index(fit.dim(), fit.p()) - 1;
    let var = s2[(idx, idx)].max(0.0);
    Ok(Interval {
        point,
        half_width: z * var.sqrt(),
    })
}

/// Fits `Ĥ` with `p = ceil(support / Δ)` using default options.
pub fn hawkes_estimator(bc: &BinCountSequence, support: f64) -> Result<HawkesFit> {
    hawkes_estimator_with(bc, support, &EstimatorOptions::default())
}

pub fn hawkes_estimator_with(
    bc: &BinCountSequence,
    support: f64,
    options: &EstimatorOptions,
) -> Result<HawkesFit> {
    if !(support.is_finite() && support > 0.0) {
        return Err(HawkesError::InvalidParameter(format!(
            "support must be positive, got {support}"
        )));
    }
    let delta = bc.delta();
    let p = lag_count(support, delta).max(1);
    match options.storage.resolve(bc, p) {
        DesignStorage::Sparse => {
            let design = SparseDesign::new(bc, p)?;
            let cls = cls_fit_sparse(&design)?;
            let cov = if options.covariance {
                Some(covariance_estimate_sparse(&design, &cls, delta)?)
            } else {
                None
            };
            Ok(HawkesFit::from_cls(bc, support, p, &cls, cov))
        }
        _ => {
            let dm = build_design(bc, p)?;
            let cls = cls_fit(&dm)?;
            let cov = if options.covariance {
                Some(covariance_estimate(&dm, &cls, delta)?)
            } else {
                None
            };
            Ok(HawkesFit::from_cls(bc, support, p, &cls, cov))
        }
    }
}
