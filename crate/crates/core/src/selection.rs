//! Choice of the support `s` (AIC over the lag order) and of the bin size `Δ`
//! (stabilisation of the baseline estimates as `Δ` shrinks).

use nalgebra::{Cholesky, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cls::{
    cls_fit_counts, confidence_interval, hawkes_estimator_with, DesignStorage, EstimatorOptions,
    Target,
};
use crate::error::{HawkesError, Result};
use crate::events::{bin_counts, BinCountSequence, EventStream};
use crate::grid::lag_count;

/// `AIC(p) = log det Σ̂ + 2 p d² / (n0 - p)` for a given residual covariance.
pub fn aic_from_covariance(sigma: &DMatrix<f64>, p: usize, n0: usize) -> Result<f64> {
    let d = sigma.nrows();
    if p >= n0 {
        return Err(HawkesError::InvalidOrder { p, n: n0 });
    }
    let log_det = log_det_pd(sigma).ok_or(HawkesError::DegenerateResidualCovariance { p })?;
    Ok(log_det + 2.0 * (p * d * d) as f64 / (n0 - p) as f64)
}

/// Log-determinant of a symmetric positive definite matrix, `None` when
/// it is singular to working precision.
fn log_det_pd(sigma: &DMatrix<f64>) -> Option<f64> {
    let scale = sigma.diagonal().iter().fold(0.0f64, |a, &b| a.max(b));
    if !scale.is_finite() || scale <= 1e-24 {
        return None;
    }
    let chol = Cholesky::new(sigma.clone())?;
    let l = chol.l_dirty();
    let mut log_det = 0.0;
    for i in 0..sigma.nrows() {
        let li = l[(i, i)];
        let sii = sigma[(i, i)];
        if li.is_nan() || sii.is_nan() || li * li <= 1e-12 * sii || sii <= 1e-24 {
            return None;
        }
        log_det += 2.0 * li.ln();
    }
    Some(log_det)
}

/// AIC of the order-`p` CLS fit on the count scale.
pub fn aic_value(bc: &BinCountSequence, p: usize) -> Result<f64> {
    aic_value_with(bc, p, DesignStorage::Auto)
}

pub fn aic_value_with(bc: &BinCountSequence, p: usize, storage: DesignStorage) -> Result<f64> {
    let fit = cls_fit_counts(bc, p, storage)?;
    let n0 = bc.len();
    let u = &fit.residuals;
    let sigma = (u * u.transpose()) / (n0 - p) as f64;
    aic_from_covariance(&sigma, p, n0)
}

/// AIC curve over lag orders `1..=p_max` at preliminary bin size `Δ0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AicScan {
    pub delta0: f64,
    pub candidates: Vec<usize>,
    /// `+∞` marks candidates whose fit or residual covariance was degenerate.
    pub aic: Vec<f64>,
    pub p_hat: usize,
    pub s_hat: f64,
}

/// `Δ0` giving about one event per bin and component.
pub fn default_delta0(stream: &EventStream) -> Result<f64> {
    let total = stream.total_events();
    if total == 0 {
        return Err(HawkesError::InsufficientEvents(
            "cannot derive a bin size from an empty stream".into(),
        ));
    }
    Ok(stream.window().length() * stream.dim() as f64 / total as f64)
}

/// AIC values for `p = 1..=ceil(s_max / Δ0)` on counts binned at `Δ0 = bc.delta()`,
/// `+∞` where a fit is degenerate.
///
/// Every candidate is scored on the same observations, bins `p_max..n0`:
/// order `p` is fitted on the sequence with its first `p_max - p` bins
/// removed, so `n0 - p` in [`aic_value`] equals `n0 - p_max` for all `p`.
pub fn aic_curve(bc: &BinCountSequence, s_max: f64) -> Result<(Vec<usize>, Vec<f64>)> {
    let delta0 = bc.delta();
    if !(s_max.is_finite() && s_max > 0.0) {
        return Err(HawkesError::InvalidParameter(format!(
            "maximal support must be positive, got {s_max}"
        )));
    }
    if s_max >= bc.len() as f64 * delta0 {
        return Err(HawkesError::InvalidParameter(format!(
            "maximal support {s_max} must be shorter than the observed window {}",
            bc.len() as f64 * delta0
        )));
    }
    let p_max = lag_count(s_max, delta0).max(1);
    let candidates: Vec<usize> = (1..=p_max).collect();
    let aic = candidates
        .par_iter()
        .map(|&p| aic_value(&bc.skip_bins(p_max - p), p).unwrap_or(f64::INFINITY))
        .collect();
    Ok((candidates, aic))
}

/// Minimises [`aic_curve`]; ties go to the smaller order.
pub fn select_support(bc: &BinCountSequence, s_max: f64) -> Result<AicScan> {
    let delta0 = bc.delta();
    let (candidates, aic) = aic_curve(bc, s_max)?;
    let p_max = candidates.len();
    let mut best: Option<usize> = None;
    for (idx, &v) in aic.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| v < aic[b]) {
            best = Some(idx);
        }
    }
    let best = best.ok_or_else(|| {
        HawkesError::SelectionFailed(format!(
            "every lag order up to {p_max} gave a degenerate fit"
        ))
    })?;
    let p_hat = candidates[best];
    Ok(AicScan {
        delta0,
        candidates,
        aic,
        p_hat,
        s_hat: p_hat as f64 * delta0,
    })
}

/// Direction in which a baseline estimate moves as `Δ` shrinks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    Increasing,
    Decreasing,
    NonMonotone,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSizeEntry {
    pub delta: f64,
    pub p: usize,
    pub eta: Vec<f64>,
    pub half_width: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSizeScan {
    pub support: f64,
    pub level: f64,
    /// Ordered by strictly decreasing `Δ`.
    pub entries: Vec<BinSizeEntry>,
    /// For each successive pair, whether every baseline change is below both half-widths.
    pub stable_pairs: Vec<bool>,
    /// Index into `entries` of the recommended bin size.
    pub recommended: Option<usize>,
    pub trend: Vec<Trend>,
}

impl BinSizeScan {
    pub fn recommended_delta(&self) -> Option<f64> {
        self.recommended.map(|m| self.entries[m].delta)
    }
}

fn pair_is_stable(a: &BinSizeEntry, b: &BinSizeEntry) -> bool {
    a.eta
        .iter()
        .zip(&b.eta)
        .zip(a.half_width.iter().zip(&b.half_width))
        .all(|((x, y), (ha, hb))| (x - y).abs() < ha.min(*hb))
}

fn trend_of(values: &[f64]) -> Trend {
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    if diffs.iter().all(|&x| x == 0.0) {
        Trend::Constant
    } else if diffs.iter().all(|&x| x >= 0.0) {
        Trend::Increasing
    } else if diffs.iter().all(|&x| x <= 0.0) {
        Trend::Decreasing
    } else {
        Trend::NonMonotone
    }
}

/// Largest `Δ` from which on every later successive pair is stable.
fn recommend(stable_pairs: &[bool]) -> Option<usize> {
    let mut rec = None;
    for m in (0..stable_pairs.len()).rev() {
        if stable_pairs[m] {
            rec = Some(m);
        } else {
            break;
        }
    }
    rec
}

/// Rebins `stream` at every candidate `Δ` and records `η̂` with CI half-widths.
pub fn select_bin_size(
    stream: &EventStream,
    support: f64,
    deltas: &[f64],
    level: f64,
) -> Result<BinSizeScan> {
    if deltas.is_empty() {
        return Err(HawkesError::InvalidParameter(
            "no candidate bin sizes given".into(),
        ));
    }
    if deltas.iter().any(|&x| !(x.is_finite() && x > 0.0))
        || deltas.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(HawkesError::InvalidParameter(
            "candidate bin sizes must be positive and strictly decreasing".into(),
        ));
    }
    let options = EstimatorOptions::default();
    let entries = deltas
        .par_iter()
        .map(|&delta| -> Result<BinSizeEntry> {
            let bc = bin_counts(stream, delta)?;
            let fit = hawkes_estimator_with(&bc, support, &options)?;
            let d = fit.dim();
            let mut eta = Vec::with_capacity(d);
            let mut half_width = Vec::with_capacity(d);
            for i in 1..=d {
                let ci = confidence_interval(&fit, Target::Baseline { i }, level)?;
                eta.push(ci.point);
                half_width.push(ci.half_width);
            }
            Ok(BinSizeEntry {
                delta,
                p: fit.p(),
                eta,
                half_width,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let stable_pairs: Vec<bool> = entries
        .windows(2)
        .map(|w| pair_is_stable(&w[0], &w[1]))
        .collect();
    let recommended = recommend(&stable_pairs);
    let trend = (0..stream.dim())
        .map(|i| trend_of(&entries.iter().map(|e| e.eta[i]).collect::<Vec<_>>()))
        .collect();
    Ok(BinSizeScan {
        support,
        level,
        entries,
        stable_pairs,
        recommended,
        trend,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::Window;
    use crate::rng::RandomSource;

    #[test]
    fn formula_plug_ins() {
        let one = DMatrix::identity(1, 1);
        assert!((aic_from_covariance(&one, 2, 102).unwrap() - 0.04).abs() < 1e-15);
        let two = DMatrix::identity(2, 2);
        assert!((aic_from_covariance(&two, 3, 103).unwrap() - 0.24).abs() < 1e-15);
    }

    #[test]
    fn penalty_increases_with_order() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.3, 0.2, 0.2, 0.7]);
        let values: Vec<f64> = (1..40)
            .map(|p| aic_from_covariance(&sigma, p, 200).unwrap())
            .collect();
        assert!(values.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn exact_fit_is_degenerate() {
        let counts: Vec<Vec<u32>> = (0..40u32).map(|k| vec![k % 2 + 1]).collect();
        let bc = BinCountSequence::from_counts(1.0, &counts).unwrap();
        assert!(matches!(
            aic_value(&bc, 1),
            Err(HawkesError::DegenerateResidualCovariance { p: 1 })
        ));
        assert!(matches!(
            select_support(&bc, 3.0),
            Err(HawkesError::SelectionFailed(_))
        ));
    }

    fn poisson_counts(seed: u64, n: usize, mean: f64) -> BinCountSequence {
        let mut rng = RandomSource::new(seed);
        let counts: Vec<Vec<u32>> = (0..n).map(|_| vec![rng.poisson(mean) as u32]).collect();
        BinCountSequence::from_counts(1.0, &counts).unwrap()
    }

    #[test]
    fn null_model_prefers_small_order() {
        // Each surplus lag enters when a χ²_1 statistic exceeds 2 (probability
        // about 0.157), so with ten candidates AIC keeps p <= 2 in roughly
        // three quarters of null samples.
        let reps = 100;
        let mut small = 0;
        for seed in 0..reps {
            let scan = select_support(&poisson_counts(seed, 1000, 1.0), 10.0).unwrap();
            assert_eq!(scan.candidates.len(), 10);
            assert!(scan.p_hat <= 10);
            if scan.p_hat <= 2 {
                small += 1;
            }
        }
        assert!(small >= 65, "{small} of {reps}");
    }

    #[test]
    fn candidates_share_one_sample() {
        let bc = poisson_counts(4, 300, 2.0);
        let scan = select_support(&bc, 6.0).unwrap();
        assert_eq!(scan.candidates, (1..=6).collect::<Vec<_>>());
        for (&p, &a) in scan.candidates.iter().zip(&scan.aic) {
            assert_eq!(a, aic_value(&bc.skip_bins(6 - p), p).unwrap());
        }
        assert_eq!(scan.aic[5], aic_value(&bc, 6).unwrap());
    }

    #[test]
    fn scans_are_deterministic() {
        let bc = poisson_counts(9, 500, 2.0);
        assert_eq!(
            select_support(&bc, 8.0).unwrap(),
            select_support(&bc, 8.0).unwrap()
        );
    }

    #[test]
    fn support_beyond_window_rejected() {
        let bc = poisson_counts(1, 50, 1.0);
        assert!(matches!(
            select_support(&bc, 50.0),
            Err(HawkesError::InvalidParameter(_))
        ));
    }

    #[test]
    fn recommendation_rule() {
        assert_eq!(recommend(&[true, true, true]), Some(0));
        assert_eq!(recommend(&[false, true, true]), Some(1));
        assert_eq!(recommend(&[true, false, true]), Some(2));
        assert_eq!(recommend(&[true, true, false]), None);
        assert_eq!(recommend(&[]), None);
        assert_eq!(trend_of(&[1.0, 1.2, 1.3]), Trend::Increasing);
        assert_eq!(trend_of(&[1.0, 0.8, 0.8]), Trend::Decreasing);
        assert_eq!(trend_of(&[1.0, 1.2, 0.9]), Trend::NonMonotone);
    }

    #[test]
    fn homogeneous_poisson_flags_first_candidate() {
        let horizon = 20_000.0;
        let mut rng = RandomSource::new(5);
        let mut t = 0.0;
        let mut times = Vec::new();
        loop {
            t += rng.exp1();
            if t > horizon {
                break;
            }
            times.push(t);
        }
        let stream = EventStream::new(vec![times], Window::new(0.0, horizon).unwrap()).unwrap();
        let scan = select_bin_size(&stream, 2.0, &[1.0, 0.5, 0.25], 0.95).unwrap();
        assert_eq!(scan.recommended, Some(0));
        for e in &scan.entries {
            assert!((e.eta[0] - 1.0).abs() < 3.0 * e.half_width[0]);
        }
    }

    #[test]
    fn bin_size_candidates_validated() {
        let stream =
            EventStream::new(vec![vec![1.0, 2.0]], Window::new(0.0, 10.0).unwrap()).unwrap();
        assert!(select_bin_size(&stream, 1.0, &[], 0.95).is_err());
        assert!(select_bin_size(&stream, 1.0, &[0.5, 0.5], 0.95).is_err());
        assert!(select_bin_size(&stream, 1.0, &[0.1, 0.5], 0.95).is_err());
    }
}
