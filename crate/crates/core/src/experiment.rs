//! Monte-Carlo replication: simulate, bin, fit and summarise selected targets.
//!
//! Replication `r` draws from `RandomSource::new(seed).fork(r)`, so results
//! do not depend on thread count or scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cls::{confidence_interval, hawkes_estimator, Target};
use crate::error::{HawkesError, Result};
use crate::events::bin_counts;
use crate::hawkes_model::HawkesSpec;
use crate::kernel::Kernel;
use crate::rng::RandomSource;
use crate::simulate::{simulate_hawkes, HawkesSimOptions};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicationConfig {
    pub spec: HawkesSpec,
    pub horizon: f64,
    pub delta: f64,
    pub support: f64,
    pub replications: usize,
    pub seed: u64,
    pub targets: Vec<Target>,
    pub level: f64,
    #[serde(default)]
    pub burn_in: Option<f64>,
}

/// Per-replication point estimates and estimated variances, one entry per target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSample {
    pub replication: usize,
    pub events: Vec<usize>,
    pub estimates: Vec<f64>,
    pub variances: Vec<f64>,
    pub covered: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub target: Target,
    pub truth: f64,
    pub mean_estimate: f64,
    /// Sample variance of the point estimates across replications.
    pub empirical_variance: f64,
    pub mean_estimated_variance: f64,
    pub coverage: f64,
}

impl TargetSummary {
    /// Standard error of `mean_estimate`.
    pub fn standard_error(&self, replications: usize) -> f64 {
        (self.empirical_variance / replications as f64).sqrt()
    }

    pub fn bias(&self) -> f64 {
        self.mean_estimate - self.truth
    }

    /// Mean estimated variance over empirical variance.
    pub fn variance_ratio(&self) -> f64 {
        self.mean_estimated_variance / self.empirical_variance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub replications: usize,
    pub summaries: Vec<TargetSummary>,
    pub samples: Vec<ReplicationSample>,
}

/// True value of a target under `spec` on the grid `kΔ`.
pub fn target_truth(spec: &HawkesSpec, target: Target, delta: f64) -> Result<f64> {
    let d = spec.dim();
    match target {
        Target::Excitation { k, i, j }
            if k >= 1 && (1..=d).contains(&i) && (1..=d).contains(&j) =>
        {
            Ok(spec.kernel(i - 1, j - 1).eval(k as f64 * delta))
        }
        Target::Baseline { i } if (1..=d).contains(&i) => Ok(spec.eta[i - 1]),
        _ => Err(HawkesError::InvalidParameter(format!(
            "target {target:?} out of range for d = {d}"
        ))),
    }
}

fn run_one(config: &ReplicationConfig, truths: &[f64], r: usize) -> Result<ReplicationSample> {
    let rng = RandomSource::new(config.seed).fork(r as u64);
    let options = HawkesSimOptions {
        burn_in: config.burn_in,
    };
    let stream = simulate_hawkes(&config.spec, config.horizon, options, &rng)?;
    let bc = bin_counts(&stream, config.delta)?;
    let fit = hawkes_estimator(&bc, config.support)?;
    let s2 = fit.covariance().expect("estimator computes the covariance");
    let mut estimates = Vec::with_capacity(config.targets.len());
    let mut variances = Vec::with_capacity(config.targets.len());
    let mut covered = Vec::with_capacity(config.targets.len());
    for (&target, &truth) in config.targets.iter().zip(truths) {
        let ci = confidence_interval(&fit, target, config.level)?;
        let idx = target.vec_index(fit.dim(), fit.p()) - 1;
        estimates.push(ci.point);
        variances.push(s2[(idx, idx)]);
        covered.push(ci.contains(truth));
    }
    Ok(ReplicationSample {
        replication: r,
        events: stream.components().iter().map(Vec::len).collect(),
        estimates,
        variances,
        covered,
    })
}

/// Runs all replications, in parallel, and summarises every target.
pub fn replicate(config: &ReplicationConfig) -> Result<ReplicationReport> {
    if config.replications < 2 {
        return Err(HawkesError::InvalidParameter(
            "at least two replications are needed".into(),
        ));
    }
    if config.targets.is_empty() {
        return Err(HawkesError::InvalidParameter("no targets given".into()));
    }
    let truths = config
        .targets
        .iter()
        .map(|&t| target_truth(&config.spec, t, config.delta))
        .collect::<Result<Vec<_>>>()?;
    let samples = (0..config.replications)
        .into_par_iter()
        .map(|r| run_one(config, &truths, r))
        .collect::<Result<Vec<_>>>()?;
    let n = samples.len() as f64;
    let summaries = config
        .targets
        .iter()
        .enumerate()
        .map(|(t, &target)| {
            let est: Vec<f64> = samples.iter().map(|s| s.estimates[t]).collect();
            let mean = est.iter().sum::<f64>() / n;
            let empirical_variance =
                est.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let mean_estimated_variance = samples.iter().map(|s| s.variances[t]).sum::<f64>() / n;
            let coverage = samples.iter().filter(|s| s.covered[t]).count() as f64 / n;
            TargetSummary {
                target,
                truth: truths[t],
                mean_estimate: mean,
                empirical_variance,
                mean_estimated_variance,
                coverage,
            }
        })
        .collect();
    Ok(ReplicationReport {
        replications: config.replications,
        summaries,
        samples,
    })
}
