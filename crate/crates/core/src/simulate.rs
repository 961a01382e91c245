//! Seeded generators for INAR(p) count sequences and multivariate Hawkes processes.
//!
//! Hawkes paths come from the cluster representation: immigrants arrive as
//! homogeneous Poisson streams, and every event in component `j` spawns an
//! inhomogeneous Poisson process with intensity `h_{i,j}(· - t)` in each
//! component `i`. Offspring are drawn by thinning against a piecewise-constant
//! envelope of `h_{i,j}`.

use nalgebra::DMatrix;

use crate::error::{HawkesError, Result};
use crate::events::{BinCountSequence, EventStream, Window};
use crate::hawkes_model::{branching_matrix, stability_check, HawkesSpec, STABILITY_TOL};
use crate::kernel::{Excitation, Kernel};
use crate::linalg::spectral_radius;
use crate::rng::RandomSource;

/// Draw of the thinning `α∘Y`: a sum of `y` independent Poisson(α) variables.
pub fn thin(alpha: f64, y: u64, rng: &mut RandomSource) -> u64 {
    assert!(alpha >= 0.0, "thinning coefficient must be non-negative");
    if y == 0 || alpha == 0.0 {
        return 0;
    }
    // Σ_{k=1}^{y} Pois(α) is Pois(α y)
    rng.poisson(alpha * y as f64)
}

/// Multivariate INAR(p) parameters: `X_n = Σ_k A_k ⊛ X_{n-k} + ε_n`, `ε_{n,i} ~ Pois(a0_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InarSpec {
    pub a0: Vec<f64>,
    pub coefficients: Vec<DMatrix<f64>>,
}

impl InarSpec {
    pub fn new(a0: Vec<f64>, coefficients: Vec<DMatrix<f64>>) -> Result<Self> {
        let d = a0.len();
        if d == 0 || coefficients.is_empty() {
            return Err(HawkesError::InvalidParameter(
                "INAR spec needs d >= 1 and p >= 1".into(),
            ));
        }
        if a0.iter().any(|&a| !(a.is_finite() && a >= 0.0)) || a0.iter().all(|&a| a == 0.0) {
            return Err(HawkesError::InvalidParameter(
                "innovation parameters must be non-negative and not all zero".into(),
            ));
        }
        for a in &coefficients {
            if a.nrows() != d || a.ncols() != d {
                return Err(HawkesError::InvalidParameter(format!(
                    "thinning matrices must be {d}x{d}"
                )));
            }
            if a.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
                return Err(HawkesError::InvalidParameter(
                    "thinning coefficients must be non-negative".into(),
                ));
            }
        }
        Ok(InarSpec { a0, coefficients })
    }

    pub fn dim(&self) -> usize {
        self.a0.len()
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// `Σ_k A_k`.
    pub fn coefficient_sum(&self) -> DMatrix<f64> {
        let d = self.dim();
        self.coefficients
            .iter()
            .fold(DMatrix::zeros(d, d), |acc, a| acc + a)
    }

    /// Stationarity check `spr(Σ A_k) < 1` (valid for non-negative matrices).
    pub fn is_stable(&self) -> bool {
        spectral_radius(&self.coefficient_sum()) < 1.0 - STABILITY_TOL
    }

    /// Default burn-in: `10 p` steps.
    pub fn default_burn_in(&self) -> usize {
        10 * self.order()
    }
}

/// Simulates `n` INAR(p) vectors after discarding `burn_in` steps.
///
/// The `p` presample values start at zero; burn-in removes the resulting
/// transient. The result is a unit-width bin-count sequence.
pub fn simulate_inar(
    spec: &InarSpec,
    n: usize,
    burn_in: usize,
    rng: &mut RandomSource,
) -> Result<BinCountSequence> {
    if n == 0 {
        return Err(HawkesError::InvalidParameter("n must be at least 1".into()));
    }
    if !spec.is_stable() {
        return Err(HawkesError::RejectedSpec(
            "INAR spec violates spr(Σ A_k) < 1".into(),
        ));
    }
    let d = spec.dim();
    let p = spec.order();
    let total = p + burn_in + n;
    let mut x: Vec<Vec<u32>> = vec![vec![0; d]; total];
    for t in p..total {
        for i in 0..d {
            // Independent thinnings and the innovation are Poisson, so their sum
            // is one Poisson draw with the summed mean.
            let mut mean = spec.a0[i];
            for (k, a) in spec.coefficients.iter().enumerate() {
                let past = &x[t - k - 1];
                for j in 0..d {
                    mean += a[(i, j)] * past[j] as f64;
                }
            }
            x[t][i] = rng.poisson(mean) as u32;
        }
    }
    BinCountSequence::from_counts(1.0, &x[p + burn_in..])
}

/// Options for [`simulate_hawkes`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HawkesSimOptions {
    /// Simulated prefix discarded before time 0. Defaults to 10x the largest support.
    pub burn_in: Option<f64>,
}

const ENVELOPE_CELLS: usize = 10_000;
const ENVELOPE_INFLATION: f64 = 1.0 + 1e-3;

/// Piecewise-constant majorant of one kernel used to draw offspring lags.
#[derive(Debug, Clone)]
pub(crate) struct OffspringSampler {
    kernel: Excitation,
    width: f64,
    envelope: Vec<f64>,
    cumulative: Vec<f64>,
    total: f64,
}

impl OffspringSampler {
    pub(crate) fn new(kernel: &Excitation) -> Result<Self> {
        let support = kernel.support().ok_or_else(|| {
            HawkesError::RejectedSpec("unbounded support; truncate the kernel first".into())
        })?;
        if support == 0.0 || kernel.is_zero() {
            return Ok(OffspringSampler {
                kernel: kernel.clone(),
                width: 0.0,
                envelope: vec![],
                cumulative: vec![],
                total: 0.0,
            });
        }
        let width = support / ENVELOPE_CELLS as f64;
        let mut envelope = vec![0.0f64; ENVELOPE_CELLS];
        for (c, env) in envelope.iter_mut().enumerate() {
            let a = c as f64 * width;
            for frac in [1e-9, 0.25, 0.5, 0.75, 1.0] {
                *env = env.max(kernel.try_eval(a + frac * width)?);
            }
        }
        for bp in kernel.breakpoints() {
            let c = ((bp / width) as usize).min(ENVELOPE_CELLS - 1);
            let right = kernel.try_eval(bp * (1.0 + 1e-12) + 1e-300)?;
            let at = kernel.try_eval(bp)?;
            envelope[c] = envelope[c].max(right).max(at);
            if c + 1 < ENVELOPE_CELLS {
                envelope[c + 1] = envelope[c + 1].max(right);
            }
        }
        let mut cumulative = Vec::with_capacity(ENVELOPE_CELLS);
        let mut total = 0.0;
        for env in &mut envelope {
            if *env < 0.0 {
                return Err(HawkesError::RejectedSpec(
                    "excitation is negative on its support".into(),
                ));
            }
            *env *= ENVELOPE_INFLATION;
            total += *env * width;
            cumulative.push(total);
        }
        Ok(OffspringSampler {
            kernel: kernel.clone(),
            width,
            envelope,
            cumulative,
            total,
        })
    }

    /// Lags of the direct offspring of one event.
    pub(crate) fn sample_lags(&self, rng: &mut RandomSource, out: &mut Vec<f64>) {
        if self.total == 0.0 {
            return;
        }
        let candidates = rng.poisson(self.total);
        for _ in 0..candidates {
            let u = rng.uniform() * self.total;
            let c = self
                .cumulative
                .partition_point(|&m| m <= u)
                .min(self.envelope.len() - 1);
            let lag = (c as f64 + rng.uniform()) * self.width;
            let accept = rng.uniform() * self.envelope[c];
            if lag > 0.0 && accept < self.kernel.eval(lag) {
                out.push(lag);
            }
        }
    }
}

/// Simulates a multivariate Hawkes process on `(0, horizon]`.
pub fn simulate_hawkes(
    spec: &HawkesSpec,
    horizon: f64,
    options: HawkesSimOptions,
    rng: &RandomSource,
) -> Result<EventStream> {
    spec.validate()?;
    let window = Window::new(0.0, horizon)?;
    let max_support = spec.max_support().ok_or_else(|| {
        HawkesError::RejectedSpec("unbounded excitation support; truncate first".into())
    })?;
    let k = branching_matrix(spec, None)?;
    if !stability_check(&k) {
        return Err(HawkesError::RejectedSpec(format!(
            "unstable model: spectral radius {:.6} >= 1",
            k.spectral_radius
        )));
    }
    let burn_in = options.burn_in.unwrap_or(10.0 * max_support);
    if !(burn_in >= 0.0 && burn_in.is_finite()) {
        return Err(HawkesError::InvalidParameter(format!(
            "burn-in must be non-negative, got {burn_in}"
        )));
    }
    let d = spec.dim();
    // samplers[i][j] draws lags of component-i children of a component-j parent
    let samplers: Vec<Vec<OffspringSampler>> = spec
        .excitation
        .iter()
        .map(|row| row.iter().map(OffspringSampler::new).collect())
        .collect::<Result<_>>()?;

    let span = horizon + burn_in;
    let mut times: Vec<Vec<f64>> = vec![Vec::new(); d];
    let mut stack: Vec<(f64, usize)> = Vec::new();
    let mut lags: Vec<f64> = Vec::new();
    for (j, &eta) in spec.eta.iter().enumerate() {
        let mut immigrants = rng.fork(j as u64);
        let count = immigrants.poisson(eta * span);
        for idx in 0..count {
            let t0 = -burn_in + span * (1.0 - immigrants.uniform());
            let mut cluster_rng = immigrants.fork(idx);
            stack.push((t0, j));
            while let Some((t, parent)) = stack.pop() {
                if t > 0.0 {
                    times[parent].push(t);
                }
                for (i, row) in samplers.iter().enumerate() {
                    lags.clear();
                    row[parent].sample_lags(&mut cluster_rng, &mut lags);
                    for &lag in &lags {
                        let child = t + lag;
                        if child <= horizon {
                            stack.push((child, i));
                        }
                    }
                }
            }
        }
    }
    EventStream::from_unsorted(times, window)
}
