//! Excitation functions `h_{i,j}`.
//!
//! Every kernel is zero for `t <= 0` and beyond its declared support. Parametric
//! families carry closed-form primitives so compensators can be integrated
//! exactly; grid kernels are left-constant, the value at `t_k` holding on
//! `(t_{k-1}, t_k]`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};

/// Minimal interface the simulator and the diagnostics need from an excitation.
pub trait Kernel: Send + Sync {
    fn eval(&self, t: f64) -> f64;
    /// Upper end of the support, `None` when unbounded.
    fn support(&self) -> Option<f64>;
    /// `∫_0^x h(u) du` when a closed form exists.
    fn primitive(&self, x: f64) -> Option<f64>;
    /// Jump locations inside `(0, support]`.
    fn breakpoints(&self) -> Vec<f64>;
    fn is_piecewise_constant(&self) -> bool;
    fn is_nonnegative(&self) -> bool;
}

/// Caller-supplied excitation with a declared support bound.
#[derive(Clone)]
pub struct CustomExcitation {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    support: f64,
}

impl CustomExcitation {
    pub fn new(support: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        CustomExcitation {
            f: Arc::new(f),
            support,
        }
    }
}

impl fmt::Debug for CustomExcitation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomExcitation")
            .field("support", &self.support)
            .finish_non_exhaustive()
    }
}

/// One entry `h_{i,j}` of the excitation matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Excitation {
    Zero,
    /// `scale * exp(-rate * t)`, optionally truncated at `cutoff`.
    ExpDecay {
        scale: f64,
        rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<f64>,
    },
    /// `scale * (offset + t)^(-exponent)`, optionally truncated at `cutoff`.
    PowerLaw {
        scale: f64,
        offset: f64,
        exponent: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<f64>,
    },
    /// `value` on `(start, end]`.
    ConstantOnInterval {
        value: f64,
        start: f64,
        end: f64,
    },
    /// `amplitude * sin(t)` on `(start, end]`, with `end <= π`.
    SineOnInterval {
        amplitude: f64,
        start: f64,
        end: f64,
    },
    /// Left-constant interpolation of `(t, value)` pairs with ascending `t > 0`.
    Grid {
        points: Vec<(f64, f64)>,
    },
    #[serde(skip)]
    Custom(CustomExcitation),
}

impl Excitation {
    /// Grid kernel from equally spaced values at `step, 2*step, ...`.
    pub fn from_grid_values(step: f64, values: &[f64]) -> Excitation {
        Excitation::Grid {
            points: values
                .iter()
                .enumerate()
                .map(|(k, &v)| ((k + 1) as f64 * step, v))
                .collect(),
        }
    }

    pub fn custom(support: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Excitation {
        Excitation::Custom(CustomExcitation::new(support, f))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Excitation::Zero)
    }

    /// Checks parameter ranges; does not require non-negativity of grid values.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HawkesError::InvalidParameter(msg));
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            Excitation::Zero => Ok(()),
            Excitation::ExpDecay {
                scale,
                rate,
                cutoff,
            } => {
                if !finite(&[*scale, *rate]) || *scale < 0.0 {
                    return bad(format!("exp-decay: invalid scale {scale} / rate {rate}"));
                }
                if *rate <= 0.0 && cutoff.is_none() {
                    return bad("exp-decay: non-positive rate requires a cutoff".into());
                }
                check_cutoff(*cutoff)
            }
            Excitation::PowerLaw {
                scale,
                offset,
                exponent,
                cutoff,
            } => {
                if !finite(&[*scale, *offset, *exponent]) || *scale < 0.0 || *offset <= 0.0 {
                    return bad(format!(
                        "power-law: need scale >= 0 and offset > 0 (got {scale}, {offset})"
                    ));
                }
                if *exponent <= 1.0 && cutoff.is_none() {
                    return bad("power-law: exponent <= 1 is not integrable without cutoff".into());
                }
                check_cutoff(*cutoff)
            }
            Excitation::ConstantOnInterval { value, start, end } => {
                if !finite(&[*value, *start, *end]) || *start < 0.0 || start >= end {
                    return bad(format!("constant-on-interval: invalid ({start}, {end}]"));
                }
                Ok(())
            }
            Excitation::SineOnInterval {
                amplitude,
                start,
                end,
            } => {
                if !finite(&[*amplitude, *start, *end])
                    || *start < 0.0
                    || start >= end
                    || *end > PI + 1e-12
                {
                    return bad(format!(
                        "sine-on-interval: need 0 <= start < end <= pi, got ({start}, {end}]"
                    ));
                }
                Ok(())
            }
            Excitation::Grid { points } => {
                let mut prev = 0.0;
                for &(t, v) in points {
                    if !(t.is_finite() && v.is_finite()) || t <= prev {
                        return bad("grid: abscissae must be finite, positive and ascending".into());
                    }
                    prev = t;
                }
                Ok(())
            }
            Excitation::Custom(c) => {
                if !(c.support.is_finite() && c.support >= 0.0) {
                    return bad("custom excitation needs a finite support bound".into());
                }
                Ok(())
            }
        }
    }

    /// Evaluates with a finiteness check.
    pub fn try_eval(&self, t: f64) -> Result<f64> {
        let v = self.eval(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(HawkesError::Evaluation(format!(
                "non-finite excitation value {v} at t = {t}"
            )))
        }
    }
}

fn check_cutoff(cutoff: Option<f64>) -> Result<()> {
    match cutoff {
        Some(c) if !(c.is_finite() && c > 0.0) => Err(HawkesError::InvalidParameter(format!(
            "cutoff must be positive, got {c}"
        ))),
        _ => Ok(()),
    }
}

fn within(t: f64, cutoff: Option<f64>) -> bool {
    t > 0.0 && cutoff.is_none_or(|c| t <= c)
}

impl Kernel for Excitation {
    fn eval(&self, t: f64) -> f64 {
        match self {
            Excitation::Zero => 0.0,
            Excitation::ExpDecay {
                scale,
                rate,
                cutoff,
            } => {
                if within(t, *cutoff) {
                    scale * (-rate * t).exp()
                } else {
                    0.0
                }
            }
            Excitation::PowerLaw {
                scale,
                offset,
                exponent,
                cutoff,
            } => {
                if within(t, *cutoff) {
                    scale * (offset + t).powf(-exponent)
                } else {
                    0.0
                }
            }
            Excitation::ConstantOnInterval { value, start, end } => {
                if t > *start && t <= *end {
                    *value
                } else {
                    0.0
                }
            }
            Excitation::SineOnInterval {
                amplitude,
                start,
                end,
            } => {
                if t > *start && t <= *end {
                    amplitude * t.sin()
                } else {
                    0.0
                }
            }
            Excitation::Grid { points } => {
                if t <= 0.0 {
                    return 0.0;
                }
                // first abscissa >= t
                let idx = points.partition_point(|&(tk, _)| tk < t);
                points.get(idx).map_or(0.0, |&(_, v)| v)
            }
            Excitation::Custom(c) => {
                if t > 0.0 && t <= c.support {
                    (c.f)(t)
                } else {
                    0.0
                }
            }
        }
    }

    fn support(&self) -> Option<f64> {
        match self {
            Excitation::Zero => Some(0.0),
            Excitation::ExpDecay { cutoff, .. } | Excitation::PowerLaw { cutoff, .. } => *cutoff,
            Excitation::ConstantOnInterval { end, .. } | Excitation::SineOnInterval { end, .. } => {
                Some(*end)
            }
            Excitation::Grid { points } => Some(points.last().map_or(0.0, |p| p.0)),
            Excitation::Custom(c) => Some(c.support),
        }
    }

    fn primitive(&self, x: f64) -> Option<f64> {
        if x <= 0.0 {
            return Some(0.0);
        }
        let clip = |cutoff: Option<f64>| cutoff.map_or(x, |c| x.min(c));
        Some(match self {
            Excitation::Zero => 0.0,
            Excitation::ExpDecay {
                scale,
                rate,
                cutoff,
            } => {
                let u = clip(*cutoff);
                if *rate == 0.0 {
                    scale * u
                } else {
                    scale / rate * -(-rate * u).exp_m1()
                }
            }
            Excitation::PowerLaw {
                scale,
                offset,
                exponent,
                cutoff,
            } => {
                let u = clip(*cutoff);
                if (*exponent - 1.0).abs() < 1e-12 {
                    scale * ((offset + u) / offset).ln()
                } else {
                    let e = 1.0 - exponent;
                    scale * ((offset + u).powf(e) - offset.powf(e)) / e
                }
            }
            Excitation::ConstantOnInterval { value, start, end } => {
                value * (x.clamp(*start, *end) - start)
            }
            Excitation::SineOnInterval {
                amplitude,
                start,
                end,
            } => amplitude * (start.cos() - x.clamp(*start, *end).cos()),
            Excitation::Grid { points } => {
                let mut acc = 0.0;
                let mut prev = 0.0;
                for &(t, v) in points {
                    if x <= prev {
                        break;
                    }
                    acc += v * (x.min(t) - prev);
                    prev = t;
                }
                acc
            }
            Excitation::Custom(_) => return None,
        })
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Excitation::Zero | Excitation::Custom(_) => vec![],
            Excitation::ExpDecay { cutoff, .. } | Excitation::PowerLaw { cutoff, .. } => {
                cutoff.iter().copied().collect()
            }
            Excitation::ConstantOnInterval { start, end, .. }
            | Excitation::SineOnInterval { start, end, .. } => {
                if *start > 0.0 {
                    vec![*start, *end]
                } else {
                    vec![*end]
                }
            }
            Excitation::Grid { points } => points.iter().map(|p| p.0).collect(),
        }
    }

    fn is_piecewise_constant(&self) -> bool {
        matches!(
            self,
            Excitation::Zero | Excitation::ConstantOnInterval { .. } | Excitation::Grid { .. }
        )
    }

    fn is_nonnegative(&self) -> bool {
        match self {
            Excitation::Zero => true,
            Excitation::ExpDecay { scale, .. } | Excitation::PowerLaw { scale, .. } => {
                *scale >= 0.0
            }
            Excitation::ConstantOnInterval { value, .. } => *value >= 0.0,
            Excitation::SineOnInterval { amplitude, .. } => *amplitude >= 0.0,
            Excitation::Grid { points } => points.iter().all(|p| p.1 >= 0.0),
            // unknown without sampling
            Excitation::Custom(_) => false,
        }
    }
}
