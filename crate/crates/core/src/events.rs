//! Event streams and the bin-count transformation.
//!
//! Bins are right-closed and anchored at the window start: bin `k`
//! (1-based) covers `(t_start + (k-1)Δ, t_start + kΔ]`. Only the first
//! `n = floor(T/Δ)` full bins are kept; events in the leftover tail are
//! dropped and counted.

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::grid;

/// Observation window `(start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || start >= end {
            return Err(HawkesError::InvalidParameter(format!(
                "window ({start}, {end}] must satisfy start < end"
            )));
        }
        Ok(Window { start, end })
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        t > self.start && t <= self.end
    }
}

/// Sorted event timestamps per component on a common window.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    times: Vec<Vec<f64>>,
    window: Window,
}

impl EventStream {
    /// Builds a stream from per-component timestamps that are already sorted.
    pub fn new(times: Vec<Vec<f64>>, window: Window) -> Result<Self> {
        if times.is_empty() {
            return Err(HawkesError::InvalidParameter(
                "an event stream needs at least one component".into(),
            ));
        }
        for (i, comp) in times.iter().enumerate() {
            for (k, &t) in comp.iter().enumerate() {
                if !window.contains(t) {
                    return Err(HawkesError::InvalidParameter(format!(
                        "component {}: timestamp {t} outside window ({}, {}]",
                        i + 1,
                        window.start,
                        window.end
                    )));
                }
                if k > 0 && comp[k - 1] > t {
                    return Err(HawkesError::InvalidParameter(format!(
                        "component {}: timestamps not sorted at position {k}",
                        i + 1
                    )));
                }
            }
        }
        Ok(EventStream { times, window })
    }

    /// Sorts each component before validating.
    pub fn from_unsorted(mut times: Vec<Vec<f64>>, window: Window) -> Result<Self> {
        for comp in &mut times {
            if comp.iter().any(|t| t.is_nan()) {
                return Err(HawkesError::InvalidParameter("NaN timestamp".into()));
            }
            comp.sort_by(|a, b| a.total_cmp(b));
        }
        Self::new(times, window)
    }

    pub fn dim(&self) -> usize {
        self.times.len()
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.times[i]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.times
    }

    pub fn total_events(&self) -> usize {
        self.times.iter().map(Vec::len).sum()
    }

    /// Events restricted to a sub-window, keeping the sub-window as the new window.
    pub fn restrict(&self, window: Window) -> Result<EventStream> {
        let times = self
            .times
            .iter()
            .map(|c| c.iter().copied().filter(|&t| window.contains(t)).collect())
            .collect();
        EventStream::new(times, window)
    }

    /// Translates every timestamp (and the window) by `offset`.
    pub fn shifted(&self, offset: f64) -> EventStream {
        EventStream {
            times: self
                .times
                .iter()
                .map(|c| c.iter().map(|t| t + offset).collect())
                .collect(),
            window: Window {
                start: self.window.start + offset,
                end: self.window.end + offset,
            },
        }
    }
}

/// Output of [`dedupe`]: the collapsed stream and removed duplicates per component.
#[derive(Debug, Clone, PartialEq)]
pub struct Deduplicated {
    pub stream: EventStream,
    pub removed: Vec<usize>,
}

/// Collapses runs of equal timestamps within each component to a single event.
pub fn dedupe(stream: &EventStream) -> Deduplicated {
    let mut removed = Vec::with_capacity(stream.dim());
    let times = stream
        .times
        .iter()
        .map(|comp| {
            let mut out: Vec<f64> = Vec::with_capacity(comp.len());
            for &t in comp {
                if out.last() != Some(&t) {
                    out.push(t);
                }
            }
            removed.push(comp.len() - out.len());
            out
        })
        .collect();
    Deduplicated {
        stream: EventStream {
            times,
            window: stream.window,
        },
        removed,
    }
}

/// Per-bin event counts, the estimator's input.
#[derive(Debug, Clone, PartialEq)]
pub struct BinCountSequence {
    d: usize,
    delta: f64,
    n: usize,
    /// Bin-major: `counts[k * d + i]` is the count of component `i` in bin `k`.
    counts: Vec<u32>,
    dropped_tail: Vec<usize>,
}

impl BinCountSequence {
    /// Wraps raw count vectors, e.g. from an INAR simulation.
    pub fn from_counts(delta: f64, vectors: &[Vec<u32>]) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(HawkesError::InvalidParameter(format!(
                "bin width must be positive, got {delta}"
            )));
        }
        let d = vectors.first().map(Vec::len).unwrap_or(0);
        if d == 0 {
            return Err(HawkesError::InvalidParameter(
                "count vectors must be non-empty".into(),
            ));
        }
        if vectors.iter().any(|v| v.len() != d) {
            return Err(HawkesError::InvalidParameter(
                "count vectors have inconsistent dimension".into(),
            ));
        }
        Ok(BinCountSequence {
            d,
            delta,
            n: vectors.len(),
            counts: vectors.iter().flatten().copied().collect(),
            dropped_tail: vec![0; d],
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Count vector of bin `k` (0-based).
    pub fn bin(&self, k: usize) -> &[u32] {
        &self.counts[k * self.d..(k + 1) * self.d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.counts.chunks_exact(self.d)
    }

    /// Events per component that fell in the dropped tail `(nΔ, T]`.
    pub fn dropped_tail(&self) -> &[usize] {
        &self.dropped_tail
    }

    pub fn totals(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.d];
        for v in self.iter() {
            for (o, &c) in out.iter_mut().zip(v) {
                *o += c as u64;
            }
        }
        out
    }

    /// Copy with every count multiplied by `c`.
    pub fn scaled(&self, c: u32) -> BinCountSequence {
        BinCountSequence {
            counts: self.counts.iter().map(|&x| x * c).collect(),
            ..self.clone()
        }
    }

    /// The sequence without its first `k` bins.
    pub fn skip_bins(&self, k: usize) -> BinCountSequence {
        let k = k.min(self.n);
        BinCountSequence {
            n: self.n - k,
            counts: self.counts[k * self.d..].to_vec(),
            ..self.clone()
        }
    }

    /// Count vectors as nested `Vec`s.
    pub fn to_vectors(&self) -> Vec<Vec<u32>> {
        self.iter().map(<[u32]>::to_vec).collect()
    }
}

/// Bins an event stream at width `delta`.
pub fn bin_counts(stream: &EventStream, delta: f64) -> Result<BinCountSequence> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(HawkesError::InvalidParameter(format!(
            "bin width must be positive, got {delta}"
        )));
    }
    let window = stream.window();
    let length = window.length();
    if length < delta {
        return Err(HawkesError::WindowTooShort { length, delta });
    }
    let n = grid::floor_ratio(length, delta) as usize;
    let d = stream.dim();
    let mut counts = vec![0u32; n * d];
    let mut dropped_tail = vec![0usize; d];
    for (i, comp) in stream.components().iter().enumerate() {
        for &t in comp {
            // 1-based bin index ceil((t - start) / delta)
            let k = grid::ceil_ratio(t - window.start, delta) as usize;
            if k == 0 || k > n {
                dropped_tail[i] += 1;
            } else {
                counts[(k - 1) * d + i] += 1;
            }
        }
    }
    Ok(BinCountSequence {
        d,
        delta,
        n,
        counts,
        dropped_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stream(times: Vec<Vec<f64>>, start: f64, end: f64) -> EventStream {
        EventStream::new(times, Window::new(start, end).unwrap()).unwrap()
    }

    #[test]
    fn skip_bins_drops_leading_vectors() {
        let bc = BinCountSequence::from_counts(0.5, &[vec![1, 2], vec![3, 4], vec![5, 6]]).unwrap();
        let tail = bc.skip_bins(1);
        assert_eq!(tail.to_vectors(), vec![vec![3, 4], vec![5, 6]]);
        assert_eq!(tail.delta(), 0.5);
        assert!(bc.skip_bins(5).is_empty());
    }

    #[test]
    fn dedupe_collapses_ties() {
        let s = stream(vec![vec![1.0, 1.0, 2.0]], 0.0, 3.0);
        let out = dedupe(&s);
        assert_eq!(out.stream.component(0), &[1.0, 2.0]);
        assert_eq!(out.removed, vec![1]);
    }

    #[test]
    fn dedupe_identity_on_strict_stream() {
        let s = stream(vec![vec![0.5, 1.0, 2.5]], 0.0, 3.0);
        let out = dedupe(&s);
        assert_eq!(out.stream, s);
        assert_eq!(out.removed, vec![0]);
    }

    #[test]
    fn dedupe_is_per_component() {
        let s = stream(
            vec![vec![0.1, 0.2], vec![0.3, 0.3, 0.3, 0.9], vec![1.0]],
            0.0,
            2.0,
        );
        let out = dedupe(&s);
        assert_eq!(out.removed, vec![0, 2, 0]);
        assert_eq!(out.stream.component(0), s.component(0));
        assert_eq!(out.stream.component(1), &[0.3, 0.9]);
        assert_eq!(out.stream.component(2), s.component(2));
    }

    #[test]
    fn bins_are_right_closed() {
        let s = stream(vec![vec![0.25, 0.5, 1.7]], 0.0, 2.0);
        let bc = bin_counts(&s, 0.5).unwrap();
        assert_eq!(bc.to_vectors(), vec![vec![2], vec![0], vec![0], vec![1]]);
    }

    #[test]
    fn empty_stream_bins_to_zeros() {
        let s = stream(vec![vec![]], 0.0, 3.0);
        let bc = bin_counts(&s, 1.0).unwrap();
        assert_eq!(bc.to_vectors(), vec![vec![0], vec![0], vec![0]]);
    }

    #[test]
    fn bivariate_componentwise_placement() {
        let s = stream(vec![vec![0.1], vec![1.9]], 0.0, 2.0);
        let bc = bin_counts(&s, 1.0).unwrap();
        assert_eq!(bc.to_vectors(), vec![vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn tail_events_are_dropped_and_reported() {
        let s = stream(vec![vec![0.5, 2.1, 2.4]], 0.0, 2.5);
        let bc = bin_counts(&s, 1.0).unwrap();
        assert_eq!(bc.len(), 2);
        assert_eq!(bc.dropped_tail(), &[2]);
    }

    #[test]
    fn bins_anchor_at_window_start() {
        let s = stream(vec![vec![10.5, 11.0, 11.2]], 10.0, 12.0);
        let bc = bin_counts(&s, 1.0).unwrap();
        assert_eq!(bc.to_vectors(), vec![vec![2], vec![1]]);
    }

    #[test]
    fn invalid_bin_width_and_short_window() {
        let s = stream(vec![vec![]], 0.0, 1.0);
        assert!(matches!(
            bin_counts(&s, 0.0),
            Err(HawkesError::InvalidParameter(_))
        ));
        assert!(matches!(
            bin_counts(&s, 2.0),
            Err(HawkesError::WindowTooShort { .. })
        ));
    }

    #[test]
    fn constructor_rejects_out_of_window_and_unsorted() {
        let w = Window::new(0.0, 1.0).unwrap();
        assert!(EventStream::new(vec![vec![0.0]], w).is_err());
        assert!(EventStream::new(vec![vec![0.5, 0.2]], w).is_err());
        assert!(EventStream::from_unsorted(vec![vec![0.5, 0.2]], w).is_ok());
        assert!(Window::new(1.0, 1.0).is_err());
    }

    fn arb_stream() -> impl Strategy<Value = EventStream> {
        (1usize..4, 1u32..40).prop_flat_map(|(d, len)| {
            proptest::collection::vec(proptest::collection::vec(0u32..4000, 0..200), d..=d)
                .prop_map(move |comps| {
                    // quarter-millisecond grid keeps ties and exact bin edges in play
                    let end = len as f64;
                    let times = comps
                        .into_iter()
                        .map(|c| {
                            c.into_iter()
                                .map(|v| (v as f64 + 1.0) * 0.01)
                                .filter(|t| *t <= end)
                                .collect()
                        })
                        .collect();
                    EventStream::from_unsorted(times, Window::new(0.0, end).unwrap()).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn bin_totals_conserve_events(s in arb_stream(), delta in prop::sample::select(vec![0.1, 0.25, 0.5, 1.0, 3.0])) {
            prop_assume!(s.window().length() >= delta);
            let bc = bin_counts(&s, delta).unwrap();
            let edge = s.window().start + bc.len() as f64 * delta;
            for (i, total) in bc.totals().into_iter().enumerate() {
                let inside = s.component(i).iter().filter(|&&t| t <= edge + 1e-9).count();
                prop_assert_eq!(total as usize, inside);
                prop_assert_eq!(total as usize + bc.dropped_tail()[i], s.component(i).len());
            }
        }

        #[test]
        fn halving_refines_bins(s in arb_stream(), delta in prop::sample::select(vec![0.2, 0.5, 1.0])) {
            prop_assume!(s.window().length() >= delta);
            let coarse = bin_counts(&s, delta).unwrap();
            let fine = bin_counts(&s, delta / 2.0).unwrap();
            for k in 0..coarse.len() {
                for i in 0..s.dim() {
                    prop_assert_eq!(coarse.bin(k)[i], fine.bin(2 * k)[i] + fine.bin(2 * k + 1)[i]);
                }
            }
        }

        #[test]
        fn dedupe_is_idempotent(s in arb_stream()) {
            let once = dedupe(&s).stream;
            let twice = dedupe(&once);
            prop_assert_eq!(&twice.stream, &once);
            prop_assert!(twice.removed.iter().all(|&r| r == 0));
        }
    }
}
