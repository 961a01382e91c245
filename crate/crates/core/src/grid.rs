//! Floating-point helpers for placing reals on a `k * delta` grid.
//!
//! Ratios such as `0.9 / 0.3` land a hair above or below the exact integer.
//! Values within a relative `1e-9` of an integer are snapped to it before
//! rounding, so bin edges and lag counts agree with the exact arithmetic.

const SNAP_TOL: f64 = 1e-9;

fn snap(r: f64) -> f64 {
    let nearest = r.round();
    if (r - nearest).abs() <= SNAP_TOL * nearest.abs().max(1.0) {
        nearest
    } else {
        r
    }
}

/// `floor(x / delta)` with edge snapping.
pub fn floor_ratio(x: f64, delta: f64) -> f64 {
    snap(x / delta).floor()
}

/// `ceil(x / delta)` with edge snapping.
pub fn ceil_ratio(x: f64, delta: f64) -> f64 {
    snap(x / delta).ceil()
}

/// Number of lags covering a support: `p = ceil(s / delta)`.
pub fn lag_count(support: f64, delta: f64) -> usize {
    ceil_ratio(support, delta).max(0.0) as usize
}

/// Lag index `k` with `k * delta` closest from below to `t`: `floor(t / delta)`.
pub fn lag_index(t: f64, delta: f64) -> usize {
    floor_ratio(t, delta).max(0.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapping_fixes_representation_error() {
        assert_eq!(ceil_ratio(0.9, 0.3), 3.0);
        assert_eq!(lag_count(6.0, 0.2), 30);
        assert_eq!(lag_index(1.0, 0.2), 5);
        assert_eq!(lag_index(1.0, 0.1), 10);
        assert_eq!(floor_ratio(2.0, 0.5), 4.0);
        assert_eq!(ceil_ratio(0.31, 0.1), 4.0);
    }
}
