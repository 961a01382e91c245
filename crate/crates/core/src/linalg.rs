//! Small dense linear-algebra helpers.

use nalgebra::DMatrix;

const POWER_MAX_ITER: usize = 10_000;
const POWER_TOL: f64 = 1e-12;

/// Largest eigenvalue modulus.
///
/// Non-negative matrices go through power iteration on `K + I` (same Perron
/// vector, primitive even when `K` is periodic) with Collatz–Wielandt bounds
/// as the stopping rule. 2×2 matrices use the characteristic polynomial.
/// Anything else falls back to a full eigen-decomposition.
pub fn spectral_radius(k: &DMatrix<f64>) -> f64 {
    assert!(k.is_square(), "spectral radius of a non-square matrix");
    match k.nrows() {
        0 => 0.0,
        1 => k[(0, 0)].abs(),
        2 => spectral_radius_2x2(k[(0, 0)], k[(0, 1)], k[(1, 0)], k[(1, 1)]),
        _ => {
            if k.iter().all(|&v| v >= 0.0) {
                if let Some(r) = perron_root(k) {
                    return r;
                }
            }
            eigen_radius(k)
        }
    }
}

fn spectral_radius_2x2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let tr = a + d;
    let det = a * d - b * c;
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (tr / 2.0 + s).abs().max((tr / 2.0 - s).abs())
    } else {
        // complex pair: |λ|² = det
        det.sqrt()
    }
}

fn perron_root(k: &DMatrix<f64>) -> Option<f64> {
    let n = k.nrows();
    let shifted = k + DMatrix::<f64>::identity(n, n);
    let mut x = nalgebra::DVector::from_element(n, 1.0);
    for _ in 0..POWER_MAX_ITER {
        let y = &shifted * &x;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            if x[i] <= 0.0 {
                return None;
            }
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if hi - lo <= POWER_TOL * hi.max(1.0) {
            return Some(((lo + hi) / 2.0 - 1.0).max(0.0));
        }
        let norm = y.amax();
        if norm <= 0.0 || !norm.is_finite() {
            return None;
        }
        x = y / norm;
    }
    None
}

fn eigen_radius(k: &DMatrix<f64>) -> f64 {
    k.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Matrix 1-norm (maximum absolute column sum).
pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn diagonal_and_zero() {
        let k = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.3]);
        assert!((spectral_radius(&k) - 0.5).abs() < 1e-15);
        assert_eq!(spectral_radius(&DMatrix::zeros(3, 3)), 0.0);
    }

    #[test]
    fn periodic_matrix() {
        let k = DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0]);
        assert!((spectral_radius(&k) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn complex_pair_2x2() {
        // rotation-like: eigenvalues ±0.5i
        let k = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        assert!((spectral_radius(&k) - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn matches_eigen_decomposition(d in 1usize..6, vals in proptest::collection::vec(0.0f64..1.0, 36)) {
            let k = DMatrix::from_fn(d, d, |i, j| vals[i * 6 + j]);
            let a = spectral_radius(&k);
            let b = eigen_radius(&k);
            prop_assert!((a - b).abs() < 1e-8 * b.max(1.0), "{a} vs {b}");
        }

        #[test]
        fn homogeneous_in_scalar(d in 1usize..5, c in 0.0f64..3.0, vals in proptest::collection::vec(0.0f64..1.0, 25)) {
            let k = DMatrix::from_fn(d, d, |i, j| vals[i * 5 + j]);
            let r = spectral_radius(&k);
            let rc = spectral_radius(&(&k * c));
            prop_assert!((rc - c * r).abs() < 1e-8 * (c * r).max(1.0));
        }
    }
}
