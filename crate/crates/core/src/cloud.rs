//! Deterministic low-discrepancy point clouds for pointwise checks.
//!
//! Points are the Halton sequence in bases 2, 3, 5, ... starting at index 1,
//! unscrambled, mapped affinely onto the requested box. The same request
//! always yields the same points.

use crate::dynamics::ReducedState;
use crate::geometry::Point;

/// Points per cloud used by the checks.
pub const CLOUD_SIZE: usize = 100;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    out
}

/// `count` Halton points in the box `bounds` (one `(lo, hi)` per axis).
pub fn halton(bounds: &[(f64, f64)], count: usize) -> Vec<Vec<f64>> {
    assert!(
        bounds.len() <= PRIMES.len(),
        "at most {} dimensions",
        PRIMES.len()
    );
    (1..=count as u64)
        .map(|i| {
            bounds
                .iter()
                .zip(PRIMES)
                .map(|(&(lo, hi), p)| lo + (hi - lo) * radical_inverse(i, p))
                .collect()
        })
        .collect()
}

/// Points `(x, u, w)` with every coordinate in `[lo, hi]`.
pub fn points(n: usize, lo: f64, hi: f64, count: usize) -> Vec<Point> {
    halton(&vec![(lo, hi); n + 2], count)
        .into_iter()
        .map(|c| Point::from_coords(&c))
        .collect()
}

/// Reduced states `(x, x', u, w)` with every entry in `[lo, hi]`.
pub fn states(n: usize, lo: f64, hi: f64, count: usize) -> Vec<ReducedState> {
    halton(&vec![(lo, hi); 2 * n + 2], count)
        .into_iter()
        .map(|c| {
            ReducedState::new(
                c[..n].to_vec(),
                c[n..2 * n].to_vec(),
                c[2 * n],
                c[2 * n + 1],
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_values() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(1, 3) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cloud_is_deterministic_and_bounded() {
        let a = points(2, -1.0, 1.0, CLOUD_SIZE);
        let b = points(2, -1.0, 1.0, CLOUD_SIZE);
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        assert!(a
            .iter()
            .all(|p| p.coords().iter().all(|c| (-1.0..1.0).contains(c))));
    }
}
