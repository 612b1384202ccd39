//! Bracketing root finders shared by the exponent solvers and the
//! time-iteration fallback.

/// Bisection on a bracket with `f(lo) < 0 < f(hi)` (or the reverse). Stops once
/// `done(x, f(x))` holds or the bracket stops shrinking.
pub(crate) fn bisect<F, D>(f: F, mut lo: f64, mut hi: f64, done: D) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64, f64) -> bool,
{
    let lo_sign = f(lo) < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        let fm = f(mid);
        if done(mid, fm) {
            return mid;
        }
        if (fm < 0.0) == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Scans `z = 2^j * 1e-3`, `j = 0..=24`, for the first point where an
/// increasing-through-zero function turns positive. Returns the bracket
/// `(previous point, first positive point)`, with 0 as the left end when the
/// very first point is already positive.
pub(crate) fn scan_positive_crossing<F: Fn(f64) -> f64>(f: F) -> Option<(f64, f64)> {
    let mut prev = 0.0;
    for j in 0..=24 {
        let z = 1e-3 * f64::powi(2.0, j);
        let fz = f(z);
        if fz > 0.0 {
            return Some((prev, z));
        }
        prev = z;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, |_, fx| fx.abs() < 1e-15);
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn scan_brackets() {
        let (lo, hi) = scan_positive_crossing(|z| z - 0.5).unwrap();
        assert!(lo < 0.5 && hi > 0.5);
        assert_eq!(hi, 0.512);
        assert_eq!(scan_positive_crossing(|_| -1.0), None);
        assert_eq!(scan_positive_crossing(|z| z + 1.0), Some((0.0, 1e-3)));
    }
}
