//! Bracketed inversion of increasing scalar functions.

/// Solve `f(x) = target` for increasing `f` on `[lo, hi]`.
///
/// Bisects until the bracket is narrower than `rel_tol * max(|lo|,|hi|)`
/// (or an absolute floor), then polishes with Newton steps that are only
/// accepted while they stay inside the final bracket. The result is
/// clamped to `[lo, hi]` when the target lies outside the range.
pub fn invert_increasing(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
) -> f64 {
    if target <= f(lo) {
        return lo;
    }
    if target >= f(hi) {
        return hi;
    }
    if lo == 0.0 && hi > 0.0 {
        // Roots near zero: shrink geometrically so bisection stays relative.
        let mut l = 0.5 * hi;
        while l > f64::MIN_POSITIVE && f(l) >= target {
            hi = l;
            l *= 0.5;
        }
        if l > f64::MIN_POSITIVE {
            lo = l;
        }
    }
    for _ in 0..2000 {
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        if hi - lo <= rel_tol * scale {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..2 {
        let d = df(x);
        if !(d.is_finite() && d > 0.0) {
            break;
        }
        let nx = x - (f(x) - target) / d;
        if nx >= lo && nx <= hi {
            x = nx;
        } else {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_cubic() {
        let x = invert_increasing(|x| x * x * x + x, |x| 3.0 * x * x + 1.0, 10.0, 0.0, 5.0, 1e-13);
        assert!((x * x * x + x - 10.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_roots_keep_relative_precision() {
        let t = 1e-200;
        let x = invert_increasing(|u| u + u * u, |u| 1.0 + 2.0 * u, t, 0.0, 1.0, 1e-13);
        assert!(((x - t) / t).abs() < 1e-12);
    }

    #[test]
    fn clamps_out_of_range_targets() {
        assert_eq!(invert_increasing(|x| x, |_| 1.0, -3.0, 0.0, 1.0, 1e-13), 0.0);
        assert_eq!(invert_increasing(|x| x, |_| 1.0, 3.0, 0.0, 1.0, 1e-13), 1.0);
    }
}
