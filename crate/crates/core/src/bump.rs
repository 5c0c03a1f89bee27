//! Smooth monotone transition from 0 to 1 on [0, 1].
//!
//! Built from the kernel `psi(t) = exp(1 - 1/(2t - t^2))`, normalized as
//! `xi(t) = psi(t) / (psi(t) + psi(1 - t))`. The kernel alone is flat at 0
//! but has `psi''(1) = -2`, so the normalization is what makes every
//! derivative vanish at both ends. It also gives the symmetry
//! `xi(1 - t) = 1 - xi(t)`.
//!
//! Evaluation uses the logistic form of the ratio, which avoids
//! underflow of either kernel.

use crate::jet::Jet;

/// Beyond this log-ratio one kernel is below `e^-700` times the other and
/// the transition is treated as saturated together with all derivatives.
const SATURATION: f64 = 700.0;

// xi(t) = 1 / (1 + psi(1-t)/psi(t)) and psi(1-t)/psi(t) = exp(d(t)) with
// d(t) = 1/(2t - t^2) - 1/(1 - t^2), which is decreasing on (0, 1).
fn log_ratio(t: f64) -> f64 {
    1.0 / (2.0 * t - t * t) - 1.0 / (1.0 - t * t)
}

pub fn xi(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let d = log_ratio(t);
    if d > SATURATION {
        0.0
    } else if d < -SATURATION {
        1.0
    } else {
        1.0 / (1.0 + d.exp())
    }
}

/// Taylor jet of `xi` composed with the jet `t`.
pub fn xi_jet(t: Jet) -> Jet {
    let v = t.value();
    let order = t.order();
    if v <= 0.0 {
        return Jet::constant(0.0, order);
    }
    if v >= 1.0 {
        return Jet::constant(1.0, order);
    }
    let d = log_ratio(v);
    if d > SATURATION {
        return Jet::constant(0.0, order);
    }
    if d < -SATURATION {
        return Jet::constant(1.0, order);
    }
    let a = t.scale(2.0) - t * t;
    let b = (-(t * t)).add_const(1.0);
    let dj = a.recip() - b.recip();
    dj.exp().add_const(1.0).recip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_values_and_symmetry() {
        assert_eq!(xi(0.0), 0.0);
        assert_eq!(xi(1.0), 1.0);
        assert!((xi(0.5) - 0.5).abs() < 1e-15);
        for i in 1..100 {
            let t = i as f64 / 100.0;
            assert!((xi(1.0 - t) - (1.0 - xi(t))).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_near_both_ends() {
        for &t in &[0.0, 1e-6, 1e-3, 1.0 - 1e-3, 1.0 - 1e-6, 1.0] {
            let j = xi_jet(Jet::variable(t, 3));
            for k in 1..=3 {
                assert!(j.derivative(k).abs() < 1e-8, "D^{k} xi({t}) = {}", j.derivative(k));
            }
        }
    }

    #[test]
    fn monotone_on_grid() {
        let mut prev = 0.0;
        for i in 1..=2000 {
            let t = i as f64 / 2000.0;
            let j = xi_jet(Jet::variable(t, 1));
            assert!(j.derivative(1) >= 0.0);
            assert!(j.value() >= prev);
            prev = j.value();
        }
    }

    #[test]
    fn jet_matches_finite_differences() {
        let h = 1e-5;
        for &t in &[0.1, 0.3, 0.5, 0.77, 0.9] {
            let j = xi_jet(Jet::variable(t, 2));
            let fd1 = (xi(t + h) - xi(t - h)) / (2.0 * h);
            let fd2 = (xi(t + h) - 2.0 * xi(t) + xi(t - h)) / (h * h);
            assert!((j.derivative(1) - fd1).abs() < 1e-7);
            assert!((j.derivative(2) - fd2).abs() < 1e-3);
        }
    }
}
