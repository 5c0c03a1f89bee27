//! Truncated Taylor series arithmetic.
//!
//! A [`Jet`] holds the normalized Taylor coefficients `c[k] = f^(k)(x0) / k!`
//! of a function around a point. Arithmetic on jets propagates exact
//! derivatives (up to rounding) through compositions of elementary
//! functions, which is how derivatives of the chart models, the bump and
//! the spliced branches are computed.

use std::ops::{Add, Mul, Neg, Sub};

/// Maximum number of stored coefficients (derivative orders 0..=7).
pub const MAX_ORDER: usize = 7;
const LEN: usize = MAX_ORDER + 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    c: [f64; LEN],
    n: usize,
}

impl Jet {
    /// Constant jet with `order + 1` coefficients.
    pub fn constant(v: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let mut c = [0.0; LEN];
        c[0] = v;
        Jet { c, n: order + 1 }
    }

    /// The identity variable `x0 + h`.
    pub fn variable(x0: f64, order: usize) -> Self {
        let mut j = Jet::constant(x0, order);
        if order >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.n - 1
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Normalized coefficient `f^(k) / k!`.
    pub fn coeff(&self, k: usize) -> f64 {
        if k < self.n {
            self.c[k]
        } else {
            0.0
        }
    }

    /// The k-th derivative `f^(k)(x0)`.
    pub fn derivative(&self, k: usize) -> f64 {
        let mut f = 1.0;
        for i in 2..=k {
            f *= i as f64;
        }
        self.coeff(k) * f
    }

    pub fn derivatives(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.derivative(k)).collect()
    }

    pub fn scale(mut self, s: f64) -> Self {
        for v in self.c[..self.n].iter_mut() {
            *v *= s;
        }
        self
    }

    pub fn add_const(mut self, s: f64) -> Self {
        self.c[0] += s;
        self
    }

    pub fn recip(&self) -> Self {
        let a = &self.c;
        let mut b = [0.0; LEN];
        b[0] = 1.0 / a[0];
        for k in 1..self.n {
            let mut s = 0.0;
            for j in 1..=k {
                s += a[j] * b[k - j];
            }
            b[k] = -s / a[0];
        }
        Jet { c: b, n: self.n }
    }

    pub fn div(&self, other: &Jet) -> Self {
        *self * other.recip()
    }

    pub fn exp(&self) -> Self {
        let a = &self.c;
        let mut e = [0.0; LEN];
        e[0] = a[0].exp();
        for k in 1..self.n {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * a[j] * e[k - j];
            }
            e[k] = s / k as f64;
        }
        Jet { c: e, n: self.n }
    }

    /// `self^p` for a jet with strictly positive value.
    pub fn powf(&self, p: f64) -> Self {
        let a = &self.c;
        assert!(a[0] > 0.0, "powf of a jet requires a positive base");
        let mut b = [0.0; LEN];
        b[0] = a[0].powf(p);
        for k in 1..self.n {
            let mut s = 0.0;
            for j in 1..=k {
                s += ((p + 1.0) * j as f64 - k as f64) * a[j] * b[k - j];
            }
            b[k] = s / (k as f64 * a[0]);
        }
        Jet { c: b, n: self.n }
    }

    /// Evaluate the polynomial `sum coeffs[i] * self^i` by Horner's rule.
    pub fn poly(&self, coeffs: &[f64]) -> Self {
        let mut acc = Jet::constant(0.0, self.order());
        for &c in coeffs.iter().rev() {
            acc = (acc * *self).add_const(c);
        }
        acc
    }

    fn zip(self, rhs: Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let n = self.n.min(rhs.n);
        let mut c = [0.0; LEN];
        for k in 0..n {
            c[k] = f(self.c[k], rhs.c[k]);
        }
        Jet { c, n }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        self.zip(rhs, |a, b| a + b)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self.zip(rhs, |a, b| a - b)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let n = self.n.min(rhs.n);
        let mut c = [0.0; LEN];
        for k in 0..n {
            let mut s = 0.0;
            for j in 0..=k {
                s += self.c[j] * rhs.c[k - j];
            }
            c[k] = s;
        }
        Jet { c, n }
    }
}
