//! Construction and evaluation of full-branch maps.
//!
//! A map is assembled from six pieces. Near each fixed point it follows a
//! closed-form local model; near the discontinuity at 0 it follows a power
//! law; the two remaining gaps are filled by quintic Hermite polynomials that
//! match value, slope and curvature at both ends, so the map is C^2.
//!
//! Points near the fixed points are stored in chart coordinates
//! (`u = 1 + x` at -1, `u = 1 - x` at +1) so orbits that linger there keep
//! full relative precision.

use serde::{Deserialize, Serialize};

use crate::bump;
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::params::MapParams;
use crate::roots::invert_increasing;

const INVERSE_TOL: f64 = 1e-13;

/// A point of [-1, 1] in the chart that keeps it precise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Point {
    /// Distance `u = x + 1` from the left fixed point.
    Left(f64),
    Mid(f64),
    /// Distance `u = 1 - x` from the right fixed point.
    Right(f64),
}

impl Point {
    pub fn x(&self) -> f64 {
        match *self {
            Point::Left(u) => u - 1.0,
            Point::Mid(x) => x,
            Point::Right(u) => 1.0 - u,
        }
    }

    pub fn dist_minus(&self) -> f64 {
        match *self {
            Point::Left(u) => u,
            Point::Mid(x) => x + 1.0,
            Point::Right(u) => 2.0 - u,
        }
    }

    pub fn dist_plus(&self) -> f64 {
        match *self {
            Point::Left(u) => 2.0 - u,
            Point::Mid(x) => 1.0 - x,
            Point::Right(u) => u,
        }
    }

    /// Signed distance `b - a`, computed in a shared chart when possible.
    pub fn gap(a: Point, b: Point) -> f64 {
        match (a, b) {
            (Point::Left(u), Point::Left(v)) => v - u,
            (Point::Right(u), Point::Right(v)) => u - v,
            _ => b.x() - a.x(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" | "minus" | "-" => Ok(Side::Left),
            "right" | "plus" | "+" => Ok(Side::Right),
            _ => Err(Error::InvalidInput(format!("unknown side {s:?}"))),
        }
    }
}

/// Which closed-form piece governs a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    LeftFixed,
    LeftGlue,
    LeftZero,
    RightZero,
    RightGlue,
    RightFixed,
}

/// `u^p` with fast paths for integer and half-integer exponents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pow {
    Int(i32),
    Half(i32),
    Gen(f64),
}

impl Pow {
    pub(crate) fn new(p: f64) -> Self {
        if p == p.round() && p.abs() < 64.0 {
            Pow::Int(p as i32)
        } else if (2.0 * p) == (2.0 * p).round() && p > 0.0 && p < 64.0 {
            Pow::Half(p.floor() as i32)
        } else {
            Pow::Gen(p)
        }
    }

    #[inline(always)]
    pub(crate) fn eval(self, u: f64) -> f64 {
        match self {
            Pow::Int(n) => u.powi(n),
            Pow::Half(n) => u.powi(n) * u.sqrt(),
            Pow::Gen(p) => u.powf(p),
        }
    }
}

/// Local model at a fixed point, written in the chart coordinate `u`.
#[derive(Clone, Debug, PartialEq)]
pub enum FixedModel {
    /// `u + b u^(1+ell)` with `ell > 0`.
    Power { ell: f64, b: f64, pow: Pow, pow_d: Pow },
    /// `(1+b) u + c u^2`: a repelling hyperbolic fixed point.
    Hyperbolic { b: f64, c: f64 },
    /// Power law `inner` below `u_in`, `outer` above `u_out` and a smooth
    /// blend in between.
    Spliced(Box<Splice>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splice {
    pub inner: FixedModel,
    pub outer: FixedModel,
    pub u_in: f64,
    pub u_out: f64,
}

impl FixedModel {
    pub fn power(ell: f64, b: f64) -> Self {
        FixedModel::Power { ell, b, pow: Pow::new(1.0 + ell), pow_d: Pow::new(ell) }
    }

    pub(crate) fn from_params(ell: f64, b: f64, c: f64) -> Self {
        if ell == 0.0 {
            FixedModel::Hyperbolic { b, c }
        } else {
            FixedModel::power(ell, b)
        }
    }

    #[inline]
    pub fn phi(&self, u: f64) -> f64 {
        match self {
            FixedModel::Power { b, pow, .. } => u + b * pow.eval(u),
            FixedModel::Hyperbolic { b, c } => (1.0 + b) * u + c * u * u,
            FixedModel::Spliced(s) => {
                if u <= s.u_in {
                    s.inner.phi(u)
                } else if u >= s.u_out {
                    s.outer.phi(u)
                } else {
                    let (h, f) = (s.inner.phi(u), s.outer.phi(u));
                    h + bump::xi((u - s.u_in) / (s.u_out - s.u_in)) * (f - h)
                }
            }
        }
    }

    pub fn dphi(&self, u: f64) -> f64 {
        match self {
            FixedModel::Power { ell, b, pow_d, .. } => 1.0 + b * (1.0 + ell) * pow_d.eval(u),
            FixedModel::Hyperbolic { b, c } => 1.0 + b + 2.0 * c * u,
            FixedModel::Spliced(s) => {
                if u <= s.u_in {
                    s.inner.dphi(u)
                } else if u >= s.u_out {
                    s.outer.dphi(u)
                } else {
                    self.jet(u, 1).derivative(1)
                }
            }
        }
    }

    pub fn d2phi(&self, u: f64) -> f64 {
        match self {
            FixedModel::Power { ell, b, .. } => {
                if *ell == 1.0 {
                    2.0 * b
                } else if u == 0.0 {
                    if *ell < 1.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    b * (1.0 + ell) * ell * u.powf(ell - 1.0)
                }
            }
            FixedModel::Hyperbolic { c, .. } => 2.0 * c,
            FixedModel::Spliced(s) => {
                if u <= s.u_in {
                    s.inner.d2phi(u)
                } else if u >= s.u_out {
                    s.outer.d2phi(u)
                } else {
                    self.jet(u, 2).derivative(2)
                }
            }
        }
    }

    /// Taylor jet of the model at `u > 0`.
    pub fn jet(&self, u: f64, order: usize) -> Jet {
        self.jet_of(Jet::variable(u, order))
    }

    /// The model composed with a jet whose value is positive.
    pub fn jet_of(&self, v: Jet) -> Jet {
        let u = v.value();
        match self {
            FixedModel::Power { ell, b, .. } => v + v.powf(1.0 + ell).scale(*b),
            FixedModel::Hyperbolic { b, c } => v.scale(1.0 + b) + (v * v).scale(*c),
            FixedModel::Spliced(s) => {
                if u <= s.u_in {
                    s.inner.jet_of(v)
                } else if u >= s.u_out {
                    s.outer.jet_of(v)
                } else {
                    let h = s.inner.jet_of(v);
                    let f = s.outer.jet_of(v);
                    let eta = v.add_const(-s.u_in).scale(1.0 / (s.u_out - s.u_in));
                    h + bump::xi_jet(eta) * (f - h)
                }
            }
        }
    }

    /// Solve `phi(u) = v` for `u` in `[0, u_max]`.
    pub fn inverse(&self, v: f64, u_max: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        match self {
            FixedModel::Power { .. } | FixedModel::Hyperbolic { .. } => {
                // Convex with phi(0) = 0 and phi(u) >= u, so the root lies in
                // [v^2 / phi(v), v].
                let hi = v.min(u_max);
                let lo = (v * v / self.phi(v)).min(hi);
                invert_increasing(|u| self.phi(u), |u| self.dphi(u), v, lo, hi, INVERSE_TOL)
            }
            FixedModel::Spliced(s) => {
                if v <= s.inner.phi(s.u_in) {
                    s.inner.inverse(v, s.u_in)
                } else if v >= s.outer.phi(s.u_out) {
                    s.outer.inverse(v, u_max).max(s.u_out)
                } else {
                    invert_increasing(|u| self.phi(u), |u| self.dphi(u), v, s.u_in, s.u_out, INVERSE_TOL)
                }
            }
        }
    }

    /// Tangency exponent `ell` of the model at `u = 0`.
    pub fn ell(&self) -> f64 {
        match self {
            FixedModel::Power { ell, .. } => *ell,
            FixedModel::Hyperbolic { .. } => 0.0,
            FixedModel::Spliced(s) => s.inner.ell(),
        }
    }
}

/// Power law `a s^k` for the distance `s` from 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct ZeroModel {
    pub a: f64,
    pub k: f64,
    pow: Pow,
    pow_d: Pow,
    pow_inv: Pow,
}

impl ZeroModel {
    fn new(a: f64, k: f64) -> Self {
        ZeroModel { a, k, pow: Pow::new(k), pow_d: Pow::new(k - 1.0), pow_inv: Pow::new(1.0 / k) }
    }

    #[inline(always)]
    pub(crate) fn value(&self, s: f64) -> f64 {
        self.a * self.pow.eval(s)
    }

    pub(crate) fn d1(&self, s: f64) -> f64 {
        if self.k == 1.0 {
            self.a
        } else {
            self.a * self.k * self.pow_d.eval(s)
        }
    }

    pub(crate) fn d2(&self, s: f64) -> f64 {
        if self.k == 1.0 {
            0.0
        } else {
            self.a * self.k * (self.k - 1.0) * s.powf(self.k - 2.0)
        }
    }

    pub(crate) fn inverse(&self, v: f64) -> f64 {
        self.pow_inv.eval(v / self.a)
    }
}

/// Quintic Hermite interpolant on `[x0, x0 + h]`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Quintic {
    x0: f64,
    h: f64,
    c: [f64; 6],
}

impl Quintic {
    /// Match `(value, slope, curvature)` at both ends.
    fn new(x0: f64, x1: f64, start: (f64, f64, f64), end: (f64, f64, f64)) -> Self {
        let h = x1 - x0;
        let c0 = start.0;
        let c1 = h * start.1;
        let c2 = 0.5 * h * h * start.2;
        let y = end.0 - (c0 + c1 + c2);
        let d = h * end.1 - (c1 + 2.0 * c2);
        let s = h * h * end.2 - 2.0 * c2;
        let c3 = 10.0 * y - 4.0 * d + 0.5 * s;
        let c4 = -15.0 * y + 7.0 * d - s;
        let c5 = 6.0 * y - 3.0 * d + 0.5 * s;
        Quintic { x0, h, c: [c0, c1, c2, c3, c4, c5] }
    }

    fn x1(&self) -> f64 {
        self.x0 + self.h
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        let t = (x - self.x0) / self.h;
        let c = &self.c;
        c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))))
    }

    fn d1(&self, x: f64) -> f64 {
        let t = (x - self.x0) / self.h;
        let c = &self.c;
        (c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5])))) / self.h
    }

    fn d2(&self, x: f64) -> f64 {
        let t = (x - self.x0) / self.h;
        let c = &self.c;
        (2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5]))) / (self.h * self.h)
    }

    fn jet(&self, x: f64, order: usize) -> Jet {
        let t = Jet::variable(x, order).add_const(-self.x0).scale(1.0 / self.h);
        t.poly(&self.c)
    }

    fn inverse(&self, y: f64) -> f64 {
        invert_increasing(|x| self.eval(x), |x| self.d1(x), y, self.x0, self.x1(), INVERSE_TOL)
    }

    fn min_slope(&self, samples: usize) -> f64 {
        (0..=samples)
            .map(|i| self.d1(self.x0 + self.h * i as f64 / samples as f64))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Record of the perturbation a map was built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub ell1_tilde: f64,
    pub ell2_tilde: f64,
    /// Outer splice point near -1.
    pub x1: f64,
    /// Outer splice point near +1.
    pub x2: f64,
    pub b1_tilde: f64,
    pub b2_tilde: f64,
}

impl PerturbSpec {
    /// Inner splice point near -1, halfway from -1 to `x1`.
    pub fn x1_tilde(&self) -> f64 {
        0.5 * self.x1 - 0.5
    }

    /// Inner splice point near +1, halfway from `x2` to 1.
    pub fn x2_tilde(&self) -> f64 {
        0.5 * self.x2 + 0.5
    }
}

/// A full-branch map of [-1, 1] with branches on [-1, 0) and [0, 1].
#[derive(Clone, Debug)]
pub struct BranchMap {
    params: MapParams,
    left_fixed: FixedModel,
    right_fixed: FixedModel,
    left_zero: ZeroModel,
    right_zero: ZeroModel,
    left_glue: Quintic,
    right_glue: Quintic,
    w_minus: f64,
    w_plus: f64,
    iota: f64,
    img_minus: f64,
    img_plus: f64,
    zero_widths: (f64, f64),
    perturbation: Option<PerturbSpec>,
}

const GLUE_SAMPLES: usize = 4000;

impl BranchMap {
    /// Build the map without checking the expansion condition.
    pub fn build(params: MapParams) -> Result<Self> {
        params.validate()?;
        let left_fixed = FixedModel::from_params(params.ell1, params.b1, params.eta_coeff);
        let right_fixed = FixedModel::from_params(params.ell2, params.b2, params.eta_coeff);
        let left_zero = ZeroModel::new(params.a1, params.k1);
        let right_zero = ZeroModel::new(params.a2, params.k2);
        let (w_minus, w_plus, iota) = (params.width_minus(), params.width_plus(), params.iota);

        let left_glue = Quintic::new(
            -1.0 + w_minus,
            -iota,
            (-1.0 + left_fixed.phi(w_minus), left_fixed.dphi(w_minus), left_fixed.d2phi(w_minus)),
            (1.0 - left_zero.value(iota), left_zero.d1(iota), -left_zero.d2(iota)),
        );
        let right_glue = Quintic::new(
            iota,
            1.0 - w_plus,
            (-1.0 + right_zero.value(iota), right_zero.d1(iota), right_zero.d2(iota)),
            (1.0 - right_fixed.phi(w_plus), right_fixed.dphi(w_plus), -right_fixed.d2phi(w_plus)),
        );
        for (side, glue) in [("left", &left_glue), ("right", &right_glue)] {
            let min_slope = glue.min_slope(GLUE_SAMPLES);
            if !(min_slope > 0.0) {
                return Err(Error::GlueNotMonotone { side, min_slope });
            }
        }
        Ok(BranchMap {
            params,
            img_minus: left_fixed.phi(w_minus),
            img_plus: right_fixed.phi(w_plus),
            left_fixed,
            right_fixed,
            left_zero,
            right_zero,
            left_glue,
            right_glue,
            w_minus,
            w_plus,
            iota,
            zero_widths: (iota, iota),
            perturbation: None,
        })
    }

    /// Same map with the fixed-point models replaced. The glue and the
    /// behaviour near 0 are unchanged, so the replacements must agree with the
    /// originals to second order at the chart widths.
    pub(crate) fn with_fixed_models(
        &self,
        left: FixedModel,
        right: FixedModel,
        zero_widths: (f64, f64),
        record: PerturbSpec,
    ) -> Self {
        let mut g = self.clone();
        g.img_minus = left.phi(g.w_minus);
        g.img_plus = right.phi(g.w_plus);
        g.left_fixed = left;
        g.right_fixed = right;
        g.zero_widths = zero_widths;
        g.perturbation = Some(record);
        g
    }

    pub fn params(&self) -> &MapParams {
        &self.params
    }

    /// Parameters of the local forms this map actually satisfies; for a
    /// perturbed map the tangency exponents and slopes are the new ones.
    pub fn effective_params(&self) -> MapParams {
        let mut p = self.params;
        if let Some(spec) = &self.perturbation {
            p.ell1 = spec.ell1_tilde;
            p.ell2 = spec.ell2_tilde;
            p.b1 = spec.b1_tilde;
            p.b2 = spec.b2_tilde;
        }
        p
    }

    pub fn perturbation(&self) -> Option<&PerturbSpec> {
        self.perturbation.as_ref()
    }

    pub fn left_fixed(&self) -> &FixedModel {
        &self.left_fixed
    }

    pub fn right_fixed(&self) -> &FixedModel {
        &self.right_fixed
    }

    pub fn fixed_model(&self, side: Side) -> &FixedModel {
        match side {
            Side::Left => &self.left_fixed,
            Side::Right => &self.right_fixed,
        }
    }

    /// Chart widths `(w_minus, w_plus)` of the fixed-point neighbourhoods.
    pub fn chart_widths(&self) -> (f64, f64) {
        (self.w_minus, self.w_plus)
    }

    pub fn chart_width(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.w_minus,
            Side::Right => self.w_plus,
        }
    }

    pub fn iota(&self) -> f64 {
        self.iota
    }

    /// Widths `(left, right)` of the one-sided neighbourhoods of 0 on which
    /// the local forms are certified (smaller than `iota` after perturbation).
    pub fn zero_widths(&self) -> (f64, f64) {
        self.zero_widths
    }

    /// Place `x` in the chart that represents it precisely.
    #[inline]
    pub fn chart(&self, x: f64) -> Point {
        if x + 1.0 < self.w_minus {
            Point::Left(x + 1.0)
        } else if 1.0 - x < self.w_plus {
            Point::Right(1.0 - x)
        } else {
            Point::Mid(x)
        }
    }

    #[inline]
    fn from_minus(&self, v: f64) -> Point {
        if v < self.w_minus {
            Point::Left(v)
        } else {
            self.chart(v - 1.0)
        }
    }

    #[inline]
    fn from_plus(&self, v: f64) -> Point {
        if v < self.w_plus {
            Point::Right(v)
        } else {
            self.chart(1.0 - v)
        }
    }

    /// One application of the map. `Mid(0.0)` is sent along the right
    /// branch; callers that must detect the discontinuity check before.
    #[inline]
    pub fn step(&self, p: Point) -> Point {
        match p {
            Point::Left(u) => self.from_minus(self.left_fixed.phi(u)),
            Point::Right(u) => self.from_plus(self.right_fixed.phi(u)),
            Point::Mid(x) => {
                if x < 0.0 {
                    if x > -self.iota {
                        Point::Right(self.left_zero.value(-x))
                    } else {
                        self.chart(self.left_glue.eval(x))
                    }
                } else if x < self.iota {
                    Point::Left(self.right_zero.value(x))
                } else {
                    self.chart(self.right_glue.eval(x))
                }
            }
        }
    }

    /// Derivative of the map at a point.
    #[inline]
    pub fn deriv(&self, p: Point) -> f64 {
        match p {
            Point::Left(u) => self.left_fixed.dphi(u),
            Point::Right(u) => self.right_fixed.dphi(u),
            Point::Mid(x) => {
                if x < 0.0 {
                    if x > -self.iota {
                        self.left_zero.d1(-x)
                    } else {
                        self.left_glue.d1(x)
                    }
                } else if x < self.iota {
                    self.right_zero.d1(x)
                } else {
                    self.right_glue.d1(x)
                }
            }
        }
    }

    pub fn region(&self, x: f64) -> Region {
        if x < 0.0 {
            if x + 1.0 < self.w_minus {
                Region::LeftFixed
            } else if x > -self.iota {
                Region::LeftZero
            } else {
                Region::LeftGlue
            }
        } else if x < self.iota {
            Region::RightZero
        } else if 1.0 - x < self.w_plus {
            Region::RightFixed
        } else {
            Region::RightGlue
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.step(self.chart(x)).x()
    }

    pub fn eval_d1(&self, x: f64) -> f64 {
        self.deriv(self.chart(x))
    }

    pub fn eval_d2(&self, x: f64) -> f64 {
        match self.region(x) {
            Region::LeftFixed => self.left_fixed.d2phi(x + 1.0),
            Region::RightFixed => -self.right_fixed.d2phi(1.0 - x),
            Region::LeftZero => -self.left_zero.d2(-x),
            Region::RightZero => self.right_zero.d2(x),
            Region::LeftGlue => self.left_glue.d2(x),
            Region::RightGlue => self.right_glue.d2(x),
        }
    }

    /// Taylor jet of the map at `x` (orders beyond 2 are only meaningful
    /// away from the glue ends). Requires `x` off the points -1, 0, 1.
    pub fn jet(&self, x: f64, order: usize) -> Jet {
        match self.region(x) {
            Region::LeftFixed => self.left_fixed.jet(x + 1.0, order).add_const(-1.0),
            Region::RightFixed => {
                let u = (-Jet::variable(x, order)).add_const(1.0);
                (-self.right_fixed.jet_of(u)).add_const(1.0)
            }
            Region::LeftZero => {
                let s = -Jet::variable(x, order);
                (-s.powf(self.left_zero.k).scale(self.left_zero.a)).add_const(1.0)
            }
            Region::RightZero => {
                Jet::variable(x, order).powf(self.right_zero.k).scale(self.right_zero.a).add_const(-1.0)
            }
            Region::LeftGlue => self.left_glue.jet(x, order),
            Region::RightGlue => self.right_glue.jet(x, order),
        }
    }

    /// Preimage of `y` under the left branch.
    pub fn inv_left(&self, y: Point) -> Point {
        let dm = y.dist_minus();
        if dm < self.img_minus {
            return Point::Left(self.left_fixed.inverse(dm, self.w_minus));
        }
        let dp = y.dist_plus();
        if dp < self.left_zero.value(self.iota) {
            return Point::Mid(-self.left_zero.inverse(dp));
        }
        Point::Mid(self.left_glue.inverse(y.x()))
    }

    /// Preimage of `y` under the right branch.
    pub fn inv_right(&self, y: Point) -> Point {
        let dp = y.dist_plus();
        if dp < self.img_plus {
            return Point::Right(self.right_fixed.inverse(dp, self.w_plus));
        }
        let dm = y.dist_minus();
        if dm < self.right_zero.value(self.iota) {
            return Point::Mid(self.right_zero.inverse(dm));
        }
        Point::Mid(self.right_glue.inverse(y.x()))
    }

    pub fn inverse(&self, side: Side, y: Point) -> Point {
        match side {
            Side::Left => self.inv_left(y),
            Side::Right => self.inv_right(y),
        }
    }

    pub fn eval_inverse(&self, side: Side, y: f64) -> f64 {
        self.inverse(side, self.chart(y)).x()
    }
}

/// Build a map and check every axiom; the map is rejected when the
/// expansion condition fails.
pub fn make_map(params: MapParams) -> Result<BranchMap> {
    let map = BranchMap::build(params)?;
    let report = crate::axioms::verify_axioms(&map, crate::axioms::DEFAULT_GRID, 1e-12)?;
    if !report.a2_holds {
        return Err(Error::A2Violation { lambda: report.lambda_est });
    }
    if !report.monotone || !report.fixed_points_ok || !report.boundary_ok {
        return Err(Error::AxiomFailure(report.summary()));
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_params() -> MapParams {
        MapParams { ell1: 0.5, ell2: 1.5, k1: 1.0, k2: 1.0, a1: 2.0, a2: 2.0, b1: 1.0, b2: 1.0, iota: 0.1, eta_coeff: 0.1 }
    }

    #[test]
    fn power_fast_paths() {
        assert_eq!(Pow::new(2.0), Pow::Int(2));
        assert_eq!(Pow::new(2.5), Pow::Half(2));
        assert!(matches!(Pow::new(1.3), Pow::Gen(_)));
        for &u in &[1e-9, 0.03, 0.7] {
            assert!((Pow::new(2.5).eval(u) - u.powf(2.5)).abs() <= 1e-15 * u.powf(2.5));
            assert!((Pow::new(3.0).eval(u) - u.powf(3.0)).abs() <= 1e-15 * u.powf(3.0));
        }
    }

    #[test]
    fn endpoints_and_convention_at_zero() {
        let m = BranchMap::build(sample_params()).unwrap();
        assert_eq!(m.eval(-1.0), -1.0);
        assert_eq!(m.eval(1.0), 1.0);
        assert_eq!(m.eval(0.0), -1.0);
        assert!((m.eval(-1e-15) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn local_forms_hold_exactly_in_their_regions() {
        let p = sample_params();
        let m = BranchMap::build(p).unwrap();
        let cases = [
            (-0.95, Region::LeftFixed, -0.95 + p.b1 * (0.05f64).powf(1.5)),
            (-0.05, Region::LeftZero, 1.0 - p.a1 * 0.05),
            (0.05, Region::RightZero, -1.0 + p.a2 * 0.05),
            (0.95, Region::RightFixed, 0.95 - p.b2 * (0.05f64).powf(2.5)),
        ];
        for (x, region, expected) in cases {
            assert_eq!(m.region(x), region);
            assert!((m.eval(x) - expected).abs() < 1e-15, "{x}: {} vs {expected}", m.eval(x));
        }
    }

    #[test]
    fn glue_is_c2_at_the_joins() {
        let m = BranchMap::build(sample_params()).unwrap();
        let (wm, wp) = m.chart_widths();
        let iota = m.iota();
        for &x in &[-1.0 + wm, -iota, iota, 1.0 - wp] {
            let h = 1e-9;
            let (l, r) = (x - h, x + h);
            assert!((m.eval(l) - m.eval(r)).abs() < 1e-7);
            assert!((m.eval_d1(l) - m.eval_d1(r)).abs() < 1e-6, "slope jump at {x}");
            assert!((m.eval_d2(l) - m.eval_d2(r)).abs() < 1e-5, "curvature jump at {x}");
        }
    }

    #[test]
    fn inverses_round_trip() {
        let m = BranchMap::build(sample_params()).unwrap();
        for i in 1..400 {
            let y = -1.0 + 2.0 * i as f64 / 400.0;
            let xl = m.eval_inverse(Side::Left, y);
            let xr = m.eval_inverse(Side::Right, y);
            assert!(xl < 0.0 && xr >= 0.0);
            assert!((m.eval(xl) - y).abs() < 1e-12, "left {y}");
            assert!((m.eval(xr) - y).abs() < 1e-12, "right {y}");
        }
    }

    #[test]
    fn chart_inverse_keeps_relative_precision() {
        let m = BranchMap::build(sample_params()).unwrap();
        let u = 1e-30;
        let y = m.step(Point::Left(u));
        match m.inv_left(y) {
            Point::Left(v) => assert!(((v - u) / u).abs() < 1e-12),
            other => panic!("unexpected chart {other:?}"),
        }
    }

    #[test]
    fn jets_match_scalar_derivatives() {
        let m = BranchMap::build(sample_params()).unwrap();
        for &x in &[-0.97, -0.5, -0.05, 0.05, 0.5, 0.97] {
            let j = m.jet(x, 2);
            assert!((j.value() - m.eval(x)).abs() < 1e-14);
            assert!((j.derivative(1) - m.eval_d1(x)).abs() < 1e-12 * (1.0 + m.eval_d1(x).abs()));
            assert!((j.derivative(2) - m.eval_d2(x)).abs() < 1e-10 * (1.0 + m.eval_d2(x).abs()));
        }
    }

    #[test]
    fn hyperbolic_variant_slopes() {
        let p = MapParams { ell1: 0.0, ell2: 0.0, ..sample_params() };
        let m = BranchMap::build(p).unwrap();
        assert!((m.eval_d1(-1.0) - 2.0).abs() < 1e-15);
        assert!((m.eval_d1(1.0) - 2.0).abs() < 1e-15);
        assert!((m.eval_d1(-1e-12) - 2.0).abs() < 1e-15);
        assert!((m.eval_d1(1e-12) - 2.0).abs() < 1e-15);
    }
}
