//! Long orbits, occupation statistics and empirical measures.
//!
//! [`iterate`] drives an orbit in chart coordinates and hands every point to
//! an [`Observer`]. Observers are plain accumulators; tuples of observers
//! observe together so a single pass can fill several of them.

use serde::{Deserialize, Serialize};

use crate::branch::{BranchMap, Point, Side};
use crate::error::{Error, Result};
use crate::params::MapParams;

pub const DEFAULT_EPS: f64 = 0.05;
pub const DEFAULT_BINS: usize = 400;
pub const CHECKPOINT_RATIO: f64 = 1.15;

/// Receives the orbit points `x_0, x_1, ...` in order.
pub trait Observer {
    fn observe(&mut self, k: u64, p: Point);
}

impl Observer for () {
    #[inline(always)]
    fn observe(&mut self, _: u64, _: Point) {}
}

impl<O: Observer + ?Sized> Observer for &mut O {
    #[inline(always)]
    fn observe(&mut self, k: u64, p: Point) {
        (**self).observe(k, p)
    }
}

impl<A: Observer, B: Observer> Observer for (A, B) {
    #[inline(always)]
    fn observe(&mut self, k: u64, p: Point) {
        self.0.observe(k, p);
        self.1.observe(k, p);
    }
}

impl<A: Observer, B: Observer, C: Observer> Observer for (A, B, C) {
    #[inline(always)]
    fn observe(&mut self, k: u64, p: Point) {
        self.0.observe(k, p);
        self.1.observe(k, p);
        self.2.observe(k, p);
    }
}

impl Observer for [Box<dyn Observer + Send>] {
    fn observe(&mut self, k: u64, p: Point) {
        for o in self.iter_mut() {
            o.observe(k, p);
        }
    }
}

/// Records every point; meant for short orbits and tests.
#[derive(Clone, Debug, Default)]
pub struct Recorder {
    pub points: Vec<Point>,
}

impl Observer for Recorder {
    fn observe(&mut self, _: u64, p: Point) {
        self.points.push(p);
    }
}

/// Position of an orbit after some number of steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitState {
    pub point: Point,
    pub step: u64,
}

impl OrbitState {
    pub fn x(&self) -> f64 {
        self.point.x()
    }
}

/// Run `n` steps from `x0`. Observers see `x_0 .. x_{n-1}`; the returned
/// state holds `x_n`.
pub fn iterate<O: Observer + ?Sized>(map: &BranchMap, x0: f64, n: u64, obs: &mut O) -> Result<OrbitState> {
    if !(x0 > -1.0 && x0 < 1.0) || x0 == 0.0 {
        return Err(Error::InvalidInput(format!("initial point {x0} must lie in (-1, 1) \\ {{0}}")));
    }
    iterate_from(map, OrbitState { point: map.chart(x0), step: 0 }, n, obs)
}

/// Continue an orbit for `n` more steps.
pub fn iterate_from<O: Observer + ?Sized>(
    map: &BranchMap,
    start: OrbitState,
    n: u64,
    obs: &mut O,
) -> Result<OrbitState> {
    let mut p = start.point;
    let end = start.step + n;
    for k in start.step..end {
        match p {
            Point::Mid(x) if x == 0.0 => return Err(Error::HitDiscontinuity { step: k }),
            Point::Left(u) | Point::Right(u) if u <= 0.0 => return Err(Error::Underflow { step: k }),
            _ => {}
        }
        obs.observe(k, p);
        p = map.step(p);
    }
    Ok(OrbitState { point: p, step: end })
}

/// Geometric schedule `ceil(1.15^m)`, deduplicated, capped at `n_max`
/// and always ending with `n_max`.
pub fn geometric_checkpoints(n_max: u64) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    let mut v = 1.0f64;
    loop {
        let c = v.ceil() as u64;
        if c >= n_max {
            break;
        }
        if out.last() != Some(&c) {
            out.push(c);
        }
        v *= CHECKPOINT_RATIO;
    }
    if n_max > 0 {
        out.push(n_max);
    }
    out
}

/// Counts of visits to the `eps`-neighbourhoods of -1 and +1.
#[derive(Clone, Debug)]
pub struct OccupationCounter {
    eps: f64,
    checkpoints: Vec<u64>,
    next: usize,
    n: u64,
    s_minus: u64,
    s_plus: u64,
    rec_minus: Vec<u64>,
    rec_plus: Vec<u64>,
}

impl OccupationCounter {
    pub fn new(eps: f64, checkpoints: Vec<u64>) -> Self {
        let cap = checkpoints.len();
        OccupationCounter {
            eps,
            checkpoints,
            next: 0,
            n: 0,
            s_minus: 0,
            s_plus: 0,
            rec_minus: Vec::with_capacity(cap),
            rec_plus: Vec::with_capacity(cap),
        }
    }

    pub fn counts(&self) -> (u64, u64, u64) {
        (self.s_minus, self.s_plus, self.n - self.s_minus - self.s_plus)
    }

    pub fn into_series(self) -> OccupationSeries {
        let k = self.rec_minus.len();
        OccupationSeries {
            eps: self.eps,
            checkpoints: self.checkpoints[..k].to_vec(),
            s_minus: self.rec_minus,
            s_plus: self.rec_plus,
        }
    }
}

impl Observer for OccupationCounter {
    #[inline]
    fn observe(&mut self, _: u64, p: Point) {
        if p.dist_minus() < self.eps {
            self.s_minus += 1;
        } else if p.dist_plus() < self.eps {
            self.s_plus += 1;
        }
        self.n += 1;
        if self.next < self.checkpoints.len() && self.n == self.checkpoints[self.next] {
            self.rec_minus.push(self.s_minus);
            self.rec_plus.push(self.s_plus);
            self.next += 1;
        }
    }
}

/// Occupation counts recorded at checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationSeries {
    pub eps: f64,
    pub checkpoints: Vec<u64>,
    pub s_minus: Vec<u64>,
    pub s_plus: Vec<u64>,
}

impl OccupationSeries {
    pub fn len(&self) -> usize {
        self.checkpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkpoints.is_empty()
    }

    pub fn middle(&self, i: usize) -> u64 {
        self.checkpoints[i] - self.s_minus[i] - self.s_plus[i]
    }

    /// `(S-/n, S+/n, K/n)` at checkpoint `i`.
    pub fn fractions(&self, i: usize) -> (f64, f64, f64) {
        let n = self.checkpoints[i] as f64;
        (self.s_minus[i] as f64 / n, self.s_plus[i] as f64 / n, self.middle(i) as f64 / n)
    }

    pub fn plus_fractions(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.fractions(i).1).collect()
    }

    pub fn minus_fractions(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.fractions(i).0).collect()
    }
}

pub fn occupation_series(map: &BranchMap, x0: f64, eps: f64, checkpoints: &[u64]) -> Result<OccupationSeries> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!("eps {eps} must lie in (0, 1)")));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints.first() == Some(&0) {
        return Err(Error::InvalidInput("checkpoints must be positive and increasing".into()));
    }
    let n = checkpoints.last().copied().unwrap_or(0);
    let mut counter = OccupationCounter::new(eps, checkpoints.to_vec());
    iterate(map, x0, n, &mut counter)?;
    Ok(counter.into_series())
}

/// Histogram of orbit points on a uniform grid of [-1, 1].
#[derive(Clone, Debug)]
pub struct Histogram {
    counts: Vec<u64>,
    n: u64,
}

impl Histogram {
    pub fn new(bins: usize) -> Self {
        Histogram { counts: vec![0; bins.max(1)], n: 0 }
    }

    #[inline]
    fn bin_of(&self, p: Point) -> usize {
        let m = self.counts.len();
        let i = match p {
            Point::Left(u) => (u * 0.5 * m as f64) as usize,
            Point::Right(u) => m.saturating_sub(1 + (u * 0.5 * m as f64) as usize),
            Point::Mid(x) => ((x + 1.0) * 0.5 * m as f64) as usize,
        };
        i.min(m - 1)
    }

    pub fn into_measure(self) -> EmpiricalMeasure {
        let n = self.n;
        let masses = self.counts.iter().map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 }).collect();
        EmpiricalMeasure { n, masses }
    }
}

impl Observer for Histogram {
    #[inline]
    fn observe(&mut self, _: u64, p: Point) {
        let i = self.bin_of(p);
        self.counts[i] += 1;
        self.n += 1;
    }
}

/// Orbit histogram normalized to a probability vector over uniform bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub n: u64,
    pub masses: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn bins(&self) -> usize {
        self.masses.len()
    }

    pub fn bin_width(&self) -> f64 {
        2.0 / self.bins() as f64
    }

    pub fn edges(&self, i: usize) -> (f64, f64) {
        let h = self.bin_width();
        (-1.0 + h * i as f64, -1.0 + h * (i + 1) as f64)
    }

    pub fn l1_distance(&self, other: &EmpiricalMeasure) -> f64 {
        self.masses.iter().zip(&other.masses).map(|(a, b)| (a - b).abs()).sum()
    }
}

pub fn empirical_measure(map: &BranchMap, x0: f64, n: u64, bins: usize) -> Result<EmpiricalMeasure> {
    if bins < 2 {
        return Err(Error::InvalidInput("at least two bins are required".into()));
    }
    let mut h = Histogram::new(bins);
    iterate(map, x0, n, &mut h)?;
    Ok(h.into_measure())
}

/// Distance from a histogram measure to `p delta_{+1} + (1-p) delta_{-1}`.
///
/// On [-1, 1] the bounded-Lipschitz distance between probability measures
/// equals the Wasserstein-1 distance, i.e. the integral of the difference of
/// the distribution functions. Mass is taken uniform inside each bin, so the
/// integral is piecewise linear against a constant and is done exactly.
pub fn weak_star_distance_to_nu_p(m: &EmpiricalMeasure, p: f64) -> f64 {
    let target = 1.0 - p;
    let h = m.bin_width();
    let mut cdf = 0.0;
    let mut total = 0.0;
    for &mass in &m.masses {
        let d0 = cdf - target;
        cdf += mass;
        let d1 = cdf - target;
        total += if d0 * d1 >= 0.0 {
            h * 0.5 * (d0.abs() + d1.abs())
        } else {
            h * 0.5 * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
        };
    }
    total
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccumulationDiagnostics {
    pub limsup_est: f64,
    pub liminf_est: f64,
    pub band_crossings: usize,
    pub visited_levels: f64,
}

pub const MIN_CHECKPOINTS: usize = 10;
const LOW_BAND: f64 = 0.3;
const HIGH_BAND: f64 = 0.7;
const LEVELS: usize = 20;

/// Oscillation summary of `S+/n`: extremes and band crossings over the
/// last half of the checkpoints, level coverage over all of them.
pub fn accumulation_diagnostics(series: &OccupationSeries) -> Result<AccumulationDiagnostics> {
    if series.len() < MIN_CHECKPOINTS {
        return Err(Error::TooFewCheckpoints { needed: MIN_CHECKPOINTS, got: series.len() });
    }
    let values = series.plus_fractions();
    let tail = &values[values.len() / 2..];
    let limsup_est = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let liminf_est = tail.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(AccumulationDiagnostics {
        limsup_est,
        liminf_est,
        band_crossings: band_crossings(tail),
        visited_levels: visited_levels(&values),
    })
}

/// Number of moves between the low band `[0, 0.3]` and the high band
/// `[0.7, 1]`; values in between do not reset the current band.
pub fn band_crossings(values: &[f64]) -> usize {
    let mut band: Option<bool> = None;
    let mut crossings = 0;
    for &v in values {
        let now = if v <= LOW_BAND {
            Some(false)
        } else if v >= HIGH_BAND {
            Some(true)
        } else {
            None
        };
        if let Some(high) = now {
            if band.is_some_and(|b| b != high) {
                crossings += 1;
            }
            band = Some(high);
        }
    }
    crossings
}

fn visited_levels(values: &[f64]) -> f64 {
    let mut hit = [false; LEVELS];
    for &v in values {
        let i = ((v * LEVELS as f64) as usize).min(LEVELS - 1);
        hit[i] = true;
    }
    hit.iter().filter(|&&h| h).count() as f64 / LEVELS as f64
}

/// Steps of the fixed-point model needed to carry `u0` past the chart width.
pub fn escape_time(map: &BranchMap, side: Side, u0: f64) -> Result<u64> {
    let w = map.chart_width(side);
    if !(u0 > 0.0 && u0 < w) {
        return Err(Error::InvalidInput(format!("u0 {u0} must lie in (0, {w})")));
    }
    let model = map.fixed_model(side);
    let mut u = u0;
    let mut n = 0u64;
    while u < w {
        u = model.phi(u);
        n += 1;
    }
    Ok(n)
}

/// Continuum approximation of [`escape_time`] for the unperturbed local form.
pub fn escape_time_estimate(params: &MapParams, side: Side, u0: f64) -> f64 {
    let (ell, b, w) = match side {
        Side::Left => (params.ell1, params.b1, params.width_minus()),
        Side::Right => (params.ell2, params.b2, params.width_plus()),
    };
    if ell == 0.0 {
        (w / u0).ln() / (1.0 + b).ln()
    } else {
        (u0.powf(-ell) - w.powf(-ell)) / (b * ell)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_f() -> BranchMap {
        BranchMap::build(MapParams {
            ell1: 0.5,
            ell2: 0.5,
            k1: 1.0,
            k2: 1.0,
            a1: 2.0,
            a2: 2.0,
            b1: 1.0,
            b2: 1.0,
            iota: 0.1,
            eta_coeff: 0.1,
        })
        .unwrap()
    }

    #[test]
    fn checkpoints_are_geometric_and_capped() {
        let c = geometric_checkpoints(1000);
        assert_eq!(c[0], 1);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*c.last().unwrap(), 1000);
        assert!(c.len() > 40 && c.len() < 60);
    }

    #[test]
    fn first_iterate_is_eval() {
        let m = map_f();
        let mut rec = Recorder::default();
        let s = iterate(&m, 0.3, 1, &mut rec).unwrap();
        assert_eq!(rec.points, vec![Point::Mid(0.3)]);
        assert_eq!(s.x(), m.eval(0.3));
    }

    #[test]
    fn rejects_bad_initial_points() {
        let m = map_f();
        assert!(iterate(&m, 0.0, 5, &mut ()).is_err());
        assert!(iterate(&m, -1.0, 5, &mut ()).is_err());
    }

    #[test]
    fn period_two_orbit_repeats() {
        let m = map_f();
        // A point of the left base cell whose image lands in the right base
        // cell and comes straight back: a root of g(g(x)) - x.
        let p0 = m.eval_inverse(Side::Left, 0.0);
        let q0 = m.eval_inverse(Side::Right, 0.0);
        let hi = m.eval_inverse(Side::Left, q0);
        let f = |x: f64| m.eval(m.eval(x)) - x;
        assert!(f(p0) < 0.0 && f(hi) > 0.0);
        let (mut lo, mut up) = (p0, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + up);
            if f(mid) < 0.0 {
                lo = mid
            } else {
                up = mid
            }
        }
        let x = 0.5 * (lo + up);
        let mut rec = Recorder::default();
        iterate(&m, x, 6, &mut rec).unwrap();
        for k in 2..6 {
            assert!((rec.points[k].x() - rec.points[k - 2].x()).abs() < 1e-9);
        }
    }

    #[test]
    fn charts_agree_with_naive_iteration() {
        // The map is expanding, so two exact-arithmetic-equivalent orbits
        // separate after a few dozen steps; the comparison is step by step.
        let m = map_f();
        let mut rec = Recorder::default();
        iterate(&m, 0.123456, 1001, &mut rec).unwrap();
        let mut compared = 0;
        for w in rec.points.windows(2) {
            let (x, next) = (w[0].x(), w[1].x());
            if w[0].dist_minus() < 1e-6 || w[0].dist_plus() < 1e-6 || next.abs() > 1.0 - 1e-6 {
                continue;
            }
            let naive = m.eval(x);
            assert!((naive - next).abs() <= 1e-9 * next.abs().max(1e-6), "{x}: {naive} vs {next}");
            compared += 1;
        }
        assert!(compared > 500);
    }

    #[test]
    fn occupation_counts_partition_time() {
        let m = map_f();
        let cps = geometric_checkpoints(100_000);
        let s = occupation_series(&m, 0.37, 0.05, &cps).unwrap();
        for i in 0..s.len() {
            assert_eq!(s.s_minus[i] + s.s_plus[i] + s.middle(i), s.checkpoints[i]);
            let (a, b, c) = s.fractions(i);
            assert!((a + b + c - 1.0).abs() < 1e-15);
            if i > 0 {
                let gap = s.checkpoints[i] - s.checkpoints[i - 1];
                assert!(s.s_minus[i] >= s.s_minus[i - 1] && s.s_minus[i] - s.s_minus[i - 1] <= gap);
                assert!(s.s_plus[i] >= s.s_plus[i - 1] && s.s_plus[i] - s.s_plus[i - 1] <= gap);
            }
        }
    }

    #[test]
    fn one_step_change_of_fraction_is_bounded() {
        let m = map_f();
        let cps: Vec<u64> = (1..=5000).collect();
        let s = occupation_series(&m, -0.61, 0.05, &cps).unwrap();
        let f = s.plus_fractions();
        for n in 1..f.len() {
            assert!((f[n] - f[n - 1]).abs() <= 1.0 / n as f64 + 1e-15);
        }
    }

    #[test]
    fn single_point_histogram() {
        let m = map_f();
        let e = empirical_measure(&m, 0.3, 1, 400).unwrap();
        let i = ((0.3 + 1.0) / 2.0 * 400.0) as usize;
        assert_eq!(e.masses[i], 1.0);
        assert_eq!(e.masses.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn distance_to_two_point_measures() {
        let bins = 400;
        let h = 2.0 / bins as f64;
        let mut masses = vec![0.0; bins];
        masses[bins - 1] = 1.0;
        let m = EmpiricalMeasure { n: 1, masses };
        assert!(weak_star_distance_to_nu_p(&m, 1.0) <= h / 2.0 + 1e-15);
        assert!((weak_star_distance_to_nu_p(&m, 0.0) - (2.0 - h / 2.0)).abs() < 1e-12);
        let mut masses = vec![0.0; bins];
        masses[0] = 0.3;
        masses[bins - 1] = 0.7;
        let m = EmpiricalMeasure { n: 10, masses };
        assert!(weak_star_distance_to_nu_p(&m, 0.7) <= h / 2.0 + 1e-15);
    }

    #[test]
    fn diagnostics_on_constant_series() {
        let n = 30;
        let s = OccupationSeries {
            eps: 0.05,
            checkpoints: (1..=n).map(|i| 2 * i).collect(),
            s_minus: vec![0; n as usize],
            s_plus: (1..=n).collect(),
        };
        let d = accumulation_diagnostics(&s).unwrap();
        assert_eq!(d.limsup_est, 0.5);
        assert_eq!(d.liminf_est, 0.5);
        assert_eq!(d.band_crossings, 0);
        let short = OccupationSeries { checkpoints: vec![1, 2], s_minus: vec![0, 0], s_plus: vec![0, 0], eps: 0.05 };
        assert!(matches!(accumulation_diagnostics(&short), Err(Error::TooFewCheckpoints { .. })));
    }

    #[test]
    fn band_crossing_counts_alternations() {
        assert_eq!(band_crossings(&[0.1, 0.5, 0.8, 0.5, 0.2, 0.9]), 3);
        assert_eq!(band_crossings(&[0.5, 0.6, 0.4]), 0);
    }

    #[test]
    fn escape_time_matches_estimate() {
        // Left chart of width a2 * iota^k2 = 0.1.
        let p = MapParams { ell1: 1.0, b1: 1.0, k2: 2.0, a2: 10.0, iota: 0.1, ..*map_f().params() };
        let m = BranchMap::build(p).unwrap();
        let est = escape_time_estimate(&p, Side::Left, 1e-4);
        assert!((est - 9990.0).abs() < 1e-6);
        let n = escape_time(&m, Side::Left, 1e-4).unwrap() as f64;
        assert!((n - est).abs() / est < 0.05);
        assert!(escape_time(&m, Side::Left, 1e-5).unwrap() > escape_time(&m, Side::Left, 1e-4).unwrap());
        let ph = MapParams { ell1: 0.0, ..p };
        assert!((escape_time_estimate(&ph, Side::Left, ph.width_minus() / 2.0) - 1.0).abs() < 1e-12);
    }
}
