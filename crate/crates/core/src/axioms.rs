//! Numerical verification of the defining axioms of a map.
//!
//! Monotonicity and the absence of interior fixed points are checked on
//! sampled grids, with log-spaced grids in the charts so the behaviour near
//! -1, 0 and +1 is resolved. The expansion condition is checked on the
//! pieces of the base cells that reach the certified neighbourhoods of 0:
//! for each such piece the derivative of the first-return iterate is
//! sampled and the minimum over all pieces is the reported `lambda_est`.

use serde::{Deserialize, Serialize};

use crate::branch::{BranchMap, Point};
use crate::chains::ChainIter;
use crate::error::Result;

pub const DEFAULT_GRID: usize = 2000;

/// How the expansion condition is sampled.
#[derive(Clone, Copy, Debug)]
pub struct A2Options {
    /// Every piece with index up to this is checked.
    pub dense_up_to: usize,
    /// Beyond `dense_up_to`, indices grow geometrically by this ratio.
    pub sparse_ratio: f64,
    /// Interior samples per piece (both ends are always added).
    pub samples_per_cell: usize,
    /// Stop looking for the containment index after this many levels.
    pub max_depth: usize,
}

impl Default for A2Options {
    fn default() -> Self {
        A2Options { dense_up_to: 256, sparse_ratio: 1.1, samples_per_cell: 64, max_depth: 200_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub monotone: bool,
    pub min_slope: f64,
    pub fixed_points_ok: bool,
    pub boundary_ok: bool,
    pub n_minus: usize,
    pub n_plus: usize,
    /// Minimum sampled derivative over the checked pieces; infinite when
    /// there is nothing to check.
    pub lambda_est: f64,
    pub a2_holds: bool,
    pub cells_checked: usize,
    /// The containment index was not reached within `max_depth`; `n_minus`
    /// and `n_plus` are then lower bounds.
    pub truncated: bool,
}

impl AxiomReport {
    pub fn all_ok(&self) -> bool {
        self.monotone && self.fixed_points_ok && self.boundary_ok && self.a2_holds
    }

    pub fn summary(&self) -> String {
        format!(
            "monotone={} (min slope {:.3e}), fixed_points_ok={}, boundary_ok={}, n-={}, n+={}, lambda={:.4}, a2={}{}",
            self.monotone,
            self.min_slope,
            self.fixed_points_ok,
            self.boundary_ok,
            self.n_minus,
            self.n_plus,
            self.lambda_est,
            self.a2_holds,
            if self.truncated { " (truncated)" } else { "" }
        )
    }
}

pub fn verify_axioms(map: &BranchMap, grid_size: usize, tol: f64) -> Result<AxiomReport> {
    verify_axioms_with(map, grid_size, tol, A2Options::default())
}

fn log_grid(hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let lo = hi * 1e-12;
    let r = (hi / lo).ln();
    (0..n).map(move |i| lo * (r * i as f64 / (n - 1).max(1) as f64).exp())
}

fn lin_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |i| lo + (hi - lo) * i as f64 / n as f64)
}

pub fn verify_axioms_with(map: &BranchMap, grid_size: usize, tol: f64, opts: A2Options) -> Result<AxiomReport> {
    let grid_size = grid_size.max(16);
    let (wm, wp) = map.chart_widths();
    let iota = map.iota();

    let mut min_slope = f64::INFINITY;
    let mut increasing = true;
    let mut fixed_ok = true;

    // Chart pieces near the fixed points.
    for (model, w) in [(map.left_fixed(), wm), (map.right_fixed(), wp)] {
        let mut prev = 0.0;
        for u in log_grid(w, grid_size) {
            let v = model.phi(u);
            min_slope = min_slope.min(model.dphi(u));
            increasing &= v > prev;
            prev = v;
            // Away from the fixed point the map pushes points outwards. Where
            // the displacement is below rounding only `v >= u` is testable.
            let resolvable = model.dphi(u) - 1.0 > 1e-12;
            fixed_ok &= if resolvable { v > u } else { v >= u };
        }
    }
    // Everything in the middle, sampled in x.
    let segments = [(-1.0 + wm, -iota), (-iota, 0.0), (0.0, iota), (iota, 1.0 - wp)];
    for (si, &(lo, hi)) in segments.iter().enumerate() {
        let mut prev = f64::NEG_INFINITY;
        for x in lin_grid(lo, hi, grid_size) {
            let x = if si == 1 && x == 0.0 { -f64::MIN_POSITIVE } else { x };
            let p = Point::Mid(x);
            let y = map.step(p).x();
            let d = map.deriv(p);
            if x != 0.0 && x.abs() > f64::MIN_POSITIVE {
                min_slope = min_slope.min(d);
            }
            increasing &= y >= prev;
            prev = y;
            if x < 0.0 {
                fixed_ok &= y > x;
            } else {
                fixed_ok &= y < x || x == 0.0 && y == -1.0;
            }
        }
    }
    for (s_hi, left) in [(iota, true), (iota, false)] {
        for s in log_grid(s_hi, grid_size) {
            let x = if left { -s } else { s };
            min_slope = min_slope.min(map.deriv(Point::Mid(x)));
        }
    }
    let monotone = increasing && min_slope > 0.0;

    let boundary_ok = (map.eval(-1.0) + 1.0).abs() <= tol
        && (map.eval(1.0) - 1.0).abs() <= tol
        && (map.step(Point::Mid(-f64::MIN_POSITIVE)).x() - 1.0).abs() <= tol
        && (map.eval(0.0) + 1.0).abs() <= tol;

    let a2 = check_expansion(map, opts);
    Ok(AxiomReport {
        monotone,
        min_slope,
        fixed_points_ok: fixed_ok,
        boundary_ok,
        n_minus: a2.n_minus,
        n_plus: a2.n_plus,
        lambda_est: a2.lambda,
        a2_holds: a2.lambda > 1.0,
        cells_checked: a2.cells,
        truncated: a2.truncated,
    })
}

struct A2Result {
    n_minus: usize,
    n_plus: usize,
    lambda: f64,
    cells: usize,
    truncated: bool,
}

/// Minimum of `(g^n)'` over sampled points of the piece `[a, b]`.
fn min_iterate_derivative(map: &BranchMap, a: Point, b: Point, n: usize, samples: usize) -> f64 {
    let (xa, xb) = (a.x(), b.x());
    let mut best = f64::INFINITY;
    for i in 0..=samples + 1 {
        let mut p = if i == 0 {
            a
        } else if i == samples + 1 {
            b
        } else {
            map.chart(xa + (xb - xa) * i as f64 / (samples + 1) as f64)
        };
        let mut d = 1.0;
        for _ in 0..n {
            d *= map.deriv(p);
            p = map.step(p);
        }
        best = best.min(d);
    }
    best
}

fn check_expansion(map: &BranchMap, opts: A2Options) -> A2Result {
    let (zl, zr) = map.zero_widths();
    let mut it = ChainIter::new(map);
    let first = it.next_level();
    let mut n_minus = if first.p.x() >= -zl { Some(0) } else { None };
    let mut n_plus = if first.q.x() <= zr { Some(0) } else { None };

    // Previous boundary points: pieces are bounded by consecutive levels.
    let mut em_prev = first.e_minus;
    let mut ep_prev = first.e_plus;
    let mut lambda = f64::INFINITY;
    let mut cells = 0usize;
    let mut next_sparse = opts.dense_up_to as f64;
    let mut n = 0usize;
    while n_minus.is_none() || n_plus.is_none() {
        n += 1;
        if n > opts.max_depth {
            break;
        }
        let lvl = it.next_level();
        let sampled = if n <= opts.dense_up_to {
            true
        } else if n as f64 >= next_sparse {
            next_sparse *= opts.sparse_ratio;
            true
        } else {
            false
        };
        if n_minus.is_none() {
            let (a, b) = (em_prev, lvl.e_minus);
            let inside = a.x() >= -zl;
            if sampled || inside {
                lambda = lambda.min(min_iterate_derivative(map, a, b, n, opts.samples_per_cell));
                cells += 1;
            }
            if inside {
                n_minus = Some(n);
            }
        }
        if n_plus.is_none() {
            let (a, b) = (lvl.e_plus, ep_prev);
            let inside = b.x() <= zr;
            if sampled || inside {
                lambda = lambda.min(min_iterate_derivative(map, a, b, n, opts.samples_per_cell));
                cells += 1;
            }
            if inside {
                n_plus = Some(n);
            }
        }
        em_prev = lvl.e_minus;
        ep_prev = lvl.e_plus;
    }
    let truncated = n_minus.is_none() || n_plus.is_none();
    A2Result {
        n_minus: n_minus.unwrap_or(opts.max_depth),
        n_plus: n_plus.unwrap_or(opts.max_depth),
        lambda,
        cells,
        truncated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::MapParams;

    fn base() -> MapParams {
        MapParams { ell1: 0.5, ell2: 0.5, k1: 1.0, k2: 1.0, a1: 2.0, a2: 2.0, b1: 1.0, b2: 1.0, iota: 0.1, eta_coeff: 0.1 }
    }

    #[test]
    fn reference_map_satisfies_axioms() {
        let m = BranchMap::build(base()).unwrap();
        let r = verify_axioms(&m, DEFAULT_GRID, 1e-12).unwrap();
        assert!(r.all_ok(), "{}", r.summary());
        assert!(!r.truncated);
    }

    #[test]
    fn flat_glue_breaks_expansion() {
        // Strongly repelling fixed points push the glue's start up, so the
        // glue must be flatter than one somewhere on the base cell.
        let p = MapParams { ell1: 0.0, ell2: 0.0, a1: 1.5, a2: 1.5, b1: 2.0, b2: 2.0, iota: 0.2, ..base() };
        let m = BranchMap::build(p).unwrap();
        let r = verify_axioms(&m, DEFAULT_GRID, 1e-12).unwrap();
        assert!(r.monotone && !r.a2_holds, "{}", r.summary());
        assert!(r.lambda_est < 1.0);
        assert!(matches!(crate::make_map(p), Err(crate::Error::A2Violation { .. })));
    }

    #[test]
    fn displacement_below_rounding_is_not_a_fixed_point_failure() {
        // Near u = 1e-13 the step u^2.5 vanishes against u in double precision.
        for ell in [1.5, 2.0, 3.0] {
            let m = BranchMap::build(MapParams { ell1: ell, ell2: ell, ..base() }).unwrap();
            let r = verify_axioms(&m, DEFAULT_GRID, 1e-12).unwrap();
            assert!(r.fixed_points_ok, "ell={ell}: {}", r.summary());
        }
    }
}
