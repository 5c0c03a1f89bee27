//! First-return map to the left base cell and its invariant densities.
//!
//! The base cell is `D0 = (p0, 0)` with `p0` the left preimage of 0. A point
//! of the cell labelled `(i, j)` spends `i` iterates on the right half and
//! then `j` iterates on the left half, the last of which is back in `D0`.
//! Every cell is an interval mapped onto `D0` by `g^(i+j)`, and its inverse
//! is the composition of inverse branches
//!
//! `g_-^{-1} o (g_+^{-1})^(i-1) o g_+^{-1} o (g_-^{-1})^(j-1)`,
//!
//! which is how both the cell boundaries and the Ulam matrix are computed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::branch::{BranchMap, Point};
use crate::chains::Chains;
use crate::error::{Error, Result};
use crate::ulam::{UlamDensity, UlamMatrix};

pub const DEFAULT_DEPTH: usize = 60;
/// Iterates closer than this to 0 or to `p0` count as boundary hits.
pub const BOUNDARY_TOL: f64 = 1e-14;

/// Preimages of `y` under every cell inverse with `i + j <= depth`;
/// `out[i - 1][j - 1]` belongs to the cell `(i, j)`.
fn cell_preimages(map: &BranchMap, y: Point, depth: usize) -> Vec<Vec<Point>> {
    let mut out: Vec<Vec<Point>> = (1..depth).map(|i| Vec::with_capacity(depth - i)).collect();
    let mut z = y;
    for j in 1..depth {
        if j > 1 {
            z = map.inv_left(z);
        }
        let mut w = map.inv_right(z);
        for i in 1..=depth - j {
            if i > 1 {
                w = map.inv_right(w);
            }
            out[i - 1].push(map.inv_left(w));
        }
    }
    out
}

/// One boundary record of the partition, for export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub kind: String,
    pub index_i: usize,
    pub index_j: usize,
    pub left: f64,
    pub right: f64,
}

/// Boundaries of the level sets of the first-return data, up to a depth.
#[derive(Clone, Debug)]
pub struct PartitionTable {
    depth: usize,
    chains: Chains,
    /// `cells[i - 1][j - 1]` is `(left, right)` of the cell `(i, j)`.
    cells: Vec<Vec<(Point, Point)>>,
    n_minus: Option<usize>,
    n_plus: Option<usize>,
}

pub fn compute_partition(map: &BranchMap, depth: usize) -> Result<PartitionTable> {
    if depth < 2 {
        return Err(Error::InvalidInput(format!("partition depth must be at least 2, got {depth}")));
    }
    let chains = Chains::new(map, depth);
    let p0 = chains.p[0];
    let lefts = cell_preimages(map, p0, depth);
    let rights = cell_preimages(map, Point::Mid(0.0), depth);
    let cells = lefts.into_iter().zip(rights).map(|(l, r)| l.into_iter().zip(r).collect()).collect();

    let (zl, zr) = map.zero_widths();
    let n_minus = if p0.x() >= -zl { Some(0) } else { (1..=depth).find(|&n| chains.e_minus[n - 1].x() >= -zl) };
    let n_plus = if chains.q[0].x() <= zr { Some(0) } else { (1..=depth).find(|&n| chains.e_plus[n - 1].x() <= zr) };
    Ok(PartitionTable { depth, chains, cells, n_minus, n_plus })
}

impl PartitionTable {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn chains(&self) -> &Chains {
        &self.chains
    }

    /// Left end of the base cell; the right end is 0.
    pub fn base_left(&self) -> Point {
        self.chains.p[0]
    }

    pub fn base_len(&self) -> f64 {
        -self.chains.p[0].x()
    }

    /// `(left, right)` of the n-th left level set; `n = 0` is the base cell.
    pub fn big_minus(&self, n: usize) -> (Point, Point) {
        let right = if n == 0 { Point::Mid(0.0) } else { self.chains.p[n - 1] };
        (self.chains.p[n], right)
    }

    /// `(left, right)` of the n-th right level set.
    pub fn big_plus(&self, n: usize) -> (Point, Point) {
        let left = if n == 0 { Point::Mid(0.0) } else { self.chains.q[n - 1] };
        (left, self.chains.q[n])
    }

    /// Piece of the left base cell that enters the right half for `n` steps.
    pub fn small_minus(&self, n: usize) -> (Point, Point) {
        self.chains.delta_minus(n)
    }

    pub fn small_plus(&self, n: usize) -> (Point, Point) {
        self.chains.delta_plus(n)
    }

    /// Cell `(i, j)` when `i + j <= depth`.
    pub fn cell(&self, i: usize, j: usize) -> Option<(Point, Point)> {
        if i == 0 || j == 0 || i + j > self.depth {
            return None;
        }
        Some(self.cells[i - 1][j - 1])
    }

    /// Indices `(i, j)` of the cell containing `x`, if it is tabulated.
    pub fn locate(&self, x: f64) -> Option<(usize, usize)> {
        for i in 1..self.depth {
            let (l, r) = self.small_minus(i);
            if x > l.x() && x < r.x() {
                return (1..=self.depth - i).find(|&j| {
                    let (a, b) = self.cells[i - 1][j - 1];
                    x > a.x() && x < b.x()
                })
                .map(|j| (i, j));
            }
        }
        None
    }

    /// Fraction of the base cell covered by tabulated cells.
    pub fn coverage(&self) -> f64 {
        let total: f64 = self.cells.iter().flatten().map(|&(a, b)| Point::gap(a, b)).sum();
        total / self.base_len()
    }

    /// First index whose right piece lies in the certified neighbourhood of
    /// 0, or `None` beyond the table depth.
    pub fn n_minus(&self) -> Option<usize> {
        self.n_minus
    }

    pub fn n_plus(&self) -> Option<usize> {
        self.n_plus
    }

    pub fn rows(&self) -> Vec<BoundaryRow> {
        let row = |kind: &str, i, j, (a, b): (Point, Point)| BoundaryRow {
            kind: kind.to_string(),
            index_i: i,
            index_j: j,
            left: a.x(),
            right: b.x(),
        };
        let mut out = Vec::new();
        for n in 0..=self.depth {
            out.push(row("Delta_minus", n, 0, self.big_minus(n)));
        }
        for n in 0..=self.depth {
            out.push(row("Delta_plus", n, 0, self.big_plus(n)));
        }
        for n in 1..=self.depth {
            out.push(row("delta_minus", n, 0, self.small_minus(n)));
        }
        for n in 1..=self.depth {
            out.push(row("delta_plus", n, 0, self.small_plus(n)));
        }
        for i in 1..self.depth {
            for j in 1..=self.depth - i {
                out.push(row("delta_ij", i, j, self.cells[i - 1][j - 1]));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnRecord {
    /// Iterates spent in the right half.
    pub i: u64,
    /// Iterates spent in the left half, the landing one included.
    pub j: u64,
    pub tau: u64,
    #[serde(skip)]
    pub landing: Option<Point>,
}

/// Result of a first return with caps on both phases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReturnOutcome {
    Complete(ReturnRecord),
    /// Still in the right half after `i` iterates.
    CensoredPlus { i: u64 },
    /// Returned to the left half after `i` iterates but not to the base
    /// within `j` more.
    CensoredMinus { i: u64, j: u64 },
}

fn in_base(p: Point, left: Point) -> bool {
    p.x() < 0.0 && Point::gap(left, p) > 0.0
}

fn check_point(p: Point, left: Point, step: u64) -> Result<()> {
    match p {
        Point::Mid(x) if x.abs() < BOUNDARY_TOL || (x - left.x()).abs() < BOUNDARY_TOL => {
            Err(Error::BoundaryHit { step })
        }
        Point::Left(u) | Point::Right(u) if u <= 0.0 => Err(Error::Underflow { step }),
        _ => Ok(()),
    }
}

fn in_plus(p: Point) -> bool {
    match p {
        Point::Left(_) => false,
        Point::Mid(x) => x > 0.0,
        Point::Right(_) => true,
    }
}

/// Follow `p` from the base cell until it returns, giving up after
/// `cap_plus` iterates on the right or `cap_minus` on the left.
pub fn first_return_capped(
    map: &BranchMap,
    base_left: Point,
    p: Point,
    cap_plus: u64,
    cap_minus: u64,
) -> Result<ReturnOutcome> {
    if !in_base(p, base_left) {
        return Err(Error::OutsideBase { x: p.x(), lo: base_left.x() });
    }
    check_point(p, base_left, 0)?;
    let mut q = map.step(p);
    let mut step = 1u64;
    let mut i = 0u64;
    loop {
        check_point(q, base_left, step)?;
        if !in_plus(q) {
            break;
        }
        i += 1;
        if i >= cap_plus {
            return Ok(ReturnOutcome::CensoredPlus { i });
        }
        q = map.step(q);
        step += 1;
    }
    let mut j = 1u64;
    while !in_base(q, base_left) {
        if j >= cap_minus {
            return Ok(ReturnOutcome::CensoredMinus { i, j });
        }
        q = map.step(q);
        step += 1;
        check_point(q, base_left, step)?;
        j += 1;
    }
    Ok(ReturnOutcome::Complete(ReturnRecord { i, j, tau: i + j, landing: Some(q) }))
}

pub fn first_return(map: &BranchMap, base_left: Point, p: Point) -> Result<ReturnRecord> {
    match first_return_capped(map, base_left, p, u64::MAX, u64::MAX)? {
        ReturnOutcome::Complete(r) => Ok(r),
        _ => unreachable!("uncapped return cannot be censored"),
    }
}

/// Left end of the base cell of `map`.
pub fn base_left(map: &BranchMap) -> Point {
    map.inv_left(Point::Mid(0.0))
}

/// Cumulative return data along an orbit of the first-return map.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InducedOrbitStats {
    pub tau_minus: Vec<u64>,
    pub tau_plus: Vec<u64>,
    pub tau: Vec<u64>,
}

impl InducedOrbitStats {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// `tau_k / k` for `k = 1..=K`.
    pub fn tau_over_k(&self) -> Vec<f64> {
        self.tau.iter().enumerate().map(|(k, &t)| t as f64 / (k + 1) as f64).collect()
    }
}

pub fn induced_orbit(map: &BranchMap, x0: f64, k: usize) -> Result<InducedOrbitStats> {
    let left = base_left(map);
    let mut p = map.chart(x0);
    let mut s = InducedOrbitStats {
        tau_minus: Vec::with_capacity(k),
        tau_plus: Vec::with_capacity(k),
        tau: Vec::with_capacity(k),
    };
    let (mut cm, mut cp) = (0u64, 0u64);
    for _ in 0..k {
        let r = first_return(map, left, p)?;
        cm += r.j;
        cp += r.i;
        s.tau_minus.push(cm);
        s.tau_plus.push(cp);
        s.tau.push(cm + cp);
        p = r.landing.expect("complete returns carry their landing point");
    }
    Ok(s)
}

/// Per-k fractions `(tau_k^- / tau_k, tau_k^+ / tau_k)`.
pub fn ratio_series(stats: &InducedOrbitStats) -> Vec<(f64, f64)> {
    stats
        .tau
        .iter()
        .zip(&stats.tau_minus)
        .map(|(&t, &m)| {
            let r = m as f64 / t as f64;
            (r, 1.0 - r)
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct UlamOptions {
    pub bins: usize,
    pub relaxation: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Minimum fraction of the base cell the table must cover.
    pub min_coverage: f64,
}

impl Default for UlamOptions {
    fn default() -> Self {
        UlamOptions { bins: 200, relaxation: 0.5, max_iter: 100_000, tol: 1e-6, min_coverage: 0.999 }
    }
}

/// Ulam matrix of the first-return map on the tabulated cells.
pub fn ulam_matrix(map: &BranchMap, table: &PartitionTable, bins: usize) -> Result<UlamMatrix> {
    let lo = table.base_left().x();
    let depth = table.depth();
    let edges: Vec<Point> = (0..=bins)
        .map(|b| if b == 0 { table.base_left() } else { Point::Mid(lo * (1.0 - b as f64 / bins as f64)) })
        .collect();
    let pre: Vec<Vec<Vec<Point>>> = edges.par_iter().map(|&y| cell_preimages(map, y, depth)).collect();
    let mut branches = Vec::new();
    for i in 1..depth {
        for j in 1..=depth - i {
            branches.push(pre.iter().map(|e| e[i - 1][j - 1].x()).collect::<Vec<f64>>());
        }
    }
    UlamMatrix::assemble(lo, 0.0, bins, &branches)
}

/// Invariant density of the first-return map on the base cell.
pub fn ulam_density(map: &BranchMap, table: &PartitionTable, opts: UlamOptions) -> Result<UlamDensity> {
    if opts.bins < 100 {
        return Err(Error::InvalidInput(format!("Ulam needs at least 100 bins, got {}", opts.bins)));
    }
    let coverage = table.coverage();
    if coverage < opts.min_coverage {
        return Err(Error::InsufficientCoverage { coverage, required: opts.min_coverage });
    }
    ulam_matrix(map, table, opts.bins)?.stationary(opts.relaxation, opts.max_iter, opts.tol)
}

/// The sigma-finite invariant measure spread from the base cell, truncated
/// after `terms` iterates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaFinite {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    /// `increments[n]` is the mass of the n-th term, `mu_hat(tau > n)`.
    pub increments: Vec<f64>,
    pub partial_masses: Vec<f64>,
    /// Fitted log-log slope of the increments over the upper half of `n`.
    pub increment_slope: f64,
    /// Last increment relative to the partial mass.
    pub relative_increment: f64,
    pub converging: bool,
    pub diverging: bool,
}

pub const SIGMA_GRID: usize = 2000;
/// Relative size of the last increment below which the partial masses
/// are taken to have converged, provided the increment is not large in
/// absolute terms.
pub const CONVERGED_BELOW: f64 = 0.01;
/// Absolute size of the last increment above which they are taken to diverge.
pub const DIVERGING_ABOVE: f64 = 0.05;

pub fn sigma_finite_density(
    map: &BranchMap,
    table: &PartitionTable,
    hhat: &UlamDensity,
    terms: usize,
) -> Result<SigmaFinite> {
    if terms > table.depth() {
        return Err(Error::InvalidInput(format!("{terms} terms need a table of depth at least {terms}")));
    }
    if terms < 4 {
        return Err(Error::InvalidInput("at least 4 terms are needed".into()));
    }
    // mu_hat(tau = t) from the cell masses.
    let mut by_tau = vec![0.0; terms + 1];
    for i in 1..terms {
        for j in 1..=terms - i {
            let (a, b) = table.cell(i, j).expect("within depth");
            by_tau[i + j] += hhat.mass(a.x(), b.x());
        }
    }
    let mut increments = Vec::with_capacity(terms + 1);
    let mut returned = 0.0;
    for t in by_tau.iter() {
        returned += t;
        increments.push((1.0 - returned).max(0.0));
    }
    let partial_masses: Vec<f64> = increments
        .iter()
        .scan(0.0, |s, v| {
            *s += v;
            Some(*s)
        })
        .collect();
    let lo_n = (terms / 2).max(2);
    let pts: Vec<(f64, f64)> = (lo_n..=terms)
        .filter(|&n| increments[n] > 0.0)
        .map(|n| ((n as f64).ln(), increments[n].ln()))
        .collect();
    let increment_slope = crate::stats::ols_slope(&pts).map(|f| f.slope).unwrap_or(f64::NAN);
    let last = increments[terms];
    let relative_increment = last / partial_masses[terms];

    let lo = table.base_left().x();
    let h = 2.0 / SIGMA_GRID as f64;
    let grid: Vec<f64> = (0..SIGMA_GRID).map(|g| -1.0 + (g as f64 + 0.5) * h).collect();
    let density = grid.par_iter().map(|&y| push_density(map, hhat, lo, y, terms)).collect();
    Ok(SigmaFinite {
        grid,
        density,
        increments,
        partial_masses,
        increment_slope,
        relative_increment,
        converging: relative_increment < CONVERGED_BELOW && last <= DIVERGING_ABOVE,
        diverging: last > DIVERGING_ABOVE,
    })
}

/// Density at `y` of the first `terms` pushforwards, by change of variables
/// along the inverse branches.
fn push_density(map: &BranchMap, hhat: &UlamDensity, lo: f64, y: f64, terms: usize) -> f64 {
    if y > lo && y < 0.0 {
        return hhat.value(y);
    }
    let arm = |mut w: Point, mut jac: f64, steps: usize| {
        let mut acc = 0.0;
        for i in 1..=steps {
            if i > 1 {
                w = map.inv_right(w);
                jac /= map.deriv(w);
            }
            let x = map.inv_left(w);
            acc += hhat.value(x.x()) * jac / map.deriv(x);
        }
        acc
    };
    let y = map.chart(y);
    if in_plus(y) {
        return arm(y, 1.0, terms);
    }
    // Left of the base: s iterates on the left before y, entered from the
    // right after i iterates there; the term index is i + s + 1.
    let mut total = 0.0;
    let (mut z, mut jz) = (y, 1.0);
    for s in 0..terms - 1 {
        if s > 0 {
            z = map.inv_left(z);
            jz /= map.deriv(z);
        }
        let w = map.inv_right(z);
        total += arm(w, jz / map.deriv(w), terms - 1 - s);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::MapParams;

    fn f_map() -> BranchMap {
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

    fn mid(a: Point, b: Point) -> f64 {
        0.5 * (a.x() + b.x())
    }

    #[test]
    fn base_cell_ends() {
        let m = f_map();
        let t = compute_partition(&m, 10).unwrap();
        let (l, r) = t.big_minus(0);
        assert_eq!(r.x(), 0.0);
        assert_eq!(l.x(), m.eval_inverse(crate::Side::Left, 0.0));
        assert!((m.eval(l.x())).abs() < 1e-12);
    }

    #[test]
    fn level_sets_march_outwards() {
        let m = f_map();
        let t = compute_partition(&m, 40).unwrap();
        for n in 1..=40 {
            assert!(t.big_minus(n).1.x() <= t.big_minus(n - 1).0.x());
            assert!(t.big_plus(n).0.x() >= t.big_plus(n - 1).1.x());
        }
    }

    #[test]
    fn third_piece_enters_right_base_after_three_steps() {
        let m = f_map();
        let t = compute_partition(&m, 10).unwrap();
        let (a, b) = t.small_minus(3);
        let mut p = m.chart(mid(a, b));
        for _ in 0..3 {
            p = m.step(p);
        }
        let (l, r) = t.big_plus(0);
        assert!(p.x() > l.x() && p.x() < r.x());
    }

    #[test]
    fn cell_midpoints_return_at_their_label() {
        let m = f_map();
        let t = compute_partition(&m, 24).unwrap();
        let left = t.base_left();
        for i in 1..20 {
            for j in 1..=20 - i {
                let (a, b) = t.cell(i, j).unwrap();
                let r = first_return(&m, left, m.chart(mid(a, b))).unwrap();
                assert_eq!((r.i, r.j), (i as u64, j as u64));
                assert_eq!(t.locate(mid(a, b)), Some((i, j)));
            }
        }
    }

    #[test]
    fn return_data_constant_on_a_cell() {
        let m = f_map();
        let t = compute_partition(&m, 12).unwrap();
        let (a, b) = t.cell(3, 4).unwrap();
        for k in 1..=5 {
            let x = a.x() + (b.x() - a.x()) * k as f64 / 6.0;
            let r = first_return(&m, t.base_left(), m.chart(x)).unwrap();
            assert_eq!((r.i, r.j, r.tau), (3, 4, 7));
        }
    }

    #[test]
    fn cell_lengths_add_up_to_the_piece() {
        // Oracle: locate the left end of the untabulated remainder by
        // bisection on forward return data, independently of the inverse
        // branch construction.
        let m = f_map();
        let depth = 30;
        let t = compute_partition(&m, depth).unwrap();
        for i in 1..6 {
            let (l, r) = t.small_minus(i);
            let sum: f64 = (1..=depth - i).map(|j| {
                let (a, b) = t.cell(i, j).unwrap();
                b.x() - a.x()
            })
            .sum();
            let jmax = (depth - i) as u64;
            let (mut lo, mut hi) = (l.x(), r.x());
            for _ in 0..200 {
                let midp = 0.5 * (lo + hi);
                if midp <= lo || midp >= hi {
                    break;
                }
                match first_return(&m, t.base_left(), m.chart(midp)) {
                    Ok(rec) if rec.j > jmax => lo = midp,
                    Ok(_) => hi = midp,
                    Err(_) => break,
                }
            }
            let remainder = lo - l.x();
            assert!((sum + remainder - (r.x() - l.x())).abs() < 1e-10, "i = {i}");
        }
    }

    #[test]
    fn level_set_deficit_follows_power_law_tail() {
        let m = f_map();
        let t = compute_partition(&m, 60).unwrap();
        let len = |n: usize| {
            let (a, b) = t.big_minus(n);
            Point::gap(a, b)
        };
        // |D_n| ~ c n^(-s); the tail beyond 60 is then about
        // c 60^(1-s) / (s - 1) with a half-step correction.
        let pts: Vec<(f64, f64)> = (30..=60).map(|n| ((n as f64).ln(), len(n).ln())).collect();
        let fit = crate::stats::ols_slope(&pts).unwrap();
        let s = -fit.slope;
        let c = fit.intercept.exp();
        let predicted = c * 60.5f64.powf(1.0 - s) / (s - 1.0);
        let deficit = t.chains().p[60].dist_minus();
        assert!((predicted - deficit).abs() / deficit < 0.2, "{predicted} vs {deficit}");
    }

    #[test]
    fn induced_orbit_matches_raw_step_count() {
        use crate::orbit::{iterate, Observer};
        struct Visits {
            left: f64,
            at: Vec<u64>,
        }
        impl Observer for Visits {
            fn observe(&mut self, k: u64, p: Point) {
                if k > 0 && p.x() < 0.0 && p.x() > self.left {
                    self.at.push(k);
                }
            }
        }
        let m = f_map();
        let x0 = -0.1234;
        let s = induced_orbit(&m, x0, 200).unwrap();
        let mut v = Visits { left: base_left(&m).x(), at: Vec::new() };
        iterate(&m, x0, *s.tau.last().unwrap() + 1, &mut v).unwrap();
        assert_eq!(v.at, s.tau);
        for k in 0..s.len() {
            assert_eq!(s.tau[k], s.tau_plus[k] + s.tau_minus[k]);
            if k > 0 {
                assert!(s.tau[k] > s.tau[k - 1]);
            }
        }
        for (a, b) in ratio_series(&s) {
            assert!((a + b - 1.0).abs() < 1e-15 && (0.0..=1.0).contains(&a));
        }
        let one = induced_orbit(&m, x0, 1).unwrap();
        let r = first_return(&m, base_left(&m), m.chart(x0)).unwrap();
        assert_eq!((one.tau_plus[0], one.tau_minus[0]), (r.i, r.j));
    }

    #[test]
    fn capped_return_censors() {
        let m = f_map();
        let t = compute_partition(&m, 30).unwrap();
        let (a, b) = t.cell(10, 3).unwrap();
        let p = m.chart(mid(a, b));
        assert_eq!(first_return_capped(&m, t.base_left(), p, 5, 100).unwrap(), ReturnOutcome::CensoredPlus { i: 5 });
        assert_eq!(
            first_return_capped(&m, t.base_left(), p, 100, 2).unwrap(),
            ReturnOutcome::CensoredMinus { i: 10, j: 2 }
        );
        assert!(matches!(first_return(&m, t.base_left(), m.chart(0.5)), Err(Error::OutsideBase { .. })));
    }

    #[test]
    fn ulam_density_is_stable_and_invariant() {
        use rand::{Rng, SeedableRng};
        let m = f_map();
        let t = compute_partition(&m, 120).unwrap();
        let opts = UlamOptions { bins: 100, ..Default::default() };
        let h = ulam_density(&m, &t, opts).unwrap();
        assert!(h.density.iter().all(|&v| v >= 0.0));
        assert!((h.integral() - 1.0).abs() < 1e-12);
        let h2 = ulam_density(&m, &t, UlamOptions { bins: 200, ..opts }).unwrap();
        assert!(h.l1_distance(&h2) < 5e-2, "{}", h.l1_distance(&h2));

        // Push stratified samples of h through one return and re-bin.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let per_bin = 50_000;
        let mut pushed = vec![0.0; h.bins()];
        for a in 0..h.bins() {
            let (l, r) = h.edges(a);
            let w = h.density[a] * h.bin_width() / per_bin as f64;
            for s in 0..per_bin {
                let x = l + (r - l) * (s as f64 + rng.gen::<f64>()) / per_bin as f64;
                if let Ok(rec) = first_return(&m, t.base_left(), m.chart(x)) {
                    pushed[h.bin_of(rec.landing.unwrap().x())] += w;
                }
            }
        }
        let l1: f64 = pushed.iter().zip(&h.density).map(|(p, d)| (p - d * h.bin_width()).abs()).sum();
        assert!(l1 < 1e-3, "pushforward L1 {l1}");
    }

    #[test]
    fn sigma_finite_restricts_to_base_density() {
        let m = f_map();
        let t = compute_partition(&m, 40).unwrap();
        let h = ulam_density(&m, &t, UlamOptions { bins: 100, min_coverage: 0.99, ..Default::default() }).unwrap();
        let s = sigma_finite_density(&m, &t, &h, 40).unwrap();
        assert_eq!(s.increments[0], 1.0);
        assert_eq!(s.increments[1], 1.0);
        for w in s.partial_masses.windows(2) {
            assert!(w[1] >= w[0]);
        }
        let lo = t.base_left().x();
        for (y, d) in s.grid.iter().zip(&s.density) {
            if *y > lo && *y < 0.0 {
                assert_eq!(*d, h.value(*y));
            }
            assert!(*d >= 0.0 && d.is_finite());
        }
    }
}
