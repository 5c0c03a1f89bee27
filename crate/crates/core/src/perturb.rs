//! Perturbations that change the tangency exponents at the fixed points.
//!
//! Near a fixed point the map is replaced by `h(u) = u + b~ u^(1 + l~)` on
//! `u < u_in` and blended back into the original model on `[u_in, u_out]`
//! with the flat transition `xi`, where `u_out = 1 + x1` (or `1 - x2`) and
//! `u_in = u_out / 2`. Everything outside the two splice intervals is left
//! untouched, so the new map has the same glue, the same behaviour near 0
//! and the new exponents at the fixed points.

use serde::{Deserialize, Serialize};

use crate::axioms::{verify_axioms, AxiomReport, DEFAULT_GRID};
use crate::branch::{BranchMap, FixedModel, PerturbSpec, Side, Splice};
use crate::error::{Error, Result};
use crate::jet::{Jet, MAX_ORDER};
use crate::params::{classify, regularity_exponents, ClassKind, MapParams};

/// Largest `t / k` whose product with `k` is exactly `t`, when one exists
/// within a few ulps; class membership is decided by exact products.
fn exact_quotient(t: f64, k: f64) -> f64 {
    let q = t / k;
    let mut cand = q;
    for _ in 0..4 {
        if cand * k == t {
            return cand;
        }
        cand = cand.next_up();
    }
    let mut cand = q.next_down();
    for _ in 0..4 {
        if cand * k == t {
            return cand;
        }
        cand = cand.next_down();
    }
    q
}

fn ceil(x: f64) -> f64 {
    x.ceil()
}

/// The `gamma` used by the table rows: `min(1/(2 k2), 1/(2 k1), 0.1)`,
/// halved until `ceil(1/k - gamma) = ceil(1/k)` on both sides.
pub fn table_gamma(p: &MapParams) -> f64 {
    let mut g = (0.5 / p.k2).min(0.5 / p.k1).min(0.1);
    for _ in 0..60 {
        let ok = [p.k1, p.k2].iter().all(|&k| {
            let inv = 1.0 / k;
            inv == inv.round() || ceil(inv - g) == ceil(inv)
        });
        if ok {
            break;
        }
        g *= 0.5;
    }
    g
}

/// New exponents `(l1~, l2~)` that move `f` into the target family. A map
/// already in the family is left as it is.
pub fn target_parameters(p: &MapParams, target: ClassKind) -> (f64, f64) {
    let (l1, l2, k1, k2) = (p.ell1, p.ell2, p.k1, p.k2);
    let (bm, bp) = (p.beta_minus(), p.beta_plus());
    if classify(p).kind() == target {
        return (l1, l2);
    }
    let gamma = table_gamma(p);
    let chosen = match target {
        ClassKind::F => {
            if bp < 1.0 && bm >= 1.0 {
                (1.0 / k2 - gamma, l2)
            } else if bm < 1.0 && bp >= 1.0 {
                (l1, 1.0 / k1 - gamma)
            } else {
                (1.0 / k2 - gamma, 1.0 / k1 - gamma)
            }
        }
        ClassKind::Pm => {
            if l1 >= l2 {
                if bm < 1.0 {
                    (exact_quotient(1.0, k2), l2)
                } else {
                    (l1 + gamma, l2)
                }
            } else if bp < 1.0 {
                (l1, exact_quotient(1.0, k1))
            } else {
                (l1, l2 + gamma)
            }
        }
        ClassKind::Star => {
            if bm.max(bp) < 1.0 {
                (exact_quotient(1.0, k2), exact_quotient(1.0, k1))
            } else if bp < 1.0 {
                (l1, exact_quotient(bm, k1))
            } else if bm < 1.0 {
                (exact_quotient(bp, k2), l2)
            } else if k1 >= k2 {
                (exact_quotient(bp, k2), l2)
            } else {
                (l1, exact_quotient(bm, k1))
            }
        }
    };
    // The rows meet the target except on ties such as beta+ = 1 exactly in
    // the first F_pm row, where one more gamma step breaks the tie.
    let with = |(a, b): (f64, f64)| MapParams { ell1: a, ell2: b, ..*p };
    if classify(&with(chosen)).kind() == target {
        return chosen;
    }
    let (a, b) = chosen;
    let nudged = if a != l1 { (a + gamma, b) } else { (a, b + gamma) };
    if classify(&with(nudged)).kind() == target {
        nudged
    } else {
        chosen
    }
}

pub const BTILDE_GRID: usize = 1000;
pub const MAX_HALVINGS: u32 = 60;

/// Splice interval `(u_in, u_out)` in the chart of a side.
fn splice_interval(spec: &PerturbSpec, side: Side) -> (f64, f64) {
    let u_out = match side {
        Side::Left => 1.0 + spec.x1,
        Side::Right => 1.0 - spec.x2,
    };
    (0.5 * u_out, u_out)
}

/// Check the ordering and slope conditions for `h(u) = u + bt u^(1+lt)` on
/// the splice interval of one side.
fn conditions_hold(f: &BranchMap, side: Side, lt: f64, bt: f64, u_in: f64, u_out: f64) -> bool {
    let model = f.fixed_model(side);
    let p = f.effective_params();
    let (ell, b) = match side {
        Side::Left => (p.ell1, p.b1),
        Side::Right => (p.ell2, p.b2),
    };
    let h = FixedModel::power(lt, bt);
    (0..=BTILDE_GRID).all(|i| {
        let u = u_in + (u_out - u_in) * i as f64 / BTILDE_GRID as f64;
        let ordered = h.phi(u) <= model.phi(u);
        let slope = if ell > 0.0 {
            b * ell * u.powf(ell) - bt * lt * u.powf(lt) >= 0.0
        } else {
            1.0 - bt * lt * u.powf(lt) >= 0.0
        };
        ordered && slope
    })
}

fn check_splice(f: &BranchMap, spec: &PerturbSpec) -> Result<()> {
    for side in [Side::Left, Side::Right] {
        let (_, u_out) = splice_interval(spec, side);
        let w = f.chart_width(side);
        if !(u_out > 0.0 && u_out <= w) {
            return Err(Error::InvalidInput(format!(
                "{side} splice point must lie within {w:.3e} of the fixed point, got distance {u_out:.3e}"
            )));
        }
    }
    for (l, name) in [(spec.ell1_tilde, "ell1_tilde"), (spec.ell2_tilde, "ell2_tilde")] {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidInput(format!("{name} must be positive, got {l}")));
        }
    }
    Ok(())
}

/// Slopes `(b1~, b2~)`: start from the original slope and halve until the
/// conditions hold on a grid. Unchanged sides keep their slope.
pub fn choose_btilde(f: &BranchMap, spec: &PerturbSpec) -> Result<(f64, f64)> {
    check_splice(f, spec)?;
    let p = f.effective_params();
    let mut out = [p.b1, p.b2];
    for (idx, side) in [Side::Left, Side::Right].into_iter().enumerate() {
        let (ell, lt) = match side {
            Side::Left => (p.ell1, spec.ell1_tilde),
            Side::Right => (p.ell2, spec.ell2_tilde),
        };
        if lt == ell {
            continue;
        }
        let (u_in, u_out) = splice_interval(spec, side);
        let mut bt = out[idx];
        let mut halvings = 0;
        while !conditions_hold(f, side, lt, bt, u_in, u_out) {
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(Error::SearchExhausted { halvings: MAX_HALVINGS });
            }
            bt *= 0.5;
        }
        out[idx] = bt;
    }
    Ok((out[0], out[1]))
}

/// Build the perturbed map without checking the axioms.
pub fn construct_perturbed(f: &BranchMap, spec: &PerturbSpec) -> Result<BranchMap> {
    check_splice(f, spec)?;
    let p = f.effective_params();
    let model = |side: Side, ell: f64, lt: f64, bt: f64| {
        let original = f.fixed_model(side).clone();
        if lt == ell {
            return (original, None);
        }
        let (u_in, u_out) = splice_interval(spec, side);
        let spliced = FixedModel::Spliced(Box::new(Splice { inner: FixedModel::power(lt, bt), outer: original, u_in, u_out }));
        (spliced, Some(u_in))
    };
    let (left, left_in) = model(Side::Left, p.ell1, spec.ell1_tilde, spec.b1_tilde);
    let (right, right_in) = model(Side::Right, p.ell2, spec.ell2_tilde, spec.b2_tilde);
    // The certified neighbourhoods of 0 are the preimages of the shrunk
    // fixed-point neighbourhoods.
    let (zl, zr) = f.zero_widths();
    let zl = match right_in {
        Some(u) => zl.min((u / p.a1).powf(1.0 / p.k1)),
        None => zl,
    };
    let zr = match left_in {
        Some(u) => zr.min((u / p.a2).powf(1.0 / p.k2)),
        None => zr,
    };
    Ok(f.with_fixed_models(left, right, (zl, zr), spec.clone()))
}

/// Build the perturbed map and check the axioms on it.
pub fn build_perturbed(f: &BranchMap, spec: &PerturbSpec) -> Result<(BranchMap, AxiomReport)> {
    let g = construct_perturbed(f, spec)?;
    let report = verify_axioms(&g, DEFAULT_GRID, 1e-12)?;
    if !report.all_ok() {
        return Err(Error::AxiomFailure(report.summary()));
    }
    Ok((g, report))
}

/// `C^r` distance between two maps that share everything but the models
/// at the fixed points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrDistance {
    pub r: usize,
    /// Sup of `|D^k (f - g)|` for `k = 0..=r`.
    pub per_order: Vec<f64>,
    pub distance: f64,
    /// Derivatives come from Taylor jets, so there is no differencing error.
    pub fd_error_bound: f64,
}

pub const CR_GRID: usize = 2000;

fn splice_bounds(model: &FixedModel) -> Option<(f64, f64)> {
    match model {
        FixedModel::Spliced(s) => Some((s.u_in, s.u_out)),
        _ => None,
    }
}

pub fn cr_distance(f: &BranchMap, g: &BranchMap, r: usize, grid_size: usize) -> Result<CrDistance> {
    if r > MAX_ORDER {
        return Err(Error::InvalidInput(format!("derivative order {r} exceeds {MAX_ORDER}")));
    }
    if f.params() != g.params() {
        return Err(Error::NotComparable("maps differ away from the fixed points".into()));
    }
    let grid_size = grid_size.max(16);
    let mut per_order = vec![0.0f64; r + 1];
    for side in [Side::Left, Side::Right] {
        let (mf, mg) = (f.fixed_model(side), g.fixed_model(side));
        if mf == mg {
            continue;
        }
        let w = f.chart_width(side);
        // The models can only differ below the outermost splice point.
        let outer = [splice_bounds(mf), splice_bounds(mg)].iter().flatten().map(|b| b.1).fold(0.0, f64::max);
        let top = if outer > 0.0 { outer } else { w };
        let mut us: Vec<f64> = (0..grid_size)
            .map(|i| top * 1e-12 * (1e12f64).powf(i as f64 / (grid_size - 1) as f64))
            .collect();
        for (a, b) in [splice_bounds(mf), splice_bounds(mg)].iter().flatten() {
            us.extend((0..=grid_size).map(|i| a + (b - a) * i as f64 / grid_size as f64));
        }
        for u in us {
            if !(u > 0.0 && u <= w) {
                continue;
            }
            let d: Jet = mf.jet(u, r) - mg.jet(u, r);
            for (k, best) in per_order.iter_mut().enumerate() {
                *best = best.max(d.derivative(k).abs());
            }
        }
    }
    let distance = per_order.iter().cloned().fold(0.0, f64::max);
    Ok(CrDistance { r, per_order, distance, fd_error_bound: 0.0 })
}

#[derive(Clone, Debug)]
pub struct Approximation {
    pub map: BranchMap,
    pub spec: PerturbSpec,
    pub r_used: usize,
    pub achieved: f64,
    pub report: AxiomReport,
    /// `(1 + x1, 1 - x2, distance)` for every step of the shrink schedule.
    pub history: Vec<(f64, f64, f64)>,
}

pub const MAX_SHRINKS: usize = 40;
/// The first splice points sit this fraction of the way out to the chart
/// widths.
pub const START_FRACTION: f64 = 0.9;

/// Spec with the splice points at distances `(d1, d2)` from the fixed
/// points and slopes chosen to satisfy the conditions.
pub fn spec_at(f: &BranchMap, ell_tilde: (f64, f64), d1: f64, d2: f64) -> Result<PerturbSpec> {
    let mut spec = PerturbSpec {
        ell1_tilde: ell_tilde.0,
        ell2_tilde: ell_tilde.1,
        x1: d1 - 1.0,
        x2: 1.0 - d2,
        b1_tilde: 0.0,
        b2_tilde: 0.0,
    };
    let (b1, b2) = choose_btilde(f, &spec)?;
    spec.b1_tilde = b1;
    spec.b2_tilde = b2;
    Ok(spec)
}

/// Regularity exponent that the approximation theorem attaches to a target.
pub fn regularity_for(p: &MapParams, target: ClassKind) -> usize {
    let r = regularity_exponents(p);
    match target {
        ClassKind::F => r.r_tilde,
        ClassKind::Pm => r.r_pm,
        ClassKind::Star => r.r_star,
    }
    .try_into()
    .unwrap_or(usize::MAX)
}

/// Move the splice points towards the fixed points, halving their distance
/// each step, until the `C^r` distance drops below `eps`.
pub fn approximate(f: &BranchMap, target: ClassKind, eps: f64) -> Result<Approximation> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    let p = f.effective_params();
    let ell_tilde = target_parameters(&p, target);
    let r_used = regularity_for(&p, target);
    let (w1, w2) = f.chart_widths();
    let (mut d1, mut d2) = (START_FRACTION * w1, START_FRACTION * w2);
    let mut history = Vec::new();
    let mut best = f64::INFINITY;
    for _ in 0..MAX_SHRINKS {
        let spec = spec_at(f, ell_tilde, d1, d2)?;
        let g = construct_perturbed(f, &spec)?;
        let dist = cr_distance(f, &g, r_used, CR_GRID)?.distance;
        history.push((d1, d2, dist));
        best = best.min(dist);
        if dist < eps {
            let (map, report) = build_perturbed(f, &spec)?;
            return Ok(Approximation { map, spec, r_used, achieved: dist, report, history });
        }
        d1 *= 0.5;
        d2 *= 0.5;
    }
    Err(Error::NotAchieved { best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bump::xi_jet;

    fn params(ell1: f64, ell2: f64, k1: f64, k2: f64) -> MapParams {
        MapParams { ell1, ell2, k1, k2, a1: 2.0, a2: 2.0, b1: 1.0, b2: 1.0, iota: 0.1, eta_coeff: 0.1 }
    }

    #[test]
    fn table_rows_from_reference_examples() {
        let p = params(0.5, 0.5, 1.0, 1.0);
        assert_eq!(target_parameters(&p, ClassKind::Star), (1.0, 1.0));
        let p = params(0.75, 0.5, 1.0, 1.0);
        assert_eq!(target_parameters(&p, ClassKind::Pm), (1.0, 0.5));
        let p = params(2.0, 3.0, 0.8, 0.6);
        let g = table_gamma(&p);
        assert_eq!(target_parameters(&p, ClassKind::F), (1.0 / 0.6 - g, 1.0 / 0.8 - g));
    }

    #[test]
    fn gamma_keeps_ceilings() {
        for &(k1, k2) in &[(1.0, 1.0), (0.3, 0.7), (0.5, 2.0), (0.45, 0.45), (1.0 / 3.0, 0.99)] {
            let p = params(1.0, 1.0, k1, k2);
            let g = table_gamma(&p);
            assert!(g > 0.0);
            for k in [k1, k2] {
                let inv: f64 = 1.0 / k;
                assert!(inv == inv.round() || (inv - g).ceil() == inv.ceil());
            }
        }
    }

    #[test]
    fn every_target_reached_from_every_family() {
        let cases = [
            params(0.5, 0.5, 1.0, 1.0),
            params(0.25, 0.75, 1.0, 1.0),
            params(2.0, 0.25, 1.0, 1.0),
            params(0.25, 2.0, 1.0, 1.0),
            params(1.5, 1.5, 1.0, 1.0),
            params(2.0, 1.0, 0.5, 1.5),
            params(1.0, 3.0, 0.5, 1.5),
            params(1.0, 0.5, 1.0, 1.0),
        ];
        for p in cases {
            for t in [ClassKind::F, ClassKind::Pm, ClassKind::Star] {
                let (a, b) = target_parameters(&p, t);
                let q = MapParams { ell1: a, ell2: b, ..p };
                assert_eq!(classify(&q).kind(), t, "{p:?} -> {t}");
            }
        }
    }

    fn base_map() -> BranchMap {
        BranchMap::build(params(0.5, 0.5, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn identity_spec_reproduces_the_map() {
        let f = base_map();
        let spec = spec_at(&f, (0.5, 0.5), 0.01, 0.01).unwrap();
        assert_eq!((spec.b1_tilde, spec.b2_tilde), (1.0, 1.0));
        let g = construct_perturbed(&f, &spec).unwrap();
        for i in 1..1000 {
            let x = -1.0 + 2.0 * i as f64 / 1000.0;
            assert_eq!(f.eval(x), g.eval(x));
        }
        assert_eq!(cr_distance(&f, &g, 3, 500).unwrap().distance, 0.0);
    }

    #[test]
    fn splice_matches_both_pieces_at_its_ends() {
        let f = base_map();
        let spec = spec_at(&f, (1.0, 2.0), 0.02, 0.01).unwrap();
        let g = construct_perturbed(&f, &spec).unwrap();
        let h1 = |x: f64| x + spec.b1_tilde * (1.0 + x).powf(1.0 + spec.ell1_tilde);
        let h2 = |x: f64| x - spec.b2_tilde * (1.0 - x).powf(1.0 + spec.ell2_tilde);
        let xt1 = spec.x1_tilde();
        assert!((g.eval(xt1) - h1(xt1)).abs() < 1e-15);
        assert_eq!(g.eval(spec.x1), f.eval(spec.x1));
        assert!((g.eval(spec.x2_tilde()) - h2(spec.x2_tilde())).abs() < 1e-15);
        // Support of f - g lies in the two splice neighbourhoods.
        for i in 1..2000 {
            let x = -1.0 + 2.0 * i as f64 / 2000.0;
            if x >= spec.x1 && x <= spec.x2 {
                assert_eq!(f.eval(x), g.eval(x));
            }
            if x <= xt1 {
                assert!((g.eval(x) - h1(x)).abs() < 1e-15);
            }
        }
        assert_eq!(classify(&g.effective_params()), crate::ClassLabel::FPlus);
    }

    #[test]
    fn slopes_are_halved_until_conditions_hold() {
        // l~ < l: the new power law sits above the old one unless b~ is small.
        let f = BranchMap::build(params(2.0, 2.0, 1.0, 1.0)).unwrap();
        let spec = spec_at(&f, (0.5, 2.0), 0.05, 0.05).unwrap();
        assert!(spec.b1_tilde < 1.0 && spec.b1_tilde > 0.0);
        assert_eq!(spec.b2_tilde, 1.0);
        let (u_in, u_out) = (0.025, 0.05);
        assert!(conditions_hold(&f, Side::Left, 0.5, spec.b1_tilde, u_in, u_out));
        assert!(!conditions_hold(&f, Side::Left, 0.5, 2.0 * spec.b1_tilde, u_in, u_out));
        // Hyperbolic fixed point: second form of the slope condition.
        let h = BranchMap::build(params(0.0, 0.0, 1.0, 1.0)).unwrap();
        let spec = spec_at(&h, (1.0, 1.0), 0.05, 0.05).unwrap();
        assert!(1.0 - spec.b1_tilde * 0.05 >= 0.0);
    }

    #[test]
    fn jet_distance_matches_finite_differences() {
        // Smooth enough at the fixed point for the C^2 distance to be finite.
        let f = BranchMap::build(params(2.5, 2.5, 1.0, 1.0)).unwrap();
        let spec = spec_at(&f, (3.0, 2.5), 0.02, 0.02).unwrap();
        let g = construct_perturbed(&f, &spec).unwrap();
        let diff = |x: f64| f.eval(x) - g.eval(x);
        let h = 1e-4;
        let mut fd_sup = [0.0f64; 3];
        for i in 1..400 {
            let x = spec.x1 - 0.02 * i as f64 / 400.0;
            if x - h <= -1.0 {
                continue;
            }
            fd_sup[0] = fd_sup[0].max(diff(x).abs());
            fd_sup[1] = fd_sup[1].max(((diff(x + h) - diff(x - h)) / (2.0 * h)).abs());
            fd_sup[2] = fd_sup[2].max(((diff(x + h) - 2.0 * diff(x) + diff(x - h)) / (h * h)).abs());
        }
        let d = cr_distance(&f, &g, 2, 4000).unwrap();
        for k in 0..3 {
            assert!((d.per_order[k] - fd_sup[k]).abs() / fd_sup[k] < 0.02, "k={k}: {} vs {}", d.per_order[k], fd_sup[k]);
        }
    }

    #[test]
    fn c0_distance_shrinks_with_the_splice() {
        let f = base_map();
        let mut prev = f64::INFINITY;
        for d in [0.08, 0.04, 0.02, 0.01, 0.005] {
            let g = construct_perturbed(&f, &spec_at(&f, (1.0, 1.0), d, d).unwrap()).unwrap();
            let c0 = cr_distance(&f, &g, 0, 1000).unwrap().distance;
            assert!(c0 <= prev);
            prev = c0;
        }
    }

    #[test]
    fn distinct_glue_is_not_comparable() {
        let f = base_map();
        let g = BranchMap::build(params(0.5, 0.5, 1.0, 1.0 - 1e-9)).unwrap();
        assert!(matches!(cr_distance(&f, &g, 0, 100), Err(Error::NotComparable(_))));
    }

    #[test]
    fn uniformly_expanding_map_approximated_by_star() {
        let f = BranchMap::build(params(0.0, 0.0, 1.0, 1.0)).unwrap();
        let a = approximate(&f, ClassKind::Star, 1e-3).unwrap();
        assert_eq!(a.r_used, 0);
        assert!(a.achieved < 1e-3);
        assert_eq!(classify(&a.map.effective_params()).kind(), ClassKind::Star);
        assert!(a.report.all_ok());
    }

    #[test]
    fn bump_flat_at_both_ends() {
        for t in [0.0, 1.0] {
            let j = xi_jet(Jet::variable(t, 3));
            for k in 1..=3 {
                assert!(j.derivative(k).abs() < 1e-8);
            }
        }
    }
}
