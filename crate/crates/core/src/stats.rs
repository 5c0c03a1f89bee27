//! Return-time sampling, tail exponents and limit-law diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::branch::{BranchMap, Point};
use crate::error::{Error, Result};
use crate::induced::{base_left, first_return_capped, induced_orbit, ReturnOutcome};

/// splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and an index.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

/// Seed of run `idx` in grid cell `cell`.
pub fn derive_seed(master: u64, cell: u64, idx: u64) -> u64 {
    mix_seed(mix_seed(master, cell), idx)
}

/// Point of `(0, 1)` determined by `seed`.
pub fn unit_from_seed(seed: u64) -> f64 {
    ((splitmix64(seed) >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Initial condition in `(-1, 1) \ {0}` determined by `seed`.
pub fn start_point(seed: u64) -> f64 {
    let x = 2.0 * unit_from_seed(seed) - 1.0;
    if x == 0.0 {
        0.5
    } else {
        x
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

/// Least-squares line through `(x, y)` points; `None` with fewer than 2.
pub fn ols_slope(pts: &[(f64, f64)]) -> Option<OlsFit> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if pts.len() > 2 {
        let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(OlsFit { slope, intercept, slope_se })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    TauPlus,
    TauMinus,
    Tau,
}

impl Observable {
    pub fn as_str(&self) -> &'static str {
        match self {
            Observable::TauPlus => "tau_plus",
            Observable::TauMinus => "tau_minus",
            Observable::Tau => "tau",
        }
    }
}

impl std::fmt::Display for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Observable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tau_plus" => Ok(Observable::TauPlus),
            "tau_minus" => Ok(Observable::TauMinus),
            "tau" => Ok(Observable::Tau),
            _ => Err(Error::InvalidInput(format!("unknown observable '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Censoring {
    None,
    /// Still on the right when the cap was reached: `tau_plus >= cap` and
    /// `tau_minus` is unknown.
    Plus,
    /// Back on the left but not yet returned: `tau_minus >= cap`.
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnSample {
    pub tau_plus: u64,
    pub tau_minus: u64,
    pub tau: u64,
    pub censored: Censoring,
}

impl ReturnSample {
    /// Value of the observable and whether it is only a lower bound;
    /// `None` when it is unknown.
    pub fn value(&self, obs: Observable) -> Option<(u64, bool)> {
        match (obs, self.censored) {
            (Observable::TauPlus, c) => Some((self.tau_plus, c == Censoring::Plus)),
            (Observable::TauMinus, Censoring::Plus) => None,
            (Observable::TauMinus, c) => Some((self.tau_minus, c == Censoring::Minus)),
            (Observable::Tau, c) => Some((self.tau, c != Censoring::None)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnSamples {
    pub samples: Vec<ReturnSample>,
    /// Draws discarded because an iterate hit a partition boundary.
    pub boundary_hits: u64,
    /// Per-phase cap in iterates, if any.
    pub cap: Option<u64>,
    pub seed: u64,
}

/// Independent draws are split into this many streams, so results do not
/// depend on the number of threads.
pub const SAMPLE_STREAMS: u64 = 64;

/// Return data for `n` points drawn uniformly from the base cell. With a
/// cap, each phase stops after `cap` iterates and the draw is marked
/// censored.
pub fn sample_return_times(map: &BranchMap, n: usize, seed: u64, cap: Option<u64>) -> Result<ReturnSamples> {
    if n < 1000 {
        return Err(Error::InvalidInput(format!("need at least 1000 samples, got {n}")));
    }
    let left = base_left(map);
    let lo = left.x();
    let cap_v = cap.unwrap_or(u64::MAX);
    let streams = SAMPLE_STREAMS as usize;
    let parts: Vec<(Vec<ReturnSample>, u64)> = (0..streams)
        .into_par_iter()
        .map(|s| {
            let count = n / streams + usize::from(s < n % streams);
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, s as u64));
            let mut out = Vec::with_capacity(count);
            let mut hits = 0u64;
            while out.len() < count {
                let u: f64 = rng.gen();
                let x = lo * (1.0 - u);
                if !(x > lo && x < 0.0) {
                    continue;
                }
                let sample = match first_return_capped(map, left, map.chart(x), cap_v, cap_v) {
                    Ok(ReturnOutcome::Complete(r)) => {
                        ReturnSample { tau_plus: r.i, tau_minus: r.j, tau: r.tau, censored: Censoring::None }
                    }
                    Ok(ReturnOutcome::CensoredPlus { i }) => {
                        ReturnSample { tau_plus: i, tau_minus: 0, tau: i, censored: Censoring::Plus }
                    }
                    Ok(ReturnOutcome::CensoredMinus { i, j }) => {
                        ReturnSample { tau_plus: i, tau_minus: j, tau: i + j, censored: Censoring::Minus }
                    }
                    Err(Error::BoundaryHit { .. }) | Err(Error::Underflow { .. }) => {
                        hits += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                out.push(sample);
            }
            Ok((out, hits))
        })
        .collect::<Result<_>>()?;
    let mut samples = Vec::with_capacity(n);
    let mut boundary_hits = 0;
    for (s, h) in parts {
        samples.extend(s);
        boundary_hits += h;
    }
    Ok(ReturnSamples { samples, boundary_hits, cap, seed })
}

/// Values of one observable with their censoring flags.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TailData {
    pub values: Vec<f64>,
    pub censored: Vec<bool>,
}

impl TailData {
    pub fn from_samples(s: &ReturnSamples, obs: Observable) -> Self {
        let mut d = TailData::default();
        for v in s.samples.iter().filter_map(|x| x.value(obs)) {
            d.values.push(v.0 as f64);
            d.censored.push(v.1);
        }
        d
    }

    pub fn uncensored(values: Vec<f64>) -> Self {
        let censored = vec![false; values.len()];
        TailData { values, censored }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Smallest censored value, below which the survival function is exact.
    pub fn censoring_level(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.censored)
            .filter(|(_, &c)| c)
            .map(|(v, _)| *v)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub t: f64,
    pub survival: f64,
    /// Value of the fitted line at `t`.
    pub fit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub observable: Option<Observable>,
    /// Minus the fitted log-log slope of the survival function.
    pub exponent_est: f64,
    pub stderr: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub n: usize,
    pub hill_est: f64,
    /// The two estimators differ by more than `DISAGREEMENT`.
    pub flagged: bool,
    pub curve: Vec<SurvivalPoint>,
}

pub const TAIL_THRESHOLDS: usize = 40;
pub const MIN_THRESHOLDS: usize = 30;
pub const MIN_TAIL_COUNT: f64 = 50.0;
pub const HILL_FRACTION: f64 = 0.05;
pub const DISAGREEMENT: f64 = 0.25;

/// Fit `P(X > t) ~ C t^(-alpha)` on `[t_min, t_max]`. Integer-valued data
/// is fitted on distinct integer thresholds.
pub fn fit_tail(data: &TailData, t_min: f64, t_max: f64, integer: bool) -> Result<TailEstimate> {
    if !(t_min > 0.0 && t_max > t_min) {
        return Err(Error::InvalidInput(format!("need 0 < t_min < t_max, got [{t_min}, {t_max}]")));
    }
    if t_max >= data.censoring_level() {
        return Err(Error::InvalidInput(format!(
            "t_max = {t_max} reaches the censoring level {}",
            data.censoring_level()
        )));
    }
    let n = data.len();
    let mut sorted = data.values.clone();
    sorted.sort_by(f64::total_cmp);
    let exceed = |t: f64| n - sorted.partition_point(|&v| v <= t);
    let surv = |t: f64| exceed(t) as f64 / n as f64;
    let required = MIN_TAIL_COUNT / n as f64;
    let s_max = surv(t_max);
    if s_max < required {
        return Err(Error::InsufficientTail { survival: s_max, required });
    }
    let r = (t_max / t_min).ln();
    let mut ts: Vec<f64> = (0..TAIL_THRESHOLDS)
        .map(|i| t_min * (r * i as f64 / (TAIL_THRESHOLDS - 1) as f64).exp())
        .map(|t| if integer { t.round() } else { t })
        .collect();
    ts.dedup();
    if integer && ts.len() < MIN_THRESHOLDS {
        // Short integer ranges: every integer threshold.
        ts = (t_min.ceil() as u64..=t_max.floor() as u64).map(|t| t as f64).collect();
    }
    if ts.len() < MIN_THRESHOLDS {
        return Err(Error::InvalidInput(format!(
            "only {} distinct thresholds in [{t_min}, {t_max}]; widen the range",
            ts.len()
        )));
    }
    let pts: Vec<(f64, f64)> = ts.iter().map(|&t| (t.ln(), surv(t).ln())).collect();
    let fit = ols_slope(&pts).expect("at least 30 distinct thresholds");
    let alpha = -fit.slope;

    // Censored Pareto likelihood above the upper quantile, which is Hill's
    // estimator when nothing is censored.
    let k = ((HILL_FRACTION * n as f64) as usize).max(10).min(n - 1);
    let u = sorted[n - 1 - k];
    let (mut events, mut log_sum) = (0usize, 0.0);
    for (v, &c) in data.values.iter().zip(&data.censored) {
        if *v > u {
            log_sum += (v / u).ln();
            events += usize::from(!c);
        }
    }
    let hill_est = if log_sum > 0.0 { events as f64 / log_sum } else { f64::NAN };

    let stderr = fit.slope_se.max(alpha / (exceed(ts[0]) as f64).sqrt());
    let curve = ts
        .iter()
        .zip(&pts)
        .map(|(&t, p)| SurvivalPoint { t, survival: p.1.exp(), fit: (fit.intercept + fit.slope * p.0).exp() })
        .collect();
    Ok(TailEstimate {
        observable: None,
        exponent_est: alpha,
        stderr,
        t_min: ts[0],
        t_max: *ts.last().unwrap(),
        n,
        hill_est,
        flagged: !((hill_est - alpha).abs() <= DISAGREEMENT * alpha),
        curve,
    })
}

pub fn tail_exponent(samples: &ReturnSamples, obs: Observable, t_min: f64, t_max: f64) -> Result<TailEstimate> {
    let data = TailData::from_samples(samples, obs);
    let mut est = fit_tail(&data, t_min, t_max, true)?;
    est.observable = Some(obs);
    Ok(est)
}

/// Largest threshold at which at least `MIN_TAIL_COUNT` draws still
/// exceed, capped below the censoring level.
pub fn max_threshold(data: &TailData) -> f64 {
    let mut sorted = data.values.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = (MIN_TAIL_COUNT as usize).min(n);
    let t = sorted[n - k] - 1.0;
    t.min(data.censoring_level() - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converging,
    Diverging,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffCheck {
    pub tau_over_k: Vec<f64>,
    /// Relative spread of `tau_k / k` over the last quarter.
    pub drift: f64,
    /// `(tau_K / K) / (tau_{K/4} / (K/4))`.
    pub growth: f64,
    pub verdict: Verdict,
}

pub const DRIFT_LIMIT: f64 = 0.05;
pub const GROWTH_LIMIT: f64 = 2.0;

pub fn birkhoff_verdict(tau_over_k: &[f64]) -> (f64, f64, Verdict) {
    let k = tau_over_k.len();
    let tail = &tau_over_k[(3 * k) / 4..];
    let max = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let drift = (max - min) / mean;
    let growth = tau_over_k[k - 1] / tau_over_k[k / 4 - 1];
    let verdict = if drift < DRIFT_LIMIT {
        Verdict::Converging
    } else if growth >= GROWTH_LIMIT {
        Verdict::Diverging
    } else {
        Verdict::Indeterminate
    };
    (drift, growth, verdict)
}

pub fn birkhoff_limit_check(map: &BranchMap, x0: f64, k: usize) -> Result<BirkhoffCheck> {
    if k < 10_000 {
        return Err(Error::InvalidInput(format!("need K >= 10000 induced steps, got {k}")));
    }
    let stats = induced_orbit(map, x0, k)?;
    let tau_over_k = stats.tau_over_k();
    let (drift, growth, verdict) = birkhoff_verdict(&tau_over_k);
    Ok(BirkhoffCheck { tau_over_k, drift, growth, verdict })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    Zero,
    LogK,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableDiag {
    pub beta: f64,
    pub k_values: Vec<u64>,
    pub centering: Centering,
    /// Fitted `c` in `d_k = c log k`; zero without centering.
    pub scale: f64,
    /// Sorted normalized sums `tau_k / k^beta - d_k`, one row per `k`.
    pub normalized: Vec<Vec<f64>>,
    /// Two-sample Kolmogorov-Smirnov distance between consecutive rows.
    pub ks: Vec<f64>,
    pub stabilized: bool,
}

pub const KS_STABLE: f64 = 0.1;

/// Two-sample Kolmogorov-Smirnov statistic of sorted samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Diagnostic from raw sums: `sums[r][m]` is the m-th draw at `k_values[r]`.
pub fn stable_diag_from_sums(beta: f64, k_values: &[u64], sums: &[Vec<f64>]) -> StableDiag {
    let centering = if beta == 1.0 { Centering::LogK } else { Centering::Zero };
    let median = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s[s.len() / 2]
    };
    // For beta = 1 the centring constant is fitted from the medians.
    let scale = match centering {
        Centering::Zero => 0.0,
        Centering::LogK => {
            let pts: Vec<(f64, f64)> = k_values
                .iter()
                .zip(sums)
                .map(|(&k, s)| ((k as f64).ln(), median(s) / (k as f64).powf(beta)))
                .collect();
            ols_slope(&pts).map(|f| f.slope).unwrap_or(0.0)
        }
    };
    let normalized: Vec<Vec<f64>> = k_values
        .iter()
        .zip(sums)
        .map(|(&k, s)| {
            let kf = k as f64;
            let d = scale * kf.ln();
            let mut v: Vec<f64> = s.iter().map(|x| x / kf.powf(beta) - d).collect();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    let ks: Vec<f64> = normalized.windows(2).map(|w| ks_distance(&w[0], &w[1])).collect();
    let stabilized = ks.last().is_some_and(|&d| d < KS_STABLE);
    StableDiag { beta, k_values: k_values.to_vec(), centering, scale, normalized, ks, stabilized }
}

pub fn stable_law_diagnostic(map: &BranchMap, k_values: &[u64], m: usize, seed: u64) -> Result<StableDiag> {
    let beta = map.effective_params().beta();
    if beta < 1.0 {
        return Err(Error::InvalidInput(format!("stable-law diagnostic needs beta >= 1, got {beta}")));
    }
    if m < 1000 || k_values.len() < 3 || k_values.windows(2).any(|w| w[1] <= w[0]) || k_values[0] == 0 {
        return Err(Error::InvalidInput("need M >= 1000 and at least 3 increasing k values".into()));
    }
    let lo = base_left(map).x();
    let k_max = *k_values.last().unwrap() as usize;
    let draws: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, i as u64));
            loop {
                let x = lo * (1.0 - rng.gen::<f64>());
                if !(x > lo && x < 0.0) {
                    continue;
                }
                match induced_orbit(map, x, k_max) {
                    Ok(s) => return Ok(k_values.iter().map(|&k| s.tau[k as usize - 1] as f64).collect()),
                    Err(Error::BoundaryHit { .. }) | Err(Error::Underflow { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
        })
        .collect::<Result<_>>()?;
    let sums: Vec<Vec<f64>> = (0..k_values.len()).map(|r| draws.iter().map(|d| d[r]).collect()).collect();
    Ok(stable_diag_from_sums(beta, k_values, &sums))
}

/// Draw from the base cell with `Point` placement, for callers that need it.
pub fn uniform_base_point(map: &BranchMap, rng: &mut impl Rng) -> Point {
    let lo = base_left(map).x();
    loop {
        let x = lo * (1.0 - rng.gen::<f64>());
        if x > lo && x < 0.0 {
            return map.chart(x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::MapParams;

    fn pareto(alpha: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (1.0 - rng.gen::<f64>()).powf(-1.0 / alpha)).collect()
    }

    fn map(ell1: f64, ell2: f64) -> BranchMap {
        BranchMap::build(MapParams {
            ell1,
            ell2,
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
    fn ols_recovers_a_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 2.0 * i as f64)).collect();
        let f = ols_slope(&pts).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12 && (f.intercept - 3.0).abs() < 1e-12 && f.slope_se < 1e-12);
    }

    #[test]
    fn pareto_exponents_recovered() {
        let d = TailData::uncensored(pareto(1.5, 100_000, 1));
        let e = fit_tail(&d, 2.0, max_threshold(&d), false).unwrap();
        assert!((e.exponent_est - 1.5).abs() < 0.05, "{}", e.exponent_est);
        for (i, &alpha) in [0.5, 1.0, 2.0].iter().enumerate() {
            let d = TailData::uncensored(pareto(alpha, 100_000, 10 + i as u64));
            let e = fit_tail(&d, 1.5, max_threshold(&d), false).unwrap();
            assert!((e.exponent_est - alpha).abs() < 3.0 * e.stderr, "alpha {alpha}: {e:?}");
            assert!((e.hill_est - alpha).abs() / alpha < DISAGREEMENT);
            assert!(!e.flagged);
        }
    }

    #[test]
    fn censored_hill_is_unbiased() {
        let v = pareto(1.0, 100_000, 3);
        let cap = 200.0;
        let d = TailData {
            censored: v.iter().map(|&x| x >= cap).collect(),
            values: v.iter().map(|&x| x.min(cap)).collect(),
        };
        let e = fit_tail(&d, 1.5, 150.0, false).unwrap();
        assert!((e.hill_est - 1.0).abs() < 0.1, "{}", e.hill_est);
        assert!(matches!(fit_tail(&d, 1.5, 250.0, false), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn thin_tail_is_rejected() {
        let d = TailData::uncensored(pareto(2.0, 1000, 4));
        assert!(matches!(fit_tail(&d, 1.5, 1e4, false), Err(Error::InsufficientTail { .. })));
    }

    #[test]
    fn survival_nonincreasing() {
        let d = TailData::uncensored(pareto(1.0, 10_000, 5));
        let e = fit_tail(&d, 1.0, max_threshold(&d), false).unwrap();
        for w in e.curve.windows(2) {
            assert!(w[1].survival <= w[0].survival);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_reaches_minimum() {
        let m = map(0.5, 0.5);
        let a = sample_return_times(&m, 2000, 9, None).unwrap();
        let b = sample_return_times(&m, 2000, 9, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples.len(), 2000);
        assert_eq!(a.samples.iter().map(|s| s.tau).min(), Some(2));
        assert!(a.samples.iter().all(|s| s.tau == s.tau_plus + s.tau_minus && s.censored == Censoring::None));
    }

    #[test]
    fn mean_return_time_stabilizes_only_below_one() {
        let mean = |m: &BranchMap, n: usize| {
            let s = sample_return_times(m, n, 1, None).unwrap();
            s.samples.iter().map(|x| x.tau as f64).sum::<f64>() / n as f64
        };
        let f = map(0.5, 0.5);
        let (a, b) = (mean(&f, 20_000), mean(&f, 40_000));
        assert!((a - b).abs() / a < 0.05, "{a} vs {b}");
        // beta = 2: the sample mean keeps growing with the sample size.
        let g = map(2.0, 2.0);
        let (a, b) = (mean(&g, 2_000), mean(&g, 20_000));
        assert!(b > a, "{a} vs {b}");
    }

    #[test]
    fn heavier_left_tail_has_smaller_exponent() {
        let m = map(1.0, 0.5);
        let s = sample_return_times(&m, 100_000, 2, Some(20_000)).unwrap();
        let t_minus = max_threshold(&TailData::from_samples(&s, Observable::TauMinus));
        let t_plus = max_threshold(&TailData::from_samples(&s, Observable::TauPlus));
        let minus = tail_exponent(&s, Observable::TauMinus, 5.0, t_minus).unwrap();
        let plus = tail_exponent(&s, Observable::TauPlus, 2.0, t_plus).unwrap();
        assert!(minus.exponent_est < plus.exponent_est, "{minus:?} {plus:?}");
    }

    #[test]
    fn ks_distance_basics() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(ks_distance(&a, &a), 0.0);
        let b: Vec<f64> = (0..100).map(|i| i as f64 + 1000.0).collect();
        assert_eq!(ks_distance(&a, &b), 1.0);
    }

    #[test]
    fn iid_normal_sums_stabilize() {
        // Sums of k standard normals under the central-limit scaling k^(1/2)
        // all have the same law, so only sampling noise remains.
        let ks_list = [10u64, 100, 1000];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut normal = || {
            let (u, v): (f64, f64) = (1.0 - rng.gen::<f64>(), rng.gen());
            (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
        };
        let sums: Vec<Vec<f64>> =
            ks_list.iter().map(|&k| (0..4000).map(|_| normal() * (k as f64).sqrt()).collect()).collect();
        let d = stable_diag_from_sums(0.5, &ks_list, &sums);
        assert_eq!(d.centering, Centering::Zero);
        assert!(d.ks.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(d.stabilized, "{:?}", d.ks);
    }

    #[test]
    fn birkhoff_verdicts() {
        let conv: Vec<f64> = (1..=10_000).map(|k| 3.0 + 1.0 / k as f64).collect();
        assert_eq!(birkhoff_verdict(&conv).2, Verdict::Converging);
        let div: Vec<f64> = (1..=10_000).map(|k| k as f64).collect();
        assert_eq!(birkhoff_verdict(&div).2, Verdict::Diverging);
        let slow: Vec<f64> = (1..=10_000).map(|k| (k as f64).powf(0.3)).collect();
        assert_eq!(birkhoff_verdict(&slow).2, Verdict::Indeterminate);
        let c = birkhoff_limit_check(&map(0.5, 0.5), -0.2, 10_000).unwrap();
        assert_eq!(c.verdict, Verdict::Converging, "{} {}", c.drift, c.growth);
        let d = birkhoff_limit_check(&map(2.0, 2.0), -0.2, 10_000).unwrap();
        assert_eq!(d.verdict, Verdict::Diverging, "{} {}", d.drift, d.growth);
    }
}
