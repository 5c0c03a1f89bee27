//! Experiment configuration read from TOML.

use std::path::Path;

use intermap::{ClassKind, MapParams, PerturbSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub map: MapParams,
    /// Optional perturbation applied to `map` before any command runs.
    pub perturbation: Option<PerturbSpec>,
    #[serde(default)]
    pub run: RunOptions,
    #[serde(default)]
    pub tails: TailOptions,
    #[serde(default)]
    pub induced: InducedOptions,
    #[serde(default)]
    pub perturb: PerturbOptions,
    pub sweep: Option<SweepOptions>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunOptions {
    /// Orbit length for `simulate` and `sweep`.
    pub n: u64,
    pub eps: f64,
    pub bins: usize,
    /// Explicit seed indices; takes precedence over `seed_count`.
    pub seeds: Option<Vec<u64>>,
    pub seed_count: u64,
    pub master_seed: u64,
    pub out: Option<String>,
    pub workers: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            n: 100_000,
            eps: intermap::orbit::DEFAULT_EPS,
            bins: intermap::orbit::DEFAULT_BINS,
            seeds: None,
            seed_count: 1,
            master_seed: 0,
            out: None,
            workers: None,
        }
    }
}

impl RunOptions {
    pub fn seed_indices(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.seed_count).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TailOptions {
    /// Number of sampled base points per seed.
    pub samples: usize,
    pub observables: Vec<String>,
    pub t_min: f64,
    /// Upper fit threshold; defaults to the largest threshold the data supports.
    pub t_max: Option<f64>,
    /// Cap on each return-time component; larger values are censored.
    pub cap: Option<u64>,
}

impl Default for TailOptions {
    fn default() -> Self {
        TailOptions {
            samples: 100_000,
            observables: vec!["tau_minus".into(), "tau_plus".into(), "tau".into()],
            t_min: 10.0,
            t_max: None,
            cap: Some(1_000_000),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InducedOptions {
    /// Number of induced steps along each orbit.
    pub k: usize,
    pub depth: usize,
    pub ulam_bins: usize,
    pub min_coverage: f64,
    /// Terms of the sigma-finite density sum.
    pub sigma_terms: usize,
}

impl Default for InducedOptions {
    fn default() -> Self {
        InducedOptions { k: 10_000, depth: 120, ulam_bins: 200, min_coverage: 0.999, sigma_terms: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbOptions {
    pub target: String,
    pub eps: f64,
}

impl Default for PerturbOptions {
    fn default() -> Self {
        PerturbOptions { target: "F_star".into(), eps: 1e-3 }
    }
}

/// Grid over one map parameter. `ell` and `k` set both sides at once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    pub parameter: String,
    pub values: Vec<f64>,
}

pub const SWEEP_PARAMETERS: [&str; 12] =
    ["ell", "k", "ell1", "ell2", "k1", "k2", "a1", "a2", "b1", "b2", "iota", "eta_coeff"];

pub fn set_parameter(p: &MapParams, name: &str, v: f64) -> MapParams {
    let mut q = *p;
    match name {
        "ell" => (q.ell1, q.ell2) = (v, v),
        "k" => (q.k1, q.k2) = (v, v),
        "ell1" => q.ell1 = v,
        "ell2" => q.ell2 = v,
        "k1" => q.k1 = v,
        "k2" => q.k2 = v,
        "a1" => q.a1 = v,
        "a2" => q.a2 = v,
        "b1" => q.b1 = v,
        "b2" => q.b2 = v,
        "iota" => q.iota = v,
        "eta_coeff" => q.eta_coeff = v,
        _ => unreachable!("parameter names are validated on load"),
    }
    q
}

pub fn parse_target(s: &str) -> Option<ClassKind> {
    s.parse().ok()
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        self.map.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        let r = &self.run;
        if r.n == 0 {
            return bad("run.n must be at least 1".into());
        }
        if !(r.eps > 0.0 && r.eps < 1.0) {
            return bad(format!("run.eps must lie in (0, 1), got {}", r.eps));
        }
        if r.bins < 2 {
            return bad("run.bins must be at least 2".into());
        }
        if r.seed_indices().is_empty() {
            return bad("the seed list is empty".into());
        }
        if r.workers == Some(0) {
            return bad("run.workers must be at least 1".into());
        }
        let t = &self.tails;
        if t.samples < 1000 {
            return bad(format!("tails.samples must be at least 1000, got {}", t.samples));
        }
        if t.observables.is_empty() {
            return bad("tails.observables is empty".into());
        }
        for o in &t.observables {
            if o.parse::<intermap::stats::Observable>().is_err() {
                return bad(format!("unknown observable {o:?}; use tau_minus, tau_plus or tau"));
            }
        }
        if !(t.t_min >= 1.0) || t.t_max.is_some_and(|m| !(m > t.t_min)) {
            return bad("tails thresholds need 1 <= t_min < t_max".into());
        }
        let i = &self.induced;
        if i.k == 0 || i.depth < 2 || i.ulam_bins < 100 || i.sigma_terms < 4 {
            return bad("induced options need k >= 1, depth >= 2, ulam_bins >= 100, sigma_terms >= 4".into());
        }
        if i.sigma_terms > i.depth {
            return bad(format!("induced.sigma_terms ({}) cannot exceed induced.depth ({})", i.sigma_terms, i.depth));
        }
        if !(i.min_coverage > 0.0 && i.min_coverage <= 1.0) {
            return bad("induced.min_coverage must lie in (0, 1]".into());
        }
        if parse_target(&self.perturb.target).is_none() {
            return bad(format!("unknown target {:?}; use F, F_pm or F_star", self.perturb.target));
        }
        if !(self.perturb.eps > 0.0) {
            return bad("perturb.eps must be positive".into());
        }
        if let Some(s) = &self.sweep {
            if !SWEEP_PARAMETERS.contains(&s.parameter.as_str()) {
                return bad(format!("unknown sweep parameter {:?}", s.parameter));
            }
            if s.values.is_empty() {
                return bad("sweep.values is empty".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[map]\nell1 = 0.5\nell2 = 0.5\nk1 = 1.0\nk2 = 1.0\na1 = 2.0\na2 = 2.0\nb1 = 1.0\nb2 = 1.0\niota = 0.1\n";

    #[test]
    fn defaults_fill_missing_sections() {
        let c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.run.seed_indices(), vec![0]);
        assert_eq!(c.tails.observables.len(), 3);
        assert!(c.sweep.is_none());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = format!("{MINIMAL}[run]\nn = \"many\"\n");
        let e = ExperimentConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(e.contains("line 12"), "{e}");
        let e = ExperimentConfig::from_toml_str(&format!("{MINIMAL}bogus = 1\n")).unwrap_err();
        assert!(e.to_string().contains("bogus"));
    }

    #[test]
    fn rejects_out_of_range_options() {
        for extra in ["[run]\nseeds = []\n", "[run]\neps = 1.5\n", "[perturb]\ntarget = \"G\"\n", "[sweep]\nparameter = \"x\"\nvalues = [1.0]\n"] {
            assert!(ExperimentConfig::from_toml_str(&format!("{MINIMAL}{extra}")).is_err(), "{extra}");
        }
    }
}
