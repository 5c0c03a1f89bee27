//! Map parameters, the stickiness exponents and the class label.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_eta_coeff() -> f64 {
    0.1
}

/// Parameters of the local forms near the fixed points and the discontinuity.
///
/// `ell1`, `b1` describe the left fixed point -1, `ell2`, `b2` the right fixed
/// point +1. `k1`, `a1` describe the left branch near 0, `k2`, `a2` the right
/// branch near 0. `iota` is the half-width of the neighbourhood of 0 on which
/// the power forms hold. `eta_coeff` is the curvature `c` of the correction
/// term `c (1 -/+ x)^2` used when a fixed point is hyperbolic (`ell = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapParams {
    pub ell1: f64,
    pub ell2: f64,
    pub k1: f64,
    pub k2: f64,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub iota: f64,
    #[serde(default = "default_eta_coeff")]
    pub eta_coeff: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    /// Both exponents below one: an absolutely continuous physical measure.
    #[serde(rename = "F")]
    F,
    /// Left fixed point stickier: physical measure at -1.
    #[serde(rename = "F_minus")]
    FMinus,
    /// Right fixed point stickier: physical measure at +1.
    #[serde(rename = "F_plus")]
    FPlus,
    /// Equal exponents, at least one: no physical measure.
    #[serde(rename = "F_star")]
    FStar,
}

/// Target family for the perturbation construction. `Pm` covers both
/// one-sided classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassKind {
    #[serde(rename = "F")]
    F,
    #[serde(rename = "F_pm")]
    Pm,
    #[serde(rename = "F_star")]
    Star,
}

impl ClassLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClassLabel::F => "F",
            ClassLabel::FMinus => "F_minus",
            ClassLabel::FPlus => "F_plus",
            ClassLabel::FStar => "F_star",
        }
    }

    pub fn kind(&self) -> ClassKind {
        match self {
            ClassLabel::F => ClassKind::F,
            ClassLabel::FMinus | ClassLabel::FPlus => ClassKind::Pm,
            ClassLabel::FStar => ClassKind::Star,
        }
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ClassKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F" => Ok(ClassKind::F),
            "F_pm" | "F_minus" | "F_plus" | "Fpm" => Ok(ClassKind::Pm),
            "F_star" | "Fstar" => Ok(ClassKind::Star),
            other => Err(Error::InvalidInput(format!("unknown target class {other:?}"))),
        }
    }
}

impl std::fmt::Display for ClassKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClassKind::F => "F",
            ClassKind::Pm => "F_pm",
            ClassKind::Star => "F_star",
        })
    }
}

/// Integer regularity exponents of the approximation results.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regularity {
    pub r_pm: u32,
    pub r_tilde: u32,
    pub r_star: u32,
}

fn ceil_u(x: f64) -> u32 {
    x.ceil().max(0.0) as u32
}

impl MapParams {
    /// Stickiness of -1.
    pub fn beta_minus(&self) -> f64 {
        self.ell1 * self.k2
    }

    /// Stickiness of +1.
    pub fn beta_plus(&self) -> f64 {
        self.ell2 * self.k1
    }

    pub fn beta(&self) -> f64 {
        self.beta_minus().max(self.beta_plus())
    }

    /// Width of the chart around -1 on which the left fixed-point form holds.
    pub fn width_minus(&self) -> f64 {
        self.a2 * self.iota.powf(self.k2)
    }

    /// Width of the chart around +1 on which the right fixed-point form holds.
    pub fn width_plus(&self) -> f64 {
        self.a1 * self.iota.powf(self.k1)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("ell1", self.ell1),
            ("ell2", self.ell2),
            ("k1", self.k1),
            ("k2", self.k2),
            ("a1", self.a1),
            ("a2", self.a2),
            ("b1", self.b1),
            ("b2", self.b2),
            ("iota", self.iota),
            ("eta_coeff", self.eta_coeff),
        ];
        for (name, v) in all {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite")));
            }
        }
        if self.ell1 < 0.0 || self.ell2 < 0.0 {
            return Err(Error::InvalidParams("ell1 and ell2 must be non-negative".into()));
        }
        for (name, v) in [("k1", self.k1), ("k2", self.k2), ("a1", self.a1), ("a2", self.a2)] {
            if v <= 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be positive")));
            }
        }
        if self.b1 <= 0.0 || self.b2 <= 0.0 || self.eta_coeff <= 0.0 {
            return Err(Error::InvalidParams("b1, b2 and eta_coeff must be positive".into()));
        }
        if self.k1 == 1.0 && self.a1 <= 1.0 {
            return Err(Error::InvalidParams("k1 = 1 requires a1 > 1".into()));
        }
        if self.k2 == 1.0 && self.a2 <= 1.0 {
            return Err(Error::InvalidParams("k2 = 1 requires a2 > 1".into()));
        }
        if !(self.iota > 0.0 && self.iota < 1.0) {
            return Err(Error::InvalidParams("iota must lie in (0, 1)".into()));
        }
        let (wm, wp) = (self.width_minus(), self.width_plus());
        if wm + self.iota >= 1.0 || wp + self.iota >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "neighbourhoods overlap: a2*iota^k2 + iota = {:.4}, a1*iota^k1 + iota = {:.4}, both must be < 1",
                wm + self.iota,
                wp + self.iota
            )));
        }
        Ok(())
    }

    /// Parse a flat `key = value` configuration. Keys outside the parameter
    /// set are rejected.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let p: MapParams = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("parameters always serialize")
    }
}

/// Exact class membership from the stickiness exponents.
pub fn classify(p: &MapParams) -> ClassLabel {
    let (bm, bp) = (p.beta_minus(), p.beta_plus());
    if bm.max(bp) < 1.0 {
        ClassLabel::F
    } else if bm == bp {
        ClassLabel::FStar
    } else if bm > bp {
        ClassLabel::FMinus
    } else {
        ClassLabel::FPlus
    }
}

/// The integer regularity exponents for approximations inside each family.
///
/// The last two cases of `r_star` overlap when both exponents are at least one
/// and `k1 == k2`, and leave a gap when an exponent equals one and
/// `k1 > k2`; the `k2 >= k1` case is tried first and the other case uses
/// `>= 1` as well.
pub fn regularity_exponents(p: &MapParams) -> Regularity {
    let (bm, bp) = (p.beta_minus(), p.beta_plus());
    let (c1, c2) = (ceil_u(p.ell1), ceil_u(p.ell2));
    let r_pm = c1.max(c2);
    let (ik1, ik2) = (ceil_u(1.0 / p.k1), ceil_u(1.0 / p.k2));
    let r_tilde = if bp < 1.0 && bm >= 1.0 {
        ik2
    } else if bm < 1.0 && bp >= 1.0 {
        ik1
    } else {
        ik1.min(ik2)
    };
    let r_star = if bm.max(bp) < 1.0 {
        c1.min(c2)
    } else if bp < 1.0 {
        c2
    } else if bm < 1.0 {
        c1
    } else if p.k2 >= p.k1 {
        ceil_u(p.ell2 * p.k1 / p.k2).min(c1)
    } else {
        ceil_u(p.ell1 * p.k2 / p.k1).min(c2)
    };
    Regularity { r_pm, r_tilde, r_star }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(ell1: f64, ell2: f64, k1: f64, k2: f64) -> MapParams {
        MapParams { ell1, ell2, k1, k2, a1: 2.0, a2: 2.0, b1: 1.0, b2: 1.0, iota: 0.1, eta_coeff: 0.1 }
    }

    #[test]
    fn labels_for_reference_examples() {
        assert_eq!(classify(&params(0.5, 0.5, 1.0, 1.0)), ClassLabel::F);
        assert_eq!(classify(&params(2.0, 0.25, 1.0, 1.0)), ClassLabel::FMinus);
        assert_eq!(classify(&params(1.0, 1.0, 1.0, 1.0)), ClassLabel::FStar);
        assert_eq!(classify(&params(0.25, 2.0, 1.0, 1.0)), ClassLabel::FPlus);
    }

    #[test]
    fn boundary_case_beta_one_is_not_f() {
        assert_eq!(classify(&params(1.0, 0.5, 1.0, 1.0)), ClassLabel::FMinus);
    }

    #[test]
    fn regularity_reference_values() {
        for r in 1..=5 {
            let rf = r as f64;
            let p = MapParams { a1: 0.5, a2: 0.5, ..params(rf, rf, 1.0 / rf, 1.0 / rf) };
            let reg = regularity_exponents(&p);
            assert_eq!(reg.r_tilde, r);
            assert_eq!(reg.r_pm, r);
        }
        assert_eq!(regularity_exponents(&params(0.0, 0.0, 1.0, 1.0)).r_pm, 0);
        // beta+ < 1 <= beta-, k2 = 0.4
        let p = params(3.0, 0.1, 1.0, 0.4);
        assert!(p.beta_plus() < 1.0 && p.beta_minus() >= 1.0);
        assert_eq!(regularity_exponents(&p).r_tilde, 3);
    }

    #[test]
    fn r_star_gap_case_is_covered() {
        // beta- = beta+ = 1 with k1 > k2
        let p = params(2.0, 0.5, 2.0, 0.5);
        assert_eq!(p.beta_minus(), 1.0);
        assert_eq!(p.beta_plus(), 1.0);
        let reg = regularity_exponents(&p);
        assert_eq!(reg.r_star, 1);
    }

    #[test]
    fn toml_roundtrip_and_unknown_keys() {
        let p = params(1.5, 0.5, 1.0, 2.0);
        let back = MapParams::from_toml_str(&p.to_toml_string()).unwrap();
        assert_eq!(p, back);
        let bad = "ell1=1\nell2=1\nk1=1\nk2=1\na1=2\na2=2\nb1=1\nb2=1\niota=0.1\nfoo=3\n";
        assert!(matches!(MapParams::from_toml_str(bad), Err(Error::Config(_))));
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut p = params(1.0, 1.0, 1.0, 1.0);
        p.a1 = 0.9;
        assert!(p.validate().is_err());
        let mut p = params(1.0, 1.0, 1.0, 1.0);
        p.iota = 0.6;
        assert!(p.validate().is_err());
        let mut p = params(1.0, 1.0, 1.0, 1.0);
        p.ell1 = -0.5;
        assert!(p.validate().is_err());
    }
}
