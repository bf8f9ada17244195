//! Problem instance and its closed-form constants.
//!
//! A [`Params`] fixes the dimension `n`, diffusion exponent `m`, rate `rho1`,
//! scaling exponent `beta`, profile normalization `lambda` and extinction
//! horizon `T`. Everything else ([`DerivedConstants`]) is a polynomial or
//! rational expression in those numbers and is evaluated directly, with
//! `m = 0` treated as an ordinary value.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The user-chosen problem instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub n: u32,
    pub m: f64,
    pub rho1: f64,
    pub beta: f64,
    pub lambda: f64,
    #[serde(rename = "T")]
    pub t_horizon: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            n: 3,
            m: 0.0,
            rho1: 1.0,
            beta: 1.0,
            lambda: 1.0,
            t_horizon: 1.0,
        }
    }
}

/// One violated constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite(&'static str),
    DimensionTooSmall { n: u32 },
    NegativeExponent { m: f64 },
    ExponentAboveCritical { m: f64, critical: f64 },
    NonPositive(&'static str),
    BetaBelowThreshold { beta: f64, beta0: f64 },
    BetaAtThreshold { beta: f64, beta0: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite(name) => write!(f, "{name} is not finite"),
            Violation::DimensionTooSmall { n } => write!(f, "n = {n} but n >= 3 is required"),
            Violation::NegativeExponent { m } => write!(f, "m = {m} is negative"),
            Violation::ExponentAboveCritical { m, critical } => {
                write!(f, "m = {m} is not below (n-2)/n = {critical}")
            }
            Violation::NonPositive(name) => write!(f, "{name} must be positive"),
            Violation::BetaBelowThreshold { beta, beta0 } => {
                write!(f, "beta = {beta} is below beta0 = {beta0}")
            }
            Violation::BetaAtThreshold { beta, beta0 } => {
                write!(f, "beta = {beta} must exceed beta0 = {beta0} (strict regime)")
            }
        }
    }
}

/// Result of [`Params::validate`]. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub strict: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            let msg = self
                .violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::InvalidParams(msg))
        }
    }
}

impl Params {
    /// Upper end `(n-2)/n` of the admissible exponent range.
    pub fn critical_m(&self) -> f64 {
        (self.n as f64 - 2.0) / self.n as f64
    }

    /// Threshold `beta0 = m rho1 / (n - 2 - n m)`; `None` when the denominator
    /// is not positive.
    pub fn beta0(&self) -> Option<f64> {
        let n = self.n as f64;
        let denom = n - 2.0 - n * self.m;
        (denom > 0.0).then(|| self.m * self.rho1 / denom)
    }

    pub fn with_m(self, m: f64) -> Self {
        Self { m, ..self }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    /// Check every parameter constraint. `strict` additionally demands
    /// `beta > beta0`, which the expansion, uniqueness and everything built
    /// on the integrated profile rely on.
    pub fn validate(&self, strict: bool) -> ValidationReport {
        let mut violations = Vec::new();
        for (name, value) in [
            ("m", self.m),
            ("rho1", self.rho1),
            ("beta", self.beta),
            ("lambda", self.lambda),
            ("T", self.t_horizon),
        ] {
            if !value.is_finite() {
                violations.push(Violation::NonFinite(name));
            }
        }
        if !violations.is_empty() {
            return ValidationReport { strict, violations };
        }

        if self.n < 3 {
            violations.push(Violation::DimensionTooSmall { n: self.n });
        }
        if self.m < 0.0 {
            violations.push(Violation::NegativeExponent { m: self.m });
        }
        if self.n >= 3 && self.m >= self.critical_m() {
            violations.push(Violation::ExponentAboveCritical {
                m: self.m,
                critical: self.critical_m(),
            });
        }
        for (name, value) in [
            ("rho1", self.rho1),
            ("lambda", self.lambda),
            ("T", self.t_horizon),
        ] {
            if value <= 0.0 {
                violations.push(Violation::NonPositive(name));
            }
        }
        if let Some(beta0) = self.beta0() {
            if self.beta < beta0 {
                violations.push(Violation::BetaBelowThreshold { beta: self.beta, beta0 });
            } else if strict && self.beta <= beta0 {
                violations.push(Violation::BetaAtThreshold { beta: self.beta, beta0 });
            }
        }
        ValidationReport { strict, violations }
    }

    /// Evaluate every closed-form constant.
    pub fn derive(&self) -> Result<DerivedConstants> {
        DerivedConstants::new(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Closed-form constants of a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// `(2 beta + rho1) / (1 - m)`.
    pub alpha_m: f64,
    /// `2 beta + rho1`, the exponent of the logarithmic (`m = 0`) problem.
    pub alpha: f64,
    pub beta0: f64,
    pub beta1_0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    #[serde(rename = "A1")]
    pub big_a1: f64,
    #[serde(rename = "A2")]
    pub big_a2: f64,
    #[serde(rename = "Cm")]
    pub c_m: f64,
    /// Far-field limit of `r^2 v(r)` for the logarithmic profile.
    pub w_inf: f64,
    /// Alternative subsequential limit `2 / beta`; only defined for `beta > 0`.
    pub w1: Option<f64>,
}

impl DerivedConstants {
    pub fn new(p: &Params) -> Result<Self> {
        let n = p.n as f64;
        let m = p.m;
        let rho1 = p.rho1;
        let beta = p.beta;
        let denom = n - 2.0 - n * m;
        if denom <= 0.0 {
            return Err(Error::Domain(format!(
                "n - 2 - n m = {denom} must be positive (n = {}, m = {m})",
                p.n
            )));
        }
        if beta == 0.0 {
            return Err(Error::Domain("beta = 0 makes the profile exponents singular".into()));
        }

        let alpha = 2.0 * beta + rho1;
        let alpha_m = alpha / (1.0 - m);
        let a1 = ((n - 2.0) * beta - 2.0 * m * alpha_m + rho1) / rho1;
        let a2 = beta * beta / rho1;
        let a3 = (alpha_m * beta * (n - 2.0) - m * alpha_m * alpha_m) / (rho1 * rho1);
        let c_m = alpha_m / (rho1 * beta) * (n - 2.0 - m * alpha_m / beta);

        Ok(Self {
            alpha_m,
            alpha,
            beta0: m * rho1 / denom,
            beta1_0: rho1 / (n - 2.0),
            a1,
            a2,
            a3,
            big_a1: a3 / a2,
            big_a2: a3 * (m * a3 - a1) / (a2 * a2),
            c_m,
            // alpha - 2 beta = rho1 identically.
            w_inf: 2.0 * (n - 2.0) / rho1,
            w1: (beta > 0.0).then(|| 2.0 / beta),
        })
    }
}

/// The two-sided envelope bound needs `n - 2 - 2 m alpha_m / beta > 0`.
pub fn envelope_admissible(p: &Params, c: &DerivedConstants) -> bool {
    p.n as f64 - 2.0 - 2.0 * p.m * c.alpha_m / p.beta > 0.0
}

/// `C_0 = (2 beta + rho1)(n - 2) / (rho1 beta)`, the `m -> 0` limit of `C_m`.
pub fn c0(p: &Params) -> f64 {
    (2.0 * p.beta + p.rho1) * (p.n as f64 - 2.0) / (p.rho1 * p.beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(n: u32, m: f64, rho1: f64, beta: f64) -> Params {
        Params {
            n,
            m,
            rho1,
            beta,
            ..Params::default()
        }
    }

    #[test]
    fn critical_exponent_is_rejected() {
        let report = p(3, 1.0 / 3.0, 1.0, 1.0).validate(true);
        assert!(!report.is_valid());
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::ExponentAboveCritical { .. })));
    }

    #[test]
    fn beta_below_threshold_strict() {
        let params = p(5, 0.2, 1.0, 0.05);
        assert_relative_eq!(params.beta0().unwrap(), 0.1, epsilon = 1e-15);
        let report = params.validate(true);
        assert!(matches!(
            report.violations.as_slice(),
            [Violation::BetaBelowThreshold { .. }]
        ));
    }

    #[test]
    fn threshold_is_allowed_only_non_strict() {
        let params = p(5, 0.2, 1.0, 0.1);
        assert!(params.validate(false).is_valid());
        assert!(!params.validate(true).is_valid());
    }

    #[test]
    fn zero_m_has_zero_threshold() {
        assert!(p(3, 0.0, 1.0, 1.0).validate(true).is_valid());
        assert_eq!(p(3, 0.0, 1.0, 1.0).beta0(), Some(0.0));
    }

    #[test]
    fn misc_violations() {
        let mut bad = p(2, -0.1, -1.0, 1.0);
        bad.lambda = 0.0;
        bad.t_horizon = f64::NAN;
        let report = bad.validate(false);
        assert_eq!(report.violations, vec![Violation::NonFinite("T")]);
        bad.t_horizon = 1.0;
        let report = bad.validate(false);
        assert!(report.violations.contains(&Violation::DimensionTooSmall { n: 2 }));
        assert!(report.violations.contains(&Violation::NegativeExponent { m: -0.1 }));
        assert!(report.violations.contains(&Violation::NonPositive("rho1")));
        assert!(report.violations.contains(&Violation::NonPositive("lambda")));
        assert!(report.into_result().is_err());
    }

    #[test]
    fn derive_n3_m0() {
        let c = p(3, 0.0, 1.0, 1.0).derive().unwrap();
        assert_eq!(c.alpha_m, 3.0);
        assert_eq!(c.a1, 2.0);
        assert_eq!(c.a2, 1.0);
        assert_eq!(c.a3, 3.0);
        assert_eq!(c.big_a1, 3.0);
        assert_eq!(c.big_a2, -6.0);
        assert_eq!(c.w_inf, 2.0);
        assert_eq!(c.c_m, 3.0);
        assert_eq!(c.w1, Some(2.0));
    }

    #[test]
    fn derive_n5_m02() {
        let c = p(5, 0.2, 1.0, 1.0).derive().unwrap();
        assert_relative_eq!(c.alpha_m, 3.75, max_relative = 1e-14);
        assert_relative_eq!(c.beta0, 0.1, max_relative = 1e-14);
        assert_relative_eq!(c.a1, 2.5, max_relative = 1e-14);
        assert_relative_eq!(c.a2, 1.0, max_relative = 1e-14);
        assert_relative_eq!(c.a3, 8.4375, max_relative = 1e-14);
        assert_relative_eq!(c.big_a1, 8.4375, max_relative = 1e-14);
        assert_relative_eq!(c.big_a2, -6.85546875, max_relative = 1e-14);
    }

    #[test]
    fn derive_rejects_supercritical() {
        assert!(matches!(p(3, 0.4, 1.0, 1.0).derive(), Err(Error::Domain(_))));
    }

    #[test]
    fn json_ingest_requires_every_key() {
        let ok = r#"{"n":3,"m":0.0,"rho1":1.0,"beta":1.0,"lambda":1.0,"T":1.0}"#;
        assert_eq!(Params::from_json(ok).unwrap(), Params::default());
        let missing = r#"{"n":3,"m":0.0,"rho1":1.0,"lambda":1.0,"T":1.0}"#;
        let err = Params::from_json(missing).unwrap_err().to_string();
        assert!(err.contains("beta"), "{err}");
        let extra = r#"{"n":3,"m":0.0,"rho1":1.0,"beta":1,"lambda":1.0,"T":1.0,"x":2}"#;
        assert!(Params::from_json(extra).is_err());
    }

    #[test]
    fn c_m_tends_to_c0() {
        let base = Params::default();
        let c0 = c0(&base);
        let mut prev = f64::INFINITY;
        for m in [0.1, 0.01, 0.001, 0.0001] {
            let gap = (base.with_m(m).derive().unwrap().c_m - c0).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert_eq!(base.derive().unwrap().c_m, c0);
    }
}
