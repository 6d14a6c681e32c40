//! JSON configuration for the built-in families.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    invert_coordinates, make_circle, make_location_scale, make_nonlinear_regression, CircleMean,
    CurvedScalar, ErrorLaw, ExponentialMean, Family, LinearMean, MeanFunction, QuantileModel,
    SigmaMode,
};
use crate::error::{Error, Result};

/// Mean function of a regression family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EtaSpec {
    /// `ρ(cos θ, sin θ, 0, …)` in `ℝⁿ`.
    Circle { rho: f64, n: usize },
    /// `Xθ`; rows of the design matrix.
    Linear { design: Vec<Vec<f64>> },
    /// `θ₀ exp(−θ₁ t_i)`.
    Exponential { times: Vec<f64> },
}

impl EtaSpec {
    pub fn build(&self) -> Result<Arc<dyn MeanFunction>> {
        Ok(match self {
            EtaSpec::Circle { rho, n } => {
                if !(*rho > 0.0) {
                    return Err(Error::InvalidParameter(format!("circle radius must be positive, got {rho}")));
                }
                Arc::new(CircleMean { rho: *rho, n: *n })
            }
            EtaSpec::Linear { design } => {
                let rows = design.len();
                let cols = design.first().map_or(0, Vec::len);
                if rows == 0 || cols == 0 || design.iter().any(|r| r.len() != cols) {
                    return Err(Error::InvalidDimension("design must be a non-empty rectangular array".into()));
                }
                let flat: Vec<f64> = design.iter().flatten().cloned().collect();
                Arc::new(LinearMean {
                    design: DMatrix::from_row_slice(rows, cols, &flat),
                })
            }
            EtaSpec::Exponential { times } => Arc::new(ExponentialMean { times: times.clone() }),
        })
    }
}

/// `{"family": ..., "n": ..., "rho": ..., "sigma_mode": ..., "variance_scale": ...}`.
///
/// Only the keys relevant to the family may be set; unknown keys are rejected
/// at parse time and irrelevant ones at [`BuiltinModelSpec::build`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinModelSpec {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// Defaults to `1/n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_mode: Option<SigmaMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_law: Option<ErrorLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<EtaSpec>,
}

impl BuiltinModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn require_n(&self) -> Result<usize> {
        self.n
            .ok_or_else(|| Error::Config(format!("family {} requires \"n\"", self.family)))
    }

    fn forbid(&self, allowed: &[&str]) -> Result<()> {
        let set = [
            ("rho", self.rho.is_some()),
            ("variance_scale", self.variance_scale.is_some()),
            ("sigma_mode", self.sigma_mode.is_some()),
            ("error_law", self.error_law.is_some()),
            ("eta", self.eta.is_some()),
        ];
        for (key, present) in set {
            if present && !allowed.contains(&key) {
                return Err(Error::Config(format!("key \"{key}\" does not apply to family {}", self.family)));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Arc<dyn QuantileModel>> {
        match self.family {
            Family::LocationScale | Family::CauchyLocationScale | Family::InvertedCauchy => {
                self.forbid(&["error_law"])?;
                let default = if self.family == Family::LocationScale {
                    ErrorLaw::Normal
                } else {
                    ErrorLaw::Cauchy
                };
                let law = self.error_law.unwrap_or(default);
                if law != default {
                    return Err(Error::Config(format!("family {} has error law {default:?}", self.family)));
                }
                let base = make_location_scale(self.require_n()?, law)?;
                if self.family == Family::InvertedCauchy {
                    Ok(Arc::new(invert_coordinates(&base)?.model))
                } else {
                    Ok(Arc::new(base))
                }
            }
            Family::Circle2d | Family::CircleN => {
                self.forbid(&["rho", "variance_scale"])?;
                let n = match (self.family, self.n) {
                    (Family::Circle2d, None | Some(2)) => 2,
                    (Family::Circle2d, Some(n)) => {
                        return Err(Error::InvalidDimension(format!("circle2d has n = 2, got {n}")))
                    }
                    _ => self.require_n()?,
                };
                let rho = self
                    .rho
                    .ok_or_else(|| Error::Config("circle families require \"rho\"".into()))?;
                let vs = self.variance_scale.unwrap_or(1.0 / n as f64);
                Ok(Arc::new(make_circle(rho, n, vs)?))
            }
            Family::NonlinregKnownSigma | Family::NonlinregUnknownSigma => {
                self.forbid(&["sigma_mode", "eta"])?;
                let eta = self
                    .eta
                    .as_ref()
                    .ok_or_else(|| Error::Config("regression families require \"eta\"".into()))?
                    .build()?;
                if let Some(n) = self.n {
                    if n != eta.n() {
                        return Err(Error::InvalidDimension(format!(
                            "n = {n} but the mean function has {} coordinates",
                            eta.n()
                        )));
                    }
                }
                let mode = match (self.family, self.sigma_mode) {
                    (Family::NonlinregKnownSigma, Some(m @ SigmaMode::Known(_))) => m,
                    (Family::NonlinregUnknownSigma, None | Some(SigmaMode::Unknown)) => SigmaMode::Unknown,
                    (Family::NonlinregKnownSigma, _) => {
                        return Err(Error::Config("nonlinreg-known-sigma requires \"sigma_mode\": {\"known\": σ₀}".into()))
                    }
                    _ => return Err(Error::Config("nonlinreg-unknown-sigma takes \"sigma_mode\": \"unknown\"".into())),
                };
                let r = eta.r();
                Ok(Arc::new(make_nonlinear_regression(eta, r, mode)?))
            }
            Family::CurvedScalar => {
                self.forbid(&[])?;
                Ok(Arc::new(CurvedScalar::new(self.require_n()?)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_builds_each_family() {
        let cases = [
            (r#"{"family":"location-scale","n":5}"#, Family::LocationScale, 2),
            (r#"{"family":"cauchy-location-scale","n":4}"#, Family::CauchyLocationScale, 2),
            (r#"{"family":"inverted-cauchy","n":2}"#, Family::InvertedCauchy, 2),
            (r#"{"family":"circle2d","rho":1.0}"#, Family::Circle2d, 1),
            (r#"{"family":"circleN","n":6,"rho":2.0,"variance_scale":0.5}"#, Family::CircleN, 1),
            (
                r#"{"family":"nonlinreg-unknown-sigma","eta":{"kind":"exponential","times":[0,1,2,3]}}"#,
                Family::NonlinregUnknownSigma,
                3,
            ),
            (
                r#"{"family":"nonlinreg-known-sigma","sigma_mode":{"known":0.5},"eta":{"kind":"linear","design":[[1,0],[1,1],[1,2]]}}"#,
                Family::NonlinregKnownSigma,
                2,
            ),
            (r#"{"family":"curved-scalar","n":9}"#, Family::CurvedScalar, 1),
        ];
        for (text, fam, p) in cases {
            let m = BuiltinModelSpec::from_json(text).unwrap().build().unwrap();
            assert_eq!(m.family(), fam, "{text}");
            assert_eq!(m.p(), p, "{text}");
        }
    }

    #[test]
    fn rejects_unknown_and_irrelevant_keys() {
        assert!(matches!(
            BuiltinModelSpec::from_json(r#"{"family":"circle2d","rho":1,"colour":"red"}"#),
            Err(Error::Json(_))
        ));
        let s = BuiltinModelSpec::from_json(r#"{"family":"location-scale","n":3,"rho":1}"#).unwrap();
        assert!(matches!(s.build(), Err(Error::Config(_))));
        let s = BuiltinModelSpec::from_json(r#"{"family":"circle2d","rho":-1}"#).unwrap();
        assert!(matches!(s.build(), Err(Error::InvalidParameter(_))));
    }
}
