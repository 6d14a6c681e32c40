use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::ContourCloud;
use crate::error::{Error, Result};
use crate::models::{Family, QuantileModel};

/// Exact ancillary label for the families that have one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExactComparator {
    /// Standardized residual configuration `(y − ȳ1)/s_y` (divisor `n`).
    Configuration,
    /// Distance from the circle centre in the first two coordinates, with
    /// the remaining coordinates unchanged.
    Radial,
}

impl ExactComparator {
    pub fn for_model(model: &dyn QuantileModel) -> Result<Self> {
        match model.family() {
            Family::LocationScale | Family::CauchyLocationScale | Family::InvertedCauchy => Ok(Self::Configuration),
            Family::Circle2d | Family::CircleN => Ok(Self::Radial),
            f => Err(Error::UnsupportedFamily(format!("no exact ancillary known for {f}"))),
        }
    }

    pub fn label(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Self::Configuration => {
                let n = y.len() as f64;
                let mean = y.iter().sum::<f64>() / n;
                let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                y.iter().map(|v| (v - mean) / sd).collect()
            }
            Self::Radial => {
                let mut out = vec![y[0].hypot(y[1])];
                out.extend_from_slice(&y[2..]);
                out
            }
        }
    }

    /// A point of the exact contour through `y0`: the group element `(t₀, e^{t₁})`
    /// applied to the configuration, or rotation of the first two coordinates by `t₀`.
    pub fn exact_contour_point(&self, y0: &[f64], t: &[f64]) -> Vec<f64> {
        match self {
            Self::Configuration => {
                let c = self.label(y0);
                let s = t[1].exp();
                c.iter().map(|v| t[0] + s * v).collect()
            }
            Self::Radial => {
                let (c, s) = (t[0].cos(), t[0].sin());
                let mut out = y0.to_vec();
                out[0] = c * y0[0] - s * y0[1];
                out[1] = s * y0[0] + c * y0[1];
                out
            }
        }
    }
}

/// How far an approximate contour strays from the exact one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactComparison {
    pub family: Family,
    pub comparator: ExactComparator,
    /// Largest deviation of the exact label from its value at `y⁰`, over the cloud.
    pub label_spread: f64,
    /// `(ρ, r⁰)`: curvature radius of the approximate and of the exact contour.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<[f64; 2]>,
}

pub fn compare_exact(model: &dyn QuantileModel, cloud: &ContourCloud) -> Result<ExactComparison> {
    let comparator = ExactComparator::for_model(model)?;
    let base = comparator.label(&cloud.base_point);
    let label_spread = cloud
        .points
        .iter()
        .map(|p| {
            comparator
                .label(p)
                .iter()
                .zip(&base)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let radii = match comparator {
        ExactComparator::Radial => {
            let rho = model
                .circle_radius()
                .ok_or_else(|| Error::UnsupportedFamily("circle family without a radius".into()))?;
            let y0 = DVector::from_column_slice(&cloud.base_point);
            Some([rho, y0[0].hypot(y0[1])])
        }
        ExactComparator::Configuration => None,
    };
    Ok(ExactComparison {
        family: model.family(),
        comparator,
        label_spread,
        radii,
    })
}
