use nalgebra::DVector;

use super::{make_location_scale, ErrorLaw, Family, LocationScale, QuantileModel};
use crate::error::{Error, Result};

/// Coordinate-wise reciprocal `ỹ_i = 1/y_i`, defined only when no coordinate is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoordinateInversion {
    pub n: usize,
}

impl CoordinateInversion {
    pub fn is_invertible(&self, y: &DVector<f64>) -> bool {
        y.len() == self.n && y.iter().all(|&v| v != 0.0 && v.is_finite())
    }

    pub fn forward(&self, y: &DVector<f64>) -> Option<DVector<f64>> {
        self.is_invertible(y).then(|| y.map(|v| 1.0 / v))
    }

    /// The reciprocal is an involution, so the back map is the same formula.
    pub fn back(&self, y_tilde: &DVector<f64>) -> Option<DVector<f64>> {
        self.forward(y_tilde)
    }
}

/// Cauchy location-scale model carried to reciprocal coordinates.
#[derive(Debug, Clone)]
pub struct InvertedCauchy {
    /// Model for `ỹ`: again Cauchy location-scale, in `(μ̃, σ̃)`.
    pub model: LocationScale,
    pub map: CoordinateInversion,
}

/// `(μ̃, σ̃) = (μ, σ)/(μ² + σ²)`.
pub fn inverted_params(mu: f64, sigma: f64) -> (f64, f64) {
    let d = mu * mu + sigma * sigma;
    (mu / d, sigma / d)
}

pub fn invert_coordinates(model: &dyn QuantileModel) -> Result<InvertedCauchy> {
    if model.family() != Family::CauchyLocationScale {
        return Err(Error::UnsupportedFamily(format!(
            "reciprocal transform needs a Cauchy location-scale model, got {}",
            model.family()
        )));
    }
    let n = model.n();
    Ok(InvertedCauchy {
        model: make_location_scale(n, ErrorLaw::Cauchy)?.as_inverted(),
        map: CoordinateInversion { n },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_map_examples() {
        assert_eq!(inverted_params(0.0, 1.0), (0.0, 1.0));
        assert_eq!(inverted_params(1.0, 1.0), (0.5, 0.5));
    }

    #[test]
    fn zero_coordinates_are_not_invertible() {
        let map = CoordinateInversion { n: 2 };
        assert!(!map.is_invertible(&DVector::from_vec(vec![0.5, 0.0])));
        assert!(map.forward(&DVector::from_vec(vec![0.0, 1.0])).is_none());
        let y = DVector::from_vec(vec![2.0, -4.0]);
        assert_eq!(map.forward(&y).unwrap().as_slice(), &[0.5, -0.25]);
        assert_eq!(map.back(&map.forward(&y).unwrap()).unwrap(), y);
    }

    #[test]
    fn only_cauchy_is_supported() {
        let normal = make_location_scale(3, ErrorLaw::Normal).unwrap();
        assert!(matches!(invert_coordinates(&normal), Err(Error::UnsupportedFamily(_))));
        let cauchy = make_location_scale(3, ErrorLaw::Cauchy).unwrap();
        let inv = invert_coordinates(&cauchy).unwrap();
        assert_eq!(inv.model.family(), Family::InvertedCauchy);
        assert_eq!(inv.map.n, 3);
    }

    #[test]
    fn reciprocal_of_cauchy_is_cauchy_with_mapped_parameters() {
        // P(1/Y <= t) for t > 0 equals P(Y >= 1/t) + P(Y < 0); compare with the mapped law.
        let (mu, sigma) = (0.7, 1.3);
        let (mt, st) = inverted_params(mu, sigma);
        let cdf = |v: f64, m: f64, s: f64| 0.5 + ((v - m) / s).atan() / std::f64::consts::PI;
        for &t in &[0.1, 0.4, 1.0, 3.0] {
            let lhs = (1.0 - cdf(1.0 / t, mu, sigma)) + cdf(0.0, mu, sigma);
            assert!((lhs - cdf(t, mt, st)).abs() < 1e-12);
        }
    }
}
