use nalgebra::DVector;

use super::{ErrorLaw, Family, Interval, LogLikDerivs, QuantileModel, RefLaw};
use crate::error::{Error, Result};

/// `y_i = μ + σ z_i` with `z_i` drawn from a standard error law; `θ = (μ, σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationScale {
    n: usize,
    law: ErrorLaw,
    inverted: bool,
}

pub fn make_location_scale(n: usize, error_law: ErrorLaw) -> Result<LocationScale> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!(
            "location-scale needs n >= 2, got {n}"
        )));
    }
    Ok(LocationScale {
        n,
        law: error_law,
        inverted: false,
    })
}

impl LocationScale {
    pub fn law(&self) -> ErrorLaw {
        self.law
    }

    /// Same model, tagged as living on inverted coordinates.
    pub(crate) fn as_inverted(&self) -> Self {
        Self {
            inverted: true,
            ..self.clone()
        }
    }
}

impl QuantileModel for LocationScale {
    fn family(&self) -> Family {
        match (self.law, self.inverted) {
            (_, true) => Family::InvertedCauchy,
            (ErrorLaw::Normal, false) => Family::LocationScale,
            (ErrorLaw::Cauchy, false) => Family::CauchyLocationScale,
        }
    }

    fn n(&self) -> usize {
        self.n
    }

    fn p(&self) -> usize {
        2
    }

    fn param_domain(&self) -> Vec<Interval> {
        vec![Interval::REAL, Interval::POSITIVE]
    }

    fn reference(&self) -> RefLaw {
        RefLaw::standard(self.law)
    }

    fn coord_quantile(&self, _i: usize, x: f64, theta: &[f64]) -> f64 {
        theta[0] + theta[1] * x
    }

    fn coord_dtheta(&self, _i: usize, x: f64, _theta: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        out[1] = x;
    }

    fn coord_d2theta(&self, _i: usize, _x: f64, _theta: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }

    fn coord_dx(&self, _i: usize, _x: f64, theta: &[f64]) -> f64 {
        theta[1]
    }

    fn coord_cross(&self, _i: usize, _x: f64, _theta: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = 1.0;
    }

    fn coord_inverse(&self, _i: usize, y: f64, theta: &[f64]) -> Option<f64> {
        Some((y - theta[0]) / theta[1])
    }

    fn closed_form_mle(&self, y: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        match self.law {
            ErrorLaw::Normal => {
                let n = y.len() as f64;
                let mean = y.sum() / n;
                let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                if var <= 0.0 {
                    return Some(Err(Error::SingularInformation(
                        "all observations equal: scale estimate is zero".into(),
                    )));
                }
                Some(Ok(DVector::from_vec(vec![mean, var.sqrt()])))
            }
            // two points: midpoint and half the gap, by equivariance and symmetry
            ErrorLaw::Cauchy if self.n == 2 => {
                let gap = (y[1] - y[0]).abs();
                if gap == 0.0 {
                    return Some(Err(Error::SingularInformation("coincident observations".into())));
                }
                Some(Ok(DVector::from_vec(vec![0.5 * (y[0] + y[1]), 0.5 * gap])))
            }
            ErrorLaw::Cauchy => None,
        }
    }

    fn initial_guess(&self, y: &DVector<f64>) -> DVector<f64> {
        match self.law {
            ErrorLaw::Normal => {
                let n = y.len() as f64;
                let mean = y.sum() / n;
                let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                DVector::from_vec(vec![mean, var.sqrt().max(1e-8)])
            }
            ErrorLaw::Cauchy => {
                // median and half the interquartile range
                let mut s: Vec<f64> = y.iter().cloned().collect();
                s.sort_by(|a, b| a.partial_cmp(b).expect("finite data"));
                let q = |f: f64| {
                    let pos = f * (s.len() - 1) as f64;
                    let lo = pos.floor() as usize;
                    let hi = pos.ceil() as usize;
                    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
                };
                let scale = 0.5 * (q(0.75) - q(0.25));
                let scale = if scale > 0.0 { scale } else { 0.5 * (s[s.len() - 1] - s[0]) };
                DVector::from_vec(vec![q(0.5), scale.max(1e-8)])
            }
        }
    }

    fn log_likelihood(&self, y: &DVector<f64>, theta: &[f64]) -> Result<f64> {
        let (mu, sigma) = (theta[0], theta[1]);
        let law = self.reference();
        Ok(y.iter()
            .map(|&v| law.log_density((v - mu) / sigma))
            .sum::<f64>()
            - self.n as f64 * sigma.ln())
    }

    fn loglik_derivatives(&self, y: &DVector<f64>, theta: &[f64]) -> Result<LogLikDerivs> {
        let (mu, sigma) = (theta[0], theta[1]);
        let law = self.reference();
        let n = self.n as f64;
        let (mut s_mu, mut s_sig) = (0.0, -n / sigma);
        let (mut h_mm, mut h_ms, mut h_ss) = (0.0, 0.0, n / (sigma * sigma));
        let mut value = -n * sigma.ln();
        let s2 = sigma * sigma;
        for &v in y.iter() {
            let z = (v - mu) / sigma;
            value += law.log_density(z);
            let (d1, d2) = law.log_density_derivs(z);
            s_mu += -d1 / sigma;
            s_sig += -d1 * z / sigma;
            h_mm += d2 / s2;
            h_ms += (d2 * z + d1) / s2;
            h_ss += (d2 * z * z + 2.0 * d1 * z) / s2;
        }
        Ok(LogLikDerivs {
            value,
            score: DVector::from_vec(vec![s_mu, s_sig]),
            hessian: nalgebra::DMatrix::from_row_slice(2, 2, &[h_mm, h_ms, h_ms, h_ss]),
        })
    }
}
