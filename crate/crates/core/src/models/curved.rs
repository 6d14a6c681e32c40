use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{Family, Interval, LogLikDerivs, QuantileModel, RefLaw};
use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Scalar-parameter model with curvature in both location and scale:
/// `y_i = c_i θ + k_i θ²/2 + x_i exp(b_i θ)`, `x_i ~ N(0, 1)`.
///
/// The coefficients are fixed smooth profiles over `u_i = (i + ½)/n`, so the
/// per-coordinate information stays bounded as `n` grows. None of its
/// contours are exactly ancillary, which makes it the test bed for the
/// partition-order study.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvedScalar {
    c: Vec<f64>,
    k: Vec<f64>,
    b: Vec<f64>,
}

impl CurvedScalar {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDimension(format!("curved-scalar needs n >= 2, got {n}")));
        }
        let u = |i: usize| (i as f64 + 0.5) / n as f64;
        Ok(Self {
            c: (0..n).map(|i| 1.0 + 0.5 * (2.0 * PI * u(i)).cos()).collect(),
            k: (0..n).map(|i| 0.3 + 0.8 * (2.0 * PI * u(i)).sin()).collect(),
            b: (0..n).map(|i| 0.2 * (2.0 * PI * u(i) + 1.0).cos()).collect(),
        })
    }

    fn resid(&self, i: usize, y: f64, t: f64) -> f64 {
        (y - self.c[i] * t - 0.5 * self.k[i] * t * t) * (-self.b[i] * t).exp()
    }
}

impl QuantileModel for CurvedScalar {
    fn family(&self) -> Family {
        Family::CurvedScalar
    }

    fn n(&self) -> usize {
        self.c.len()
    }

    fn p(&self) -> usize {
        1
    }

    fn param_domain(&self) -> Vec<Interval> {
        vec![Interval::REAL]
    }

    fn reference(&self) -> RefLaw {
        RefLaw::Normal { sd: 1.0 }
    }

    fn coord_quantile(&self, i: usize, x: f64, theta: &[f64]) -> f64 {
        let t = theta[0];
        self.c[i] * t + 0.5 * self.k[i] * t * t + x * (self.b[i] * t).exp()
    }

    fn coord_dtheta(&self, i: usize, x: f64, theta: &[f64], out: &mut [f64]) {
        let t = theta[0];
        out[0] = self.c[i] + self.k[i] * t + self.b[i] * x * (self.b[i] * t).exp();
    }

    fn coord_d2theta(&self, i: usize, x: f64, theta: &[f64], out: &mut [f64]) {
        let b = self.b[i];
        out[0] = self.k[i] + b * b * x * (b * theta[0]).exp();
    }

    fn coord_dx(&self, i: usize, _x: f64, theta: &[f64]) -> f64 {
        (self.b[i] * theta[0]).exp()
    }

    fn coord_cross(&self, i: usize, _x: f64, theta: &[f64], out: &mut [f64]) {
        out[0] = self.b[i] * (self.b[i] * theta[0]).exp();
    }

    fn coord_inverse(&self, i: usize, y: f64, theta: &[f64]) -> Option<f64> {
        Some(self.resid(i, y, theta[0]))
    }

    fn initial_guess(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for j in 0..=120 {
            let t = -6.0 + 0.1 * j as f64;
            if let Ok(l) = self.log_likelihood(y, &[t]) {
                if l > best.0 {
                    best = (l, t);
                }
            }
        }
        DVector::from_element(1, best.1)
    }

    fn log_likelihood(&self, y: &DVector<f64>, theta: &[f64]) -> Result<f64> {
        let t = theta[0];
        Ok((0..self.n())
            .map(|i| {
                let x = self.resid(i, y[i], t);
                -0.5 * x * x - LN_SQRT_2PI - self.b[i] * t
            })
            .sum())
    }

    fn loglik_derivatives(&self, y: &DVector<f64>, theta: &[f64]) -> Result<LogLikDerivs> {
        let t = theta[0];
        let (mut value, mut score, mut hess) = (0.0, 0.0, 0.0);
        for i in 0..self.n() {
            let (c, k, b) = (self.c[i], self.k[i], self.b[i]);
            let e = (-b * t).exp();
            let x = self.resid(i, y[i], t);
            let dx = -(c + k * t) * e - b * x;
            let d2x = -k * e + b * (c + k * t) * e - b * dx;
            value += -0.5 * x * x - LN_SQRT_2PI - b * t;
            score += -x * dx - b;
            hess += -dx * dx - x * d2x;
        }
        Ok(LogLikDerivs {
            value,
            score: DVector::from_element(1, score),
            hessian: DMatrix::from_element(1, 1, hess),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_likelihood_derivatives_agree() {
        let m = CurvedScalar::new(7).unwrap();
        let x = DVector::from_fn(7, |i, _| (i as f64 * 0.7).sin());
        let y = m.quantile(&x, &[0.4]);
        for i in 0..7 {
            assert!((m.coord_inverse(i, y[i], &[0.4]).unwrap() - x[i]).abs() < 1e-14);
        }
        let d = m.loglik_derivatives(&y, &[0.25]).unwrap();
        let h = 1e-5;
        let fd = (m.log_likelihood(&y, &[0.25 + h]).unwrap() - m.log_likelihood(&y, &[0.25 - h]).unwrap())
            / (2.0 * h);
        assert!((fd - d.score[0]).abs() < 1e-7);
        let sp = m.loglik_derivatives(&y, &[0.25 + h]).unwrap().score[0];
        let sm = m.loglik_derivatives(&y, &[0.25 - h]).unwrap().score[0];
        assert!(((sp - sm) / (2.0 * h) - d.hessian[(0, 0)]).abs() < 1e-6);
    }
}
