//! Quantile-function models.
//!
//! A model is a coordinate-wise map `y_i = y_i(x_i; θ)` from a reference
//! variable `x` with a fixed distribution to the response `y`. Everything
//! else in the crate (likelihood, tangent and curvature arrays, contours) is
//! derived from this map and its analytic derivatives.

mod curved;
mod inversion;
mod location_scale;
mod reference;
mod regression;
mod spec;

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::VectorArray;
use crate::rng::replicate_rng;

pub use curved::CurvedScalar;
pub use inversion::{invert_coordinates, inverted_params, CoordinateInversion, InvertedCauchy};
pub use location_scale::{make_location_scale, LocationScale};
pub use reference::{ErrorLaw, Interval, RefLaw};
pub use regression::{
    make_circle, make_nonlinear_regression, CircleMean, ExponentialMean, LinearMean, MeanFunction,
    NonlinearRegression, SigmaMode,
};
pub use spec::{BuiltinModelSpec, EtaSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "location-scale")]
    LocationScale,
    #[serde(rename = "circle2d")]
    Circle2d,
    #[serde(rename = "circleN")]
    CircleN,
    #[serde(rename = "nonlinreg-known-sigma")]
    NonlinregKnownSigma,
    #[serde(rename = "nonlinreg-unknown-sigma")]
    NonlinregUnknownSigma,
    #[serde(rename = "cauchy-location-scale")]
    CauchyLocationScale,
    #[serde(rename = "inverted-cauchy")]
    InvertedCauchy,
    #[serde(rename = "curved-scalar")]
    CurvedScalar,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        write!(f, "{}", s.as_str().unwrap_or("?"))
    }
}

/// Log-likelihood with its gradient and Hessian in the natural parameter.
#[derive(Debug, Clone)]
pub struct LogLikDerivs {
    pub value: f64,
    pub score: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// A statistical model presented by its coordinate-wise quantile function.
///
/// Implementors supply the per-coordinate map and its derivatives; the
/// vector-level methods are assembled from those. `theta` slices always have
/// length [`QuantileModel::p`].
pub trait QuantileModel: Send + Sync + fmt::Debug {
    fn family(&self) -> Family;
    fn n(&self) -> usize;
    fn p(&self) -> usize;
    fn param_domain(&self) -> Vec<Interval>;
    fn reference(&self) -> RefLaw;

    fn coord_quantile(&self, i: usize, x: f64, theta: &[f64]) -> f64;
    /// `∂y_i/∂θ_α` written into `out[α]`.
    fn coord_dtheta(&self, i: usize, x: f64, theta: &[f64], out: &mut [f64]);
    /// `∂²y_i/∂θ_α∂θ_β` written row-major into `out[α * p + β]`.
    fn coord_d2theta(&self, i: usize, x: f64, theta: &[f64], out: &mut [f64]);
    fn coord_dx(&self, i: usize, x: f64, theta: &[f64]) -> f64;
    /// Cross Hessian `∂²y_i/∂x_i∂θ_α` written into `out[α]`.
    fn coord_cross(&self, i: usize, x: f64, theta: &[f64], out: &mut [f64]);

    /// Closed-form inverse of the coordinate quantile, when one exists.
    fn coord_inverse(&self, _i: usize, _y: f64, _theta: &[f64]) -> Option<f64> {
        None
    }

    /// Closed-form maximum likelihood value, for families that have one.
    fn closed_form_mle(&self, _y: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        None
    }

    /// Starting value for iterative likelihood maximization.
    fn initial_guess(&self, y: &DVector<f64>) -> DVector<f64>;

    /// Reference value whose image is the "fitted value" `ŷ = y(x_c; θ)`.
    fn reference_center(&self) -> f64 {
        0.0
    }

    /// Radius `ρ` for the circle families.
    fn circle_radius(&self) -> Option<f64> {
        None
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        theta.len() == self.p()
            && self
                .param_domain()
                .iter()
                .zip(theta)
                .all(|(iv, &t)| iv.contains(t))
    }

    fn quantile(&self, x: &DVector<f64>, theta: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.n(), |i, _| self.coord_quantile(i, x[i], theta))
    }

    /// Velocity array `V`: column `α` is `∂y/∂θ_α`.
    fn dquantile_dtheta(&self, x: &DVector<f64>, theta: &[f64]) -> DMatrix<f64> {
        let (n, p) = (self.n(), self.p());
        let mut m = DMatrix::zeros(n, p);
        let mut row = vec![0.0; p];
        for i in 0..n {
            self.coord_dtheta(i, x[i], theta, &mut row);
            for a in 0..p {
                m[(i, a)] = row[a];
            }
        }
        m
    }

    /// Acceleration array `W` of second parameter derivatives.
    fn d2quantile_dtheta2(&self, x: &DVector<f64>, theta: &[f64]) -> VectorArray {
        let (n, p) = (self.n(), self.p());
        let mut w = VectorArray::zeros(n, p);
        let mut buf = vec![0.0; p * p];
        for i in 0..n {
            self.coord_d2theta(i, x[i], theta, &mut buf);
            for a in 0..p {
                for b in a..p {
                    w.set_sym(i, a, b, buf[a * p + b]);
                }
            }
        }
        w
    }

    fn dquantile_dx(&self, x: &DVector<f64>, theta: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.n(), |i, _| self.coord_dx(i, x[i], theta))
    }

    /// Cross Hessian `B` (n × p).
    fn cross_hessian(&self, x: &DVector<f64>, theta: &[f64]) -> DMatrix<f64> {
        let (n, p) = (self.n(), self.p());
        let mut m = DMatrix::zeros(n, p);
        let mut row = vec![0.0; p];
        for i in 0..n {
            self.coord_cross(i, x[i], theta, &mut row);
            for a in 0..p {
                m[(i, a)] = row[a];
            }
        }
        m
    }

    /// Sum of coordinate log densities of the reference variable.
    fn ref_log_density(&self, x: &DVector<f64>) -> f64 {
        let law = self.reference();
        x.iter().map(|&v| law.log_density(v)).sum()
    }

    fn sample_reference(&self, rng: &mut dyn rand::RngCore) -> DVector<f64> {
        let law = self.reference();
        DVector::from_fn(self.n(), |_, _| law.sample(rng))
    }

    /// `count` reference draws; draw `k` depends only on `(seed, k)`.
    fn ref_sampler(&self, seed: u64, count: usize) -> Vec<DVector<f64>> {
        (0..count)
            .map(|k| {
                let mut rng = replicate_rng(seed, 0, k as u64);
                self.sample_reference(&mut rng)
            })
            .collect()
    }

    /// Solve `y = y_i(x; θ)` for `x`, coordinate `i`.
    fn solve_reference(&self, i: usize, y: f64, theta: &[f64]) -> Result<f64> {
        if let Some(x) = self.coord_inverse(i, y, theta) {
            return Ok(x);
        }
        solve_monotone(|x| self.coord_quantile(i, x, theta) - y, |x| self.coord_dx(i, x, theta))
            .ok_or(Error::ReferenceSolveFailure { coordinate: i, y })
    }

    /// `log f(y; θ) = Σ l(x_i) − log ∂y_i/∂x_i` with `x = x(y; θ)`.
    fn log_likelihood(&self, y: &DVector<f64>, theta: &[f64]) -> Result<f64> {
        let law = self.reference();
        let mut s = 0.0;
        for i in 0..self.n() {
            let x = self.solve_reference(i, y[i], theta)?;
            s += law.log_density(x) - self.coord_dx(i, x, theta).ln();
        }
        Ok(s)
    }

    /// Log-likelihood derivatives. The default uses central differences of
    /// [`QuantileModel::log_likelihood`]; the built-in families override it.
    fn loglik_derivatives(&self, y: &DVector<f64>, theta: &[f64]) -> Result<LogLikDerivs> {
        let p = self.p();
        let value = self.log_likelihood(y, theta)?;
        let steps: Vec<f64> = theta.iter().map(|t| 1e-4 * t.abs().max(1.0)).collect();
        let eval = |d: &[(usize, f64)]| -> Result<f64> {
            let mut th = theta.to_vec();
            for &(a, s) in d {
                th[a] += s;
            }
            self.log_likelihood(y, &th)
        };
        let mut score = DVector::zeros(p);
        let mut hessian = DMatrix::zeros(p, p);
        for a in 0..p {
            let h = steps[a];
            let fp = eval(&[(a, h)])?;
            let fm = eval(&[(a, -h)])?;
            score[a] = (fp - fm) / (2.0 * h);
            hessian[(a, a)] = (fp - 2.0 * value + fm) / (h * h);
            for b in 0..a {
                let k = steps[b];
                let v = (eval(&[(a, h), (b, k)])? - eval(&[(a, h), (b, -k)])?
                    - eval(&[(a, -h), (b, k)])?
                    + eval(&[(a, -h), (b, -k)])?)
                    / (4.0 * h * k);
                hessian[(a, b)] = v;
                hessian[(b, a)] = v;
            }
        }
        Ok(LogLikDerivs {
            value,
            score,
            hessian,
        })
    }
}

/// Root of an increasing function by expanding bracket plus safeguarded Newton.
fn solve_monotone(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Option<f64> {
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut expansions = 0;
    while f(lo) > 0.0 || f(hi) < 0.0 {
        if f(lo) > 0.0 {
            lo *= 2.0;
        }
        if f(hi) < 0.0 {
            hi *= 2.0;
        }
        expansions += 1;
        if expansions > 200 || !lo.is_finite() || !hi.is_finite() {
            return None;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return Some(x);
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = df(x);
        let mut next = x - fx / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) || hi - lo <= 1e-15 * (1.0 + x.abs()) {
            return Some(next);
        }
        x = next;
    }
    Some(x)
}
