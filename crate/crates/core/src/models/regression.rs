//! Nonlinear regression `y = η(θ) + error`, including the circle model.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Family, Interval, LogLikDerivs, QuantileModel, RefLaw};
use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A smooth regression surface `η: ℝʳ → ℝⁿ`, evaluated one coordinate at a time.
pub trait MeanFunction: Send + Sync + fmt::Debug {
    fn n(&self) -> usize;
    fn r(&self) -> usize;
    fn value(&self, i: usize, beta: &[f64]) -> f64;
    fn gradient(&self, i: usize, beta: &[f64], out: &mut [f64]);
    /// Row-major `r × r` Hessian of `η_i`.
    fn hessian(&self, i: usize, beta: &[f64], out: &mut [f64]);

    /// Least-squares fit in closed form, when available.
    fn closed_form_fit(&self, _y: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        None
    }

    /// Box searched by the coarse least-squares grid used for initialization.
    fn init_box(&self, y: &DVector<f64>) -> Vec<(f64, f64)>;

    fn initial_guess(&self, y: &DVector<f64>) -> DVector<f64> {
        if let Some(Ok(b)) = self.closed_form_fit(y) {
            return b;
        }
        coarse_grid_fit(self, y, 11)
    }

    /// Radius when this surface is the circle `ρ(cos θ, sin θ, 0, …)`.
    fn circle_radius(&self) -> Option<f64> {
        None
    }
}

fn sse(eta: &(impl MeanFunction + ?Sized), y: &DVector<f64>, beta: &[f64]) -> f64 {
    (0..eta.n()).map(|i| (y[i] - eta.value(i, beta)).powi(2)).sum()
}

/// Minimum-SSE point of a `points^r` grid over [`MeanFunction::init_box`].
fn coarse_grid_fit(eta: &(impl MeanFunction + ?Sized), y: &DVector<f64>, points: usize) -> DVector<f64> {
    let bx = eta.init_box(y);
    let r = bx.len();
    let total = points.pow(r as u32);
    let mut best = (f64::INFINITY, vec![0.0; r]);
    let mut beta = vec![0.0; r];
    for k in 0..total {
        let mut rem = k;
        for (d, &(lo, hi)) in bx.iter().enumerate() {
            let j = rem % points;
            rem /= points;
            beta[d] = lo + (hi - lo) * j as f64 / (points - 1) as f64;
        }
        let s = sse(eta, y, &beta);
        if s < best.0 {
            best = (s, beta.clone());
        }
    }
    DVector::from_vec(best.1)
}

/// `η(θ) = ρ(cos θ, sin θ, 0, …, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleMean {
    pub rho: f64,
    pub n: usize,
}

impl MeanFunction for CircleMean {
    fn n(&self) -> usize {
        self.n
    }
    fn r(&self) -> usize {
        1
    }
    fn value(&self, i: usize, beta: &[f64]) -> f64 {
        match i {
            0 => self.rho * beta[0].cos(),
            1 => self.rho * beta[0].sin(),
            _ => 0.0,
        }
    }
    fn gradient(&self, i: usize, beta: &[f64], out: &mut [f64]) {
        out[0] = match i {
            0 => -self.rho * beta[0].sin(),
            1 => self.rho * beta[0].cos(),
            _ => 0.0,
        };
    }
    fn hessian(&self, i: usize, beta: &[f64], out: &mut [f64]) {
        out[0] = match i {
            0 => -self.rho * beta[0].cos(),
            1 => -self.rho * beta[0].sin(),
            _ => 0.0,
        };
    }
    fn closed_form_fit(&self, y: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        if y[0] == 0.0 && y[1] == 0.0 {
            return Some(Err(Error::SingularInformation(
                "data point at the circle centre: every angle is a maximum".into(),
            )));
        }
        Some(Ok(DVector::from_element(1, y[1].atan2(y[0]))))
    }
    fn init_box(&self, _y: &DVector<f64>) -> Vec<(f64, f64)> {
        vec![(-std::f64::consts::PI, std::f64::consts::PI)]
    }
    fn initial_guess(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, y[1].atan2(y[0]))
    }
    fn circle_radius(&self) -> Option<f64> {
        Some(self.rho)
    }
}

/// `η(β) = Xβ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMean {
    pub design: DMatrix<f64>,
}

impl MeanFunction for LinearMean {
    fn n(&self) -> usize {
        self.design.nrows()
    }
    fn r(&self) -> usize {
        self.design.ncols()
    }
    fn value(&self, i: usize, beta: &[f64]) -> f64 {
        (0..self.r()).map(|j| self.design[(i, j)] * beta[j]).sum()
    }
    fn gradient(&self, i: usize, _beta: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.design[(i, j)];
        }
    }
    fn hessian(&self, _i: usize, _beta: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }
    fn closed_form_fit(&self, y: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        let svd = self.design.clone().svd(true, true);
        Some(
            svd.solve(y, 1e-12)
                .map_err(|e| Error::SingularInformation(e.to_string())),
        )
    }
    fn init_box(&self, _y: &DVector<f64>) -> Vec<(f64, f64)> {
        vec![(-1.0, 1.0); self.r()]
    }
}

/// Exponential decay `η_i(β) = β₀ exp(−β₁ t_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialMean {
    pub times: Vec<f64>,
}

impl MeanFunction for ExponentialMean {
    fn n(&self) -> usize {
        self.times.len()
    }
    fn r(&self) -> usize {
        2
    }
    fn value(&self, i: usize, beta: &[f64]) -> f64 {
        beta[0] * (-beta[1] * self.times[i]).exp()
    }
    fn gradient(&self, i: usize, beta: &[f64], out: &mut [f64]) {
        let t = self.times[i];
        let e = (-beta[1] * t).exp();
        out[0] = e;
        out[1] = -beta[0] * t * e;
    }
    fn hessian(&self, i: usize, beta: &[f64], out: &mut [f64]) {
        let t = self.times[i];
        let e = (-beta[1] * t).exp();
        out[0] = 0.0;
        out[1] = -t * e;
        out[2] = -t * e;
        out[3] = beta[0] * t * t * e;
    }
    fn init_box(&self, y: &DVector<f64>) -> Vec<(f64, f64)> {
        let m = y.amax().max(1e-3);
        vec![(-2.0 * m, 2.0 * m), (-1.0, 3.0)]
    }
}

/// Known or unknown error scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaMode {
    Known(f64),
    Unknown,
}

/// `y = η(θ) + x` with `x ~ N(0, σ₀²I)`, or `y = η(θ) + σz` with `θ = (θ_reg, σ)`.
#[derive(Debug, Clone)]
pub struct NonlinearRegression {
    eta: Arc<dyn MeanFunction>,
    sigma: SigmaMode,
    family: Family,
}

pub fn make_circle(rho: f64, n: usize, variance_scale: f64) -> Result<NonlinearRegression> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!("circle radius must be positive, got {rho}")));
    }
    if !(variance_scale > 0.0 && variance_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "variance scale must be positive, got {variance_scale}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidDimension(format!("circle needs n >= 2, got {n}")));
    }
    Ok(NonlinearRegression {
        eta: Arc::new(CircleMean { rho, n }),
        sigma: SigmaMode::Known(variance_scale.sqrt()),
        family: if n == 2 { Family::Circle2d } else { Family::CircleN },
    })
}

pub fn make_nonlinear_regression(
    eta: Arc<dyn MeanFunction>,
    r: usize,
    sigma_mode: SigmaMode,
) -> Result<NonlinearRegression> {
    if eta.r() != r {
        return Err(Error::InvalidDimension(format!(
            "mean function has {} parameters, expected {r}",
            eta.r()
        )));
    }
    let p = match sigma_mode {
        SigmaMode::Known(s) => {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter(format!("known sigma must be positive, got {s}")));
            }
            r
        }
        SigmaMode::Unknown => r + 1,
    };
    if eta.n() < p.max(1) {
        return Err(Error::InvalidDimension(format!(
            "response dimension {} is smaller than parameter dimension {p}",
            eta.n()
        )));
    }
    let family = match sigma_mode {
        SigmaMode::Known(_) => Family::NonlinregKnownSigma,
        SigmaMode::Unknown => Family::NonlinregUnknownSigma,
    };
    Ok(NonlinearRegression {
        eta,
        sigma: sigma_mode,
        family,
    })
}

impl NonlinearRegression {
    pub fn eta(&self) -> &Arc<dyn MeanFunction> {
        &self.eta
    }

    pub fn sigma_mode(&self) -> SigmaMode {
        self.sigma
    }

    fn r(&self) -> usize {
        self.eta.r()
    }

    fn split<'a>(&self, theta: &'a [f64]) -> (&'a [f64], f64) {
        match self.sigma {
            SigmaMode::Known(s) => (theta, s),
            SigmaMode::Unknown => (&theta[..self.r()], theta[self.r()]),
        }
    }
}

impl QuantileModel for NonlinearRegression {
    fn family(&self) -> Family {
        self.family
    }

    fn n(&self) -> usize {
        self.eta.n()
    }

    fn p(&self) -> usize {
        match self.sigma {
            SigmaMode::Known(_) => self.r(),
            SigmaMode::Unknown => self.r() + 1,
        }
    }

    fn circle_radius(&self) -> Option<f64> {
        self.eta.circle_radius()
    }

    fn param_domain(&self) -> Vec<Interval> {
        let mut d = vec![Interval::REAL; self.r()];
        if self.sigma == SigmaMode::Unknown {
            d.push(Interval::POSITIVE);
        }
        d
    }

    fn reference(&self) -> RefLaw {
        match self.sigma {
            SigmaMode::Known(s) => RefLaw::Normal { sd: s },
            SigmaMode::Unknown => RefLaw::Normal { sd: 1.0 },
        }
    }

    fn coord_quantile(&self, i: usize, x: f64, theta: &[f64]) -> f64 {
        match self.sigma {
            SigmaMode::Known(_) => self.eta.value(i, theta) + x,
            SigmaMode::Unknown => {
                let (beta, s) = self.split(theta);
                self.eta.value(i, beta) + s * x
            }
        }
    }

    fn coord_dtheta(&self, i: usize, x: f64, theta: &[f64], out: &mut [f64]) {
        let r = self.r();
        let (beta, _) = self.split(theta);
        self.eta.gradient(i, beta, &mut out[..r]);
        if self.sigma == SigmaMode::Unknown {
            out[r] = x;
        }
    }

    fn coord_d2theta(&self, i: usize, _x: f64, theta: &[f64], out: &mut [f64]) {
        let r = self.r();
        let p = self.p();
        let (beta, _) = self.split(theta);
        if p == r {
            self.eta.hessian(i, beta, out);
            return;
        }
        let mut h = vec![0.0; r * r];
        self.eta.hessian(i, beta, &mut h);
        out.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..r {
            for b in 0..r {
                out[a * p + b] = h[a * r + b];
            }
        }
    }

    fn coord_dx(&self, _i: usize, _x: f64, theta: &[f64]) -> f64 {
        match self.sigma {
            SigmaMode::Known(_) => 1.0,
            SigmaMode::Unknown => self.split(theta).1,
        }
    }

    fn coord_cross(&self, _i: usize, _x: f64, _theta: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if self.sigma == SigmaMode::Unknown {
            out[self.r()] = 1.0;
        }
    }

    fn coord_inverse(&self, i: usize, y: f64, theta: &[f64]) -> Option<f64> {
        let (beta, s) = self.split(theta);
        let resid = y - self.eta.value(i, beta);
        Some(match self.sigma {
            SigmaMode::Known(_) => resid,
            SigmaMode::Unknown => resid / s,
        })
    }

    fn closed_form_mle(&self, y: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        let beta = match self.eta.closed_form_fit(y)? {
            Ok(b) => b,
            Err(e) => return Some(Err(e)),
        };
        match self.sigma {
            SigmaMode::Known(_) => Some(Ok(beta)),
            SigmaMode::Unknown => {
                let rss = sse(self.eta.as_ref(), y, beta.as_slice());
                if rss <= 0.0 {
                    return Some(Err(Error::SingularInformation(
                        "zero residual: scale estimate is zero".into(),
                    )));
                }
                let mut th: Vec<f64> = beta.iter().cloned().collect();
                th.push((rss / self.n() as f64).sqrt());
                Some(Ok(DVector::from_vec(th)))
            }
        }
    }

    fn initial_guess(&self, y: &DVector<f64>) -> DVector<f64> {
        let beta = self.eta.initial_guess(y);
        match self.sigma {
            SigmaMode::Known(_) => beta,
            SigmaMode::Unknown => {
                let rss = sse(self.eta.as_ref(), y, beta.as_slice());
                let mut th: Vec<f64> = beta.iter().cloned().collect();
                th.push((rss / self.n() as f64).sqrt().max(1e-8));
                DVector::from_vec(th)
            }
        }
    }

    fn log_likelihood(&self, y: &DVector<f64>, theta: &[f64]) -> Result<f64> {
        let (beta, s) = self.split(theta);
        let n = self.n() as f64;
        let rss = sse(self.eta.as_ref(), y, beta);
        Ok(-rss / (2.0 * s * s) - n * s.ln() - n * LN_SQRT_2PI)
    }

    fn loglik_derivatives(&self, y: &DVector<f64>, theta: &[f64]) -> Result<LogLikDerivs> {
        let r = self.r();
        let p = self.p();
        let (beta, s) = self.split(theta);
        let n = self.n() as f64;
        let mut g = vec![0.0; r];
        let mut h = vec![0.0; r * r];
        let mut jr = DVector::<f64>::zeros(r);
        let mut curv = DMatrix::<f64>::zeros(r, r);
        let mut rss = 0.0;
        for i in 0..self.n() {
            let res = y[i] - self.eta.value(i, beta);
            rss += res * res;
            self.eta.gradient(i, beta, &mut g);
            self.eta.hessian(i, beta, &mut h);
            for a in 0..r {
                jr[a] += res * g[a];
                for b in 0..r {
                    curv[(a, b)] += res * h[a * r + b] - g[a] * g[b];
                }
            }
        }
        let s2 = s * s;
        let value = -rss / (2.0 * s2) - n * s.ln() - n * LN_SQRT_2PI;
        let mut score = DVector::zeros(p);
        let mut hessian = DMatrix::zeros(p, p);
        for a in 0..r {
            score[a] = jr[a] / s2;
            for b in 0..r {
                hessian[(a, b)] = curv[(a, b)] / s2;
            }
        }
        if self.sigma == SigmaMode::Unknown {
            score[r] = -n / s + rss / (s2 * s);
            for a in 0..r {
                let v = -2.0 * jr[a] / (s2 * s);
                hessian[(a, r)] = v;
                hessian[(r, a)] = v;
            }
            hessian[(r, r)] = n / s2 - 3.0 * rss / (s2 * s2);
        }
        Ok(LogLikDerivs {
            value,
            score,
            hessian,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_rejects_nonpositive_radius() {
        assert!(matches!(make_circle(0.0, 2, 1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(make_circle(-1.0, 2, 1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn circle_zero_noise_and_derivatives() {
        let m = make_circle(1.0, 2, 1.0).unwrap();
        let x = DVector::zeros(2);
        assert_eq!(m.quantile(&x, &[0.0]).as_slice(), &[1.0, 0.0]);
        let a0: f64 = 0.8;
        let rho = 1.0;
        let v = m.dquantile_dtheta(&x, &[a0]);
        assert!((v[(0, 0)] + rho * a0.sin()).abs() < 1e-15);
        assert!((v[(1, 0)] - rho * a0.cos()).abs() < 1e-15);
        let w = m.d2quantile_dtheta2(&x, &[a0]);
        assert!((w.get(0, 0, 0) + rho * a0.cos()).abs() < 1e-15);
        assert!((w.get(1, 0, 0) + rho * a0.sin()).abs() < 1e-15);
    }

    #[test]
    fn circle_via_regression_matches_make_circle() {
        let a = make_circle(1.7, 3, 0.25).unwrap();
        let eta: Arc<dyn MeanFunction> = Arc::new(CircleMean { rho: 1.7, n: 3 });
        let b = make_nonlinear_regression(eta, 1, SigmaMode::Known(0.5)).unwrap();
        let x = DVector::from_vec(vec![0.1, -0.4, 0.9]);
        for &t in &[-2.0, 0.3, 1.1] {
            assert_eq!(a.quantile(&x, &[t]), b.quantile(&x, &[t]));
            assert_eq!(a.dquantile_dtheta(&x, &[t]), b.dquantile_dtheta(&x, &[t]));
            assert_eq!(a.d2quantile_dtheta2(&x, &[t]), b.d2quantile_dtheta2(&x, &[t]));
        }
    }

    #[test]
    fn linear_mean_has_zero_acceleration() {
        let design = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let m = make_nonlinear_regression(Arc::new(LinearMean { design }), 2, SigmaMode::Known(1.0))
            .unwrap();
        let x = DVector::from_vec(vec![0.3, -0.2, 0.5, 0.0]);
        assert_eq!(m.d2quantile_dtheta2(&x, &[0.4, -1.2]).max_abs(), 0.0);
    }

    #[test]
    fn unknown_sigma_velocity_appends_reference() {
        let eta: Arc<dyn MeanFunction> = Arc::new(ExponentialMean {
            times: vec![0.0, 0.5, 1.0, 2.0],
        });
        let m = make_nonlinear_regression(eta.clone(), 2, SigmaMode::Unknown).unwrap();
        let z = DVector::from_vec(vec![0.3, -1.0, 0.2, 0.7]);
        let th = [2.0, 0.7, 0.4];
        let v = m.dquantile_dtheta(&z, &th);
        assert_eq!(v.column(2).as_slice(), z.as_slice());
        let w = m.d2quantile_dtheta2(&z, &th);
        for i in 0..4 {
            for a in 0..3 {
                assert_eq!(w.get(i, a, 2), 0.0);
            }
        }
    }

    #[test]
    fn rejects_parameter_count_mismatch() {
        let eta: Arc<dyn MeanFunction> = Arc::new(ExponentialMean {
            times: vec![0.0, 1.0, 2.0],
        });
        assert!(matches!(
            make_nonlinear_regression(eta.clone(), 3, SigmaMode::Unknown),
            Err(Error::InvalidDimension(_))
        ));
        let short: Arc<dyn MeanFunction> = Arc::new(ExponentialMean { times: vec![0.0, 1.0] });
        assert!(matches!(
            make_nonlinear_regression(short, 2, SigmaMode::Unknown),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn analytic_loglik_derivatives_match_generic_route() {
        let eta: Arc<dyn MeanFunction> = Arc::new(ExponentialMean {
            times: vec![0.0, 0.4, 0.9, 1.5, 2.2],
        });
        let m = make_nonlinear_regression(eta, 2, SigmaMode::Unknown).unwrap();
        let y = DVector::from_vec(vec![2.1, 1.4, 0.9, 0.6, 0.2]);
        let th = [2.0, 0.8, 0.3];
        let an = m.loglik_derivatives(&y, &th).unwrap();
        // the trait default differentiates log_likelihood numerically
        #[derive(Debug)]
        struct Plain<'a>(&'a NonlinearRegression);
        impl QuantileModel for Plain<'_> {
            fn family(&self) -> Family { self.0.family() }
            fn n(&self) -> usize { self.0.n() }
            fn p(&self) -> usize { self.0.p() }
            fn param_domain(&self) -> Vec<Interval> { self.0.param_domain() }
            fn reference(&self) -> RefLaw { self.0.reference() }
            fn coord_quantile(&self, i: usize, x: f64, t: &[f64]) -> f64 { self.0.coord_quantile(i, x, t) }
            fn coord_dtheta(&self, i: usize, x: f64, t: &[f64], o: &mut [f64]) { self.0.coord_dtheta(i, x, t, o) }
            fn coord_d2theta(&self, i: usize, x: f64, t: &[f64], o: &mut [f64]) { self.0.coord_d2theta(i, x, t, o) }
            fn coord_dx(&self, i: usize, x: f64, t: &[f64]) -> f64 { self.0.coord_dx(i, x, t) }
            fn coord_cross(&self, i: usize, x: f64, t: &[f64], o: &mut [f64]) { self.0.coord_cross(i, x, t, o) }
            fn initial_guess(&self, y: &DVector<f64>) -> DVector<f64> { self.0.initial_guess(y) }
        }
        let fd = Plain(&m).loglik_derivatives(&y, &th).unwrap();
        assert!((fd.value - an.value).abs() < 1e-10);
        for a in 0..3 {
            assert!((fd.score[a] - an.score[a]).abs() < 1e-6, "score {a}");
            for b in 0..3 {
                assert!((fd.hessian[(a, b)] - an.hessian[(a, b)]).abs() < 1e-4, "hess {a}{b}");
            }
        }
    }
}
