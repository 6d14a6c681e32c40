//! Maximum likelihood fits, fitted reference values and information scaling.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, IterateTrace, Result};
use crate::linalg::{matrix_serde, vector_serde};
use crate::models::{Interval, QuantileModel};

/// Outcome of a maximum likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(with = "vector_serde")]
    pub theta_hat: DVector<f64>,
    /// `y(x_c; θ̂)` at the reference centre, e.g. `η(θ̂)` or `μ̂1`.
    #[serde(with = "vector_serde")]
    pub y_fit: DVector<f64>,
    /// Fitted reference value: the solution of `y⁰ = y(x; θ̂)`.
    #[serde(with = "vector_serde")]
    pub x_hat: DVector<f64>,
    #[serde(with = "matrix_serde")]
    pub obs_info: DMatrix<f64>,
    pub loglik_hat: f64,
    pub score_norm: f64,
    pub converged: bool,
    /// Newton iterations used; 0 for a closed-form fit.
    pub iterations: usize,
}

/// Stopping rules for the Newton iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub score_tol: f64,
    pub step_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            score_tol: 1e-8,
            step_tol: 1e-10,
            max_iter: 100,
        }
    }
}

fn check_inputs(model: &dyn QuantileModel, y0: &DVector<f64>, init: Option<&[f64]>) -> Result<()> {
    if y0.len() != model.n() {
        return Err(Error::InvalidDimension(format!(
            "data has length {}, model has n = {}",
            y0.len(),
            model.n()
        )));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("data must be finite".into()));
    }
    if let Some(t) = init {
        if !model.in_domain(t) {
            return Err(Error::InvalidParameter(format!("initial value {t:?} outside the parameter domain")));
        }
    }
    Ok(())
}

/// Maximum likelihood fit. Families with a closed form use it; the rest go
/// through [`fit_mle_iterative`].
pub fn fit_mle(model: &dyn QuantileModel, y0: &DVector<f64>, init: Option<&[f64]>) -> Result<FitResult> {
    check_inputs(model, y0, init)?;
    match model.closed_form_mle(y0) {
        Some(theta) => finish(model, y0, theta?, 0, true),
        None => fit_mle_iterative_with(model, y0, init, SolverOptions::default()),
    }
}

/// Newton fit even when a closed form exists.
pub fn fit_mle_iterative(
    model: &dyn QuantileModel,
    y0: &DVector<f64>,
    init: Option<&[f64]>,
) -> Result<FitResult> {
    check_inputs(model, y0, init)?;
    fit_mle_iterative_with(model, y0, init, SolverOptions::default())
}

/// Log-likelihood and its derivatives in the unconstrained coordinates `φ`.
struct FreeObjective<'a> {
    model: &'a dyn QuantileModel,
    y: &'a DVector<f64>,
    domain: Vec<Interval>,
}

impl FreeObjective<'_> {
    fn theta(&self, phi: &[f64]) -> Vec<f64> {
        self.domain.iter().zip(phi).map(|(iv, &f)| iv.from_free(f).0).collect()
    }

    fn value(&self, phi: &[f64]) -> f64 {
        let th = self.theta(phi);
        if !self.model.in_domain(&th) {
            return f64::NEG_INFINITY;
        }
        self.model
            .log_likelihood(self.y, &th)
            .ok()
            .filter(|v| v.is_finite())
            .unwrap_or(f64::NEG_INFINITY)
    }

    /// `(value, gradient, Hessian, natural score norm)` at `φ`.
    fn derivs(&self, phi: &[f64]) -> Result<(f64, DVector<f64>, DMatrix<f64>, f64)> {
        let p = phi.len();
        let maps: Vec<(f64, f64, f64)> = self.domain.iter().zip(phi).map(|(iv, &f)| iv.from_free(f)).collect();
        let th: Vec<f64> = maps.iter().map(|m| m.0).collect();
        let d = self.model.loglik_derivatives(self.y, &th)?;
        let mut g = DVector::zeros(p);
        let mut h = DMatrix::zeros(p, p);
        for a in 0..p {
            g[a] = d.score[a] * maps[a].1;
            for b in 0..p {
                h[(a, b)] = d.hessian[(a, b)] * maps[a].1 * maps[b].1;
            }
            h[(a, a)] += d.score[a] * maps[a].2;
        }
        Ok((d.value, g, h, d.score.norm()))
    }
}

/// Ascent direction: Newton when `−H` is positive definite, otherwise a
/// Levenberg-damped step.
fn ascent_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> DVector<f64> {
    let neg = -h;
    let scale = neg.diagonal().amax().max(1e-12);
    let mut lambda = 0.0;
    for _ in 0..60 {
        let mut m = neg.clone();
        for a in 0..m.nrows() {
            m[(a, a)] += lambda;
        }
        if let Some(ch) = m.cholesky() {
            return ch.solve(g);
        }
        lambda = if lambda == 0.0 { 1e-8 * scale } else { lambda * 10.0 };
    }
    g / scale
}

fn fit_mle_iterative_with(
    model: &dyn QuantileModel,
    y0: &DVector<f64>,
    init: Option<&[f64]>,
    opts: SolverOptions,
) -> Result<FitResult> {
    let domain = model.param_domain();
    let start: Vec<f64> = match init {
        Some(t) => t.to_vec(),
        None => model.initial_guess(y0).iter().cloned().collect(),
    };
    if !model.in_domain(&start) {
        return Err(Error::InvalidParameter(format!("starting value {start:?} outside the parameter domain")));
    }
    let obj = FreeObjective { model, y: y0, domain };
    let phi0: Vec<f64> = obj.domain.iter().zip(&start).map(|(iv, &t)| iv.to_free(t)).collect();
    match newton(&obj, phi0.clone(), opts) {
        Ok((phi, it)) => finish(model, y0, DVector::from_vec(obj.theta(&phi)), it, true),
        Err(e) if model.p() == 1 => {
            // scalar fallback: bracket by golden section, then polish
            let phi = golden_section(|f| obj.value(&[f]), phi0[0] - 4.0, phi0[0] + 4.0);
            match newton(&obj, vec![phi], opts) {
                Ok((phi, it)) => finish(model, y0, DVector::from_vec(obj.theta(&phi)), it, true),
                Err(_) => Err(e),
            }
        }
        Err(e) => Err(e),
    }
}

fn newton(obj: &FreeObjective<'_>, mut phi: Vec<f64>, opts: SolverOptions) -> Result<(Vec<f64>, usize)> {
    let mut trace = Vec::new();
    for it in 0..opts.max_iter {
        let (f, g, h, snorm) = obj.derivs(&phi)?;
        trace.push(IterateTrace {
            iteration: it,
            theta: obj.theta(&phi),
            loglik: f,
            score_norm: snorm,
        });
        if !f.is_finite() {
            break;
        }
        if snorm < opts.score_tol {
            return Ok((phi, it));
        }
        let dir = ascent_direction(&g, &h);
        let slope = g.dot(&dir);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = phi.iter().zip(dir.iter()).map(|(p, d)| p + step * d).collect();
            let fc = obj.value(&cand);
            if fc.is_finite() && fc >= f + 1e-4 * step * slope {
                accepted = Some(cand);
                break;
            }
            step *= 0.5;
        }
        let Some(next) = accepted else {
            // no ascent possible at working precision
            if snorm < 1e3 * opts.score_tol {
                return Ok((phi, it));
            }
            break;
        };
        let dx = next.iter().zip(&phi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        phi = next;
        if dx < opts.step_tol * (1.0 + phi.iter().fold(0.0_f64, |m, v| m.max(v.abs()))) {
            let (_, _, _, s) = obj.derivs(&phi)?;
            if s < 1e3 * opts.score_tol {
                return Ok((phi, it + 1));
            }
        }
    }
    Err(Error::ConvergenceFailure { trace })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    // coarse scan first so a multimodal objective lands in the best basin
    let k = 64;
    let mut best = (f64::NEG_INFINITY, 0.5 * (a + b));
    for j in 0..=k {
        let x = a + (b - a) * j as f64 / k as f64;
        let v = f(x);
        if v > best.0 {
            best = (v, x);
        }
    }
    let h = (b - a) / k as f64;
    a = best.1 - h;
    b = best.1 + h;
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    for _ in 0..200 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
        if b - a < 1e-12 * (1.0 + a.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

fn finish(
    model: &dyn QuantileModel,
    y0: &DVector<f64>,
    theta: DVector<f64>,
    iterations: usize,
    converged: bool,
) -> Result<FitResult> {
    let th = theta.as_slice();
    if !model.in_domain(th) {
        return Err(Error::NumericalFailure(format!("estimate {th:?} left the parameter domain")));
    }
    let d = model.loglik_derivatives(y0, th)?;
    let obs_info = -&d.hessian;
    let obs_info = 0.5 * (&obs_info + obs_info.transpose());
    if obs_info.clone().cholesky().is_none() {
        return Err(Error::SingularInformation(format!(
            "observed information at {th:?} is not positive definite"
        )));
    }
    let x_hat = fitted_reference(model, y0, th)?;
    let centre = DVector::from_element(model.n(), model.reference_center());
    Ok(FitResult {
        y_fit: model.quantile(&centre, th),
        x_hat,
        obs_info,
        loglik_hat: d.value,
        score_norm: d.score.norm(),
        converged,
        iterations,
        theta_hat: theta,
    })
}

/// Solve `y0 = y(x; θ̂)` coordinate by coordinate.
pub fn fitted_reference(model: &dyn QuantileModel, y0: &DVector<f64>, theta_hat: &[f64]) -> Result<DVector<f64>> {
    if !model.in_domain(theta_hat) {
        return Err(Error::InvalidParameter(format!("{theta_hat:?} outside the parameter domain")));
    }
    if y0.len() != model.n() {
        return Err(Error::InvalidDimension(format!("data has length {}, model has n = {}", y0.len(), model.n())));
    }
    let mut x = DVector::zeros(model.n());
    for i in 0..model.n() {
        x[i] = model.solve_reference(i, y0[i], theta_hat)?;
    }
    Ok(x)
}

/// Linear change of parameter that makes the observed information the identity.
///
/// With `J = LL′`, the coordinates `u = L′(θ − θ̂)` have unit information and
/// `θ = θ̂ + S u` with `S = L⁻ᵀ`. `n_scale` is carried along for the
/// moderate-deviation scaling `t = u / n_scale^{1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    #[serde(with = "vector_serde")]
    pub theta_hat: DVector<f64>,
    #[serde(with = "matrix_serde")]
    pub chol: DMatrix<f64>,
    #[serde(with = "matrix_serde")]
    pub scale: DMatrix<f64>,
    pub n_scale: f64,
}

impl Standardization {
    pub fn to_theta(&self, u: &[f64]) -> DVector<f64> {
        &self.theta_hat + &self.scale * DVector::from_column_slice(u)
    }

    pub fn to_standard(&self, theta: &[f64]) -> DVector<f64> {
        self.chol.transpose() * (DVector::from_column_slice(theta) - &self.theta_hat)
    }

    /// Scale of one moderate-deviation unit, `n_scale^{1/2}`.
    pub fn root_n(&self) -> f64 {
        self.n_scale.sqrt()
    }
}

pub fn standardize(fit: &FitResult, n_scale: f64) -> Result<Standardization> {
    if !fit.converged {
        return Err(Error::InvalidParameter("fit did not converge".into()));
    }
    if !(n_scale > 0.0) {
        return Err(Error::InvalidParameter(format!("n_scale must be positive, got {n_scale}")));
    }
    let ch = fit
        .obs_info
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularInformation("observed information is not positive definite".into()))?;
    let l = ch.l();
    let scale = l
        .transpose()
        .try_inverse()
        .ok_or_else(|| Error::SingularInformation("Cholesky factor is singular".into()))?;
    Ok(Standardization {
        theta_hat: fit.theta_hat.clone(),
        chol: l,
        scale,
        n_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_circle, make_location_scale, ErrorLaw};

    #[test]
    fn circle_angle_and_reference() {
        let m = make_circle(1.0, 2, 0.5).unwrap();
        let a0: f64 = 0.9;
        let y = DVector::from_vec(vec![1.6 * a0.cos(), 1.6 * a0.sin()]);
        let fit = fit_mle(&m, &y, None).unwrap();
        assert!((fit.theta_hat[0] - a0).abs() < 1e-14);
        let fit = fit_mle(&m, &DVector::from_vec(vec![2.0, 0.0]), None).unwrap();
        assert!((fit.x_hat[0] - 1.0).abs() < 1e-15 && fit.x_hat[1].abs() < 1e-15);
    }

    #[test]
    fn normal_location_scale_uses_divisor_n() {
        let m = make_location_scale(2, ErrorLaw::Normal).unwrap();
        let fit = fit_mle(&m, &DVector::from_vec(vec![-1.0, 1.0]), None).unwrap();
        assert!(fit.theta_hat[0].abs() < 1e-15);
        assert!((fit.theta_hat[1] - 1.0).abs() < 1e-15);
        // brute-force grid check of the maximum
        let y = DVector::from_vec(vec![-1.0, 1.0]);
        let best = fit.loglik_hat;
        for i in -20..=20 {
            for j in 1..=40 {
                let th = [0.05 * i as f64, 0.05 * j as f64];
                assert!(m.log_likelihood(&y, &th).unwrap() <= best + 1e-12);
            }
        }
    }

    #[test]
    fn iterative_matches_closed_form() {
        let m = make_location_scale(6, ErrorLaw::Normal).unwrap();
        let y = DVector::from_vec(vec![0.3, 2.1, -0.7, 1.4, 0.9, 3.3]);
        let a = fit_mle(&m, &y, None).unwrap();
        let b = fit_mle_iterative(&m, &y, Some(&[0.0, 1.0])).unwrap();
        assert!((&a.theta_hat - &b.theta_hat).amax() < 1e-8);
        assert!(b.iterations > 0);
    }

    #[test]
    fn cauchy_fit_is_stationary() {
        let m = make_location_scale(5, ErrorLaw::Cauchy).unwrap();
        let y = DVector::from_vec(vec![-1.2, 0.4, 0.1, 3.5, 0.8]);
        let fit = fit_mle(&m, &y, None).unwrap();
        assert!(fit.score_norm < 1e-8);
        let back = m.quantile(&fit.x_hat, fit.theta_hat.as_slice());
        assert!((back - y).amax() < 1e-10);
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = make_location_scale(2, ErrorLaw::Normal).unwrap();
        assert!(matches!(
            fit_mle(&m, &DVector::from_vec(vec![1.0, f64::NAN]), None),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            fit_mle(&m, &DVector::from_vec(vec![1.0, 2.0]), Some(&[0.0, -1.0])),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            fit_mle(&m, &DVector::from_vec(vec![1.0, 1.0]), None),
            Err(Error::SingularInformation(_))
        ));
    }

    #[test]
    fn iteration_cap_reports_trace() {
        let m = make_location_scale(4, ErrorLaw::Cauchy).unwrap();
        let y = DVector::from_vec(vec![-3.0, 0.5, 0.2, 9.0]);
        let obj = FreeObjective {
            model: &m,
            y: &y,
            domain: m.param_domain(),
        };
        let opts = SolverOptions {
            max_iter: 1,
            ..Default::default()
        };
        match newton(&obj, vec![5.0, 3.0], opts) {
            Err(Error::ConvergenceFailure { trace }) => assert_eq!(trace.len(), 1),
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn standardization_examples() {
        let mut fit = FitResult {
            theta_hat: DVector::from_vec(vec![0.0, 1.0]),
            y_fit: DVector::zeros(2),
            x_hat: DVector::zeros(2),
            obs_info: DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0])),
            loglik_hat: 0.0,
            score_norm: 0.0,
            converged: true,
            iterations: 0,
        };
        let s = standardize(&fit, 1.0).unwrap();
        assert!((s.scale[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((s.scale[(1, 1)] - 1.0 / 3.0).abs() < 1e-15);
        fit.obs_info = DMatrix::identity(2, 2);
        assert_eq!(standardize(&fit, 1.0).unwrap().scale, DMatrix::identity(2, 2));
    }
}
