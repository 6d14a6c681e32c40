//! Random model instances and invariant checks shared by the property and
//! acceptance suites. Every check returns `Err(description)` on failure.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use qanc::ancillary::{build_contour, compare_exact, GridSpec};
use qanc::diffgeo::{build_frame, frame_from_arrays, reparameterize};
use qanc::estimation::{fit_mle, fit_mle_iterative, fitted_reference};
use qanc::linalg::VectorArray;
use qanc::models::{
    make_circle, make_location_scale, make_nonlinear_regression, CurvedScalar, ErrorLaw, ExponentialMean, Family,
    LinearMean, QuantileModel, SigmaMode,
};
use qanc::montecarlo::ancillary_density;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CASES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    NormalLocationScale,
    CauchyLocationScale,
    Circle2d,
    CircleN,
    ExponentialKnown,
    ExponentialUnknown,
    LinearUnknown,
    Curved,
}

pub const KINDS: [Kind; 8] = [
    Kind::NormalLocationScale,
    Kind::CauchyLocationScale,
    Kind::Circle2d,
    Kind::CircleN,
    Kind::ExponentialKnown,
    Kind::ExponentialUnknown,
    Kind::LinearUnknown,
    Kind::Curved,
];

/// A model with a parameter value, a reference draw and the data it generates.
#[derive(Debug)]
pub struct Instance {
    pub kind: Kind,
    pub model: Arc<dyn QuantileModel>,
    pub theta: Vec<f64>,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl Instance {
    /// Second-order expansion is exact: the quantile is affine in `θ`.
    pub fn affine_in_theta(&self) -> bool {
        matches!(
            self.kind,
            Kind::NormalLocationScale | Kind::CauchyLocationScale | Kind::LinearUnknown
        )
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn instance(kind: Kind, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((kind as u64) << 56));
    let (model, theta): (Arc<dyn QuantileModel>, Vec<f64>) = match kind {
        Kind::NormalLocationScale | Kind::CauchyLocationScale => {
            let law = if kind == Kind::NormalLocationScale { ErrorLaw::Normal } else { ErrorLaw::Cauchy };
            let n = rng.random_range(3..=12);
            (
                Arc::new(make_location_scale(n, law).unwrap()),
                vec![uniform(&mut rng, -3.0, 3.0), uniform(&mut rng, 0.3, 3.0)],
            )
        }
        Kind::Circle2d | Kind::CircleN => {
            let n = if kind == Kind::Circle2d { 2 } else { rng.random_range(3..=8) };
            let rho = uniform(&mut rng, 0.5, 3.0);
            let var = uniform(&mut rng, 0.005, 0.1);
            (Arc::new(make_circle(rho, n, var).unwrap()), vec![uniform(&mut rng, -PI, PI)])
        }
        Kind::ExponentialKnown | Kind::ExponentialUnknown => {
            let n = rng.random_range(4..=12);
            let times: Vec<f64> = (0..n).map(|i| i as f64 * 0.5).collect();
            let eta = Arc::new(ExponentialMean { times });
            let beta = vec![uniform(&mut rng, 1.0, 3.0), uniform(&mut rng, 0.1, 0.8)];
            if kind == Kind::ExponentialKnown {
                let s = uniform(&mut rng, 0.02, 0.2);
                (Arc::new(make_nonlinear_regression(eta, 2, SigmaMode::Known(s)).unwrap()), beta)
            } else {
                let mut th = beta;
                th.push(uniform(&mut rng, 0.02, 0.2));
                (Arc::new(make_nonlinear_regression(eta, 2, SigmaMode::Unknown).unwrap()), th)
            }
        }
        Kind::LinearUnknown => {
            let n = rng.random_range(4..=12);
            let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { i as f64 - 0.5 * n as f64 });
            let eta = Arc::new(LinearMean { design });
            let th = vec![uniform(&mut rng, -2.0, 2.0), uniform(&mut rng, -1.0, 1.0), uniform(&mut rng, 0.2, 2.0)];
            (Arc::new(make_nonlinear_regression(eta, 2, SigmaMode::Unknown).unwrap()), th)
        }
        Kind::Curved => {
            let n = rng.random_range(3..=12);
            (Arc::new(CurvedScalar::new(n).unwrap()), vec![uniform(&mut rng, -1.0, 1.0)])
        }
    };
    let x = model.sample_reference(&mut rng);
    let y = model.quantile(&x, &theta);
    Instance {
        kind,
        model,
        theta,
        x,
        y,
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

/// Analytic derivatives of the quantile and the log-likelihood against central differences.
pub fn check_derivatives(inst: &Instance) -> Result<(), String> {
    let m = &*inst.model;
    let (n, p) = (m.n(), m.p());
    let th = &inst.theta;
    let x = &inst.x;
    let v = m.dquantile_dtheta(x, th);
    let w = m.d2quantile_dtheta2(x, th);
    let b = m.cross_hessian(x, th);
    let dx = m.dquantile_dx(x, th);
    let h = 1e-5;
    for a in 0..p {
        let step = h * th[a].abs().max(1.0);
        let mut tp = th.clone();
        let mut tm = th.clone();
        tp[a] += step;
        tm[a] -= step;
        let fd = (m.quantile(x, &tp) - m.quantile(x, &tm)) / (2.0 * step);
        let vp = m.dquantile_dtheta(x, &tp);
        let vm = m.dquantile_dtheta(x, &tm);
        let dxp = m.dquantile_dx(x, &tp);
        let dxm = m.dquantile_dx(x, &tm);
        for i in 0..n {
            if !close(fd[i], v[(i, a)], 1e-6) {
                return Err(format!("V[{i},{a}] = {} vs {}", v[(i, a)], fd[i]));
            }
            for c in 0..p {
                let fw = (vp[(i, c)] - vm[(i, c)]) / (2.0 * step);
                if !close(fw, w.get(i, a, c), 1e-5) {
                    return Err(format!("W[{i},{a},{c}] = {} vs {fw}", w.get(i, a, c)));
                }
            }
            let fb = (dxp[i] - dxm[i]) / (2.0 * step);
            if !close(fb, b[(i, a)], 1e-5) {
                return Err(format!("B[{i},{a}] = {} vs {fb}", b[(i, a)]));
            }
        }
    }
    for i in 0..n {
        let hx = h * x[i].abs().max(1.0);
        let fd = (m.coord_quantile(i, x[i] + hx, th) - m.coord_quantile(i, x[i] - hx, th)) / (2.0 * hx);
        if !close(fd, dx[i], 1e-6) {
            return Err(format!("dy/dx[{i}] = {} vs {fd}", dx[i]));
        }
    }
    let d = m.loglik_derivatives(&inst.y, th).map_err(|e| e.to_string())?;
    let ll = m.log_likelihood(&inst.y, th).map_err(|e| e.to_string())?;
    if !close(d.value, ll, 1e-10) {
        return Err(format!("loglik value {} vs {ll}", d.value));
    }
    for a in 0..p {
        let step = 1e-6 * th[a].abs().max(1.0);
        let mut tp = th.clone();
        let mut tm = th.clone();
        tp[a] += step;
        tm[a] -= step;
        let lp = m.log_likelihood(&inst.y, &tp).map_err(|e| e.to_string())?;
        let lm = m.log_likelihood(&inst.y, &tm).map_err(|e| e.to_string())?;
        let fd = (lp - lm) / (2.0 * step);
        let scale = ll.abs().max(1.0) / step * 1e-15 + 1e-5;
        if (fd - d.score[a]).abs() > scale * (1.0 + d.score[a].abs()) {
            return Err(format!("score[{a}] = {} vs {fd}", d.score[a]));
        }
    }
    Ok(())
}

/// `quantile(x, (a + b m, b s)) = a + b quantile(x, (m, s))`.
pub fn check_location_scale_equivariance(inst: &Instance, a: f64, b: f64) -> Result<(), String> {
    let m = &*inst.model;
    let (mu, s) = (inst.theta[0], inst.theta[1]);
    let lhs = m.quantile(&inst.x, &[a + b * mu, b * s]);
    let rhs = m.quantile(&inst.x, &[mu, s]).map(|v| a + b * v);
    for i in 0..m.n() {
        if !close(lhs[i], rhs[i], 1e-13) {
            return Err(format!("coordinate {i}: {} vs {}", lhs[i], rhs[i]));
        }
    }
    Ok(())
}

/// `‖∂η/∂θ‖ = ρ` along the whole circle.
pub fn check_circle_speed(inst: &Instance, rho: f64) -> Result<(), String> {
    let v = inst.model.dquantile_dtheta(&inst.x, &inst.theta);
    let speed = v.column(0).norm();
    if (speed - rho).abs() > 1e-12 * rho {
        return Err(format!("speed {speed} vs ρ = {rho}"));
    }
    Ok(())
}

/// `fitted_reference(quantile(x, θ), θ) = x`.
pub fn check_reference_round_trip(inst: &Instance) -> Result<(), String> {
    let back = fitted_reference(&*inst.model, &inst.y, &inst.theta).map_err(|e| e.to_string())?;
    for i in 0..inst.x.len() {
        if (back[i] - inst.x[i]).abs() > 1e-10 * (1.0 + inst.x[i].abs()) {
            return Err(format!("x[{i}] = {} recovered as {}", inst.x[i], back[i]));
        }
    }
    Ok(())
}

/// Fitting `a + b y` gives `(a + b μ̂, b σ̂)`.
pub fn check_fit_equivariance(inst: &Instance, a: f64, b: f64) -> Result<(), String> {
    let m = &*inst.model;
    let f0 = fit_mle(m, &inst.y, None).map_err(|e| e.to_string())?;
    let y1 = inst.y.map(|v| a + b * v);
    let f1 = fit_mle(m, &y1, None).map_err(|e| e.to_string())?;
    let want = [a + b * f0.theta_hat[0], b * f0.theta_hat[1]];
    let tol = 1e-8 * (1.0 + want[0].abs().max(want[1]));
    for k in 0..2 {
        if (f1.theta_hat[k] - want[k]).abs() > tol {
            return Err(format!("component {k}: {} vs {}", f1.theta_hat[k], want[k]));
        }
    }
    Ok(())
}

/// Closed-form and Newton fits agree.
pub fn check_closed_vs_iterative(inst: &Instance) -> Result<(), String> {
    let m = &*inst.model;
    if m.closed_form_mle(&inst.y).is_none() {
        return Ok(());
    }
    let a = fit_mle(m, &inst.y, None).map_err(|e| e.to_string())?;
    let b = fit_mle_iterative(m, &inst.y, None).map_err(|e| e.to_string())?;
    let mut d = (&a.theta_hat - &b.theta_hat).abs().max();
    if matches!(inst.kind, Kind::Circle2d | Kind::CircleN) {
        let raw = a.theta_hat[0] - b.theta_hat[0];
        d = (raw - 2.0 * PI * (raw / (2.0 * PI)).round()).abs();
    }
    if d > 1e-8 * (1.0 + a.theta_hat.abs().max()) {
        return Err(format!("closed form {:?} vs Newton {:?}", a.theta_hat, b.theta_hat));
    }
    Ok(())
}

/// Central differences at `ε = 1e-3, 1e-4` converge to `V` at second order.
pub fn check_tangency(inst: &Instance) -> Result<(), String> {
    let m = &*inst.model;
    let v = m.dquantile_dtheta(&inst.x, &inst.theta);
    for a in 0..m.p() {
        let err = |eps: f64| {
            let mut tp = inst.theta.clone();
            let mut tm = inst.theta.clone();
            tp[a] += eps;
            tm[a] -= eps;
            let fd = (m.quantile(&inst.x, &tp) - m.quantile(&inst.x, &tm)) / (2.0 * eps);
            (fd - v.column(a)).norm()
        };
        let (e3, e4) = (err(1e-3), err(1e-4));
        let scale = v.column(a).norm().max(1.0);
        // rounding in the difference quotient, which heavy tails make large
        let ymax = m.quantile(&inst.x, &inst.theta).abs().max().max(1.0);
        let rounding = |eps: f64| 1e-14 * ymax * (m.n() as f64).sqrt() / eps;
        // second order: shrinking ε tenfold shrinks the error ~100-fold, down to rounding
        if e3 > (1e-4 * scale).max(rounding(1e-3)) || e4 > (e3 / 50.0).max(rounding(1e-4)) {
            return Err(format!("column {a}: error {e3:e} at 1e-3, {e4:e} at 1e-4"));
        }
    }
    Ok(())
}

/// Remainder of the second-order expansion is `O(‖t‖³)`: log-log slope ≥ 2.7.
pub fn taylor_remainder_slope(inst: &Instance, direction: &[f64]) -> Result<Option<f64>, String> {
    if inst.affine_in_theta() {
        return Ok(None);
    }
    let m = &*inst.model;
    let frame = build_frame(m, &inst.x, &inst.theta).map_err(|e| e.to_string())?;
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut ln_r = Vec::new();
    let mut ln_e = Vec::new();
    for k in 0..9 {
        let r = 10f64.powf(-3.0 + 2.0 * k as f64 / 8.0);
        let t: Vec<f64> = direction.iter().map(|d| r * d / norm).collect();
        let th: Vec<f64> = inst.theta.iter().zip(&t).map(|(a, b)| a + b).collect();
        if !m.in_domain(&th) {
            return Err(format!("offset {t:?} leaves the domain"));
        }
        let e = (m.quantile(&inst.x, &th) - frame.expansion(&t, 1.0)).norm();
        ln_r.push(r.ln());
        ln_e.push(e.max(1e-300).ln());
    }
    let k = ln_r.len() as f64;
    let mr = ln_r.iter().sum::<f64>() / k;
    let me = ln_e.iter().sum::<f64>() / k;
    let sxy: f64 = ln_r.iter().zip(&ln_e).map(|(a, b)| (a - mr) * (b - me)).sum();
    let sxx: f64 = ln_r.iter().map(|a| (a - mr).powi(2)).sum();
    Ok(Some(sxy / sxx))
}

pub fn check_taylor_remainder(inst: &Instance, direction: &[f64]) -> Result<(), String> {
    match taylor_remainder_slope(inst, direction)? {
        Some(s) if s < 2.7 => Err(format!("remainder slope {s}")),
        _ => Ok(()),
    }
}

/// Random `V` (full rank) and symmetric `W`.
pub fn random_arrays(seed: u64, n: usize, p: usize) -> (DMatrix<f64>, VectorArray) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    let mut w = VectorArray::zeros(n, p);
    for k in 0..n {
        for a in 0..p {
            for b in a..p {
                w.set_sym(k, a, b, rng.random_range(-2.0..2.0));
            }
        }
    }
    (v, w)
}

/// `V′W̃ = 0` and `W = VH + W̃`, with `H` solving the normal equations.
pub fn check_orthogonal_frame(v: &DMatrix<f64>, w: &VectorArray) -> Result<(), String> {
    let (n, p) = v.shape();
    let frame = frame_from_arrays(DVector::zeros(n), v.clone(), w.clone()).map_err(|e| e.to_string())?;
    let vtv = v.transpose() * v;
    let vtv_inv = vtv.clone().try_inverse().ok_or("singular V′V")?;
    let vnorm = v.norm().max(1.0);
    for a in 0..p {
        for b in 0..p {
            let wt = frame.w_tilde.vector(a, b);
            let ortho = (v.transpose() * &wt).abs().max();
            if ortho > 1e-10 * vnorm * (1.0 + w.vector(a, b).norm()) {
                return Err(format!("V′W̃[{a},{b}] = {ortho:e}"));
            }
            // independent oracle: H from (V′V)⁻¹V′w by explicit inverse
            let h = &vtv_inv * v.transpose() * w.vector(a, b);
            let hd = (&h - frame.h.vector(a, b)).abs().max();
            if hd > 1e-8 * (1.0 + h.abs().max()) {
                return Err(format!("H[{a},{b}] differs from the normal equations by {hd:e}"));
            }
            let recon = v * frame.h.vector(a, b) + &wt - w.vector(a, b);
            if recon.abs().max() > 1e-10 * (1.0 + w.vector(a, b).abs().max()) {
                return Err(format!("W ≠ VH + W̃ at [{a},{b}]"));
            }
        }
    }
    Ok(())
}

/// `y₀ + Vt + t′Wt/2√n = y₀ + Vt̃ + t′W̃t/2√n` for `t̃` from the reparameterization.
pub fn check_reparam_identity(v: &DMatrix<f64>, w: &VectorArray, n_scale: f64, seed: u64) -> Result<(), String> {
    let (n, p) = v.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let frame = frame_from_arrays(base, v.clone(), w.clone()).map_err(|e| e.to_string())?;
    let axis = [-3.0, -1.0, 0.0, 0.5, 2.0];
    for _ in 0..25 {
        let t: Vec<f64> = (0..p).map(|_| axis[rng.random_range(0..axis.len())]).collect();
        let tn2: f64 = t.iter().map(|v| v * v).sum();
        let lhs = frame.expansion(&t, n_scale);
        let rhs = frame.orthogonal_expansion(&t, &reparameterize(&frame, &t, n_scale), n_scale);
        let d = (lhs - rhs).norm();
        if d > 1e-8 * (1.0 + tn2) {
            return Err(format!("t = {t:?}: difference {d:e}"));
        }
    }
    Ok(())
}

/// Small grids keep the randomized contour checks cheap.
pub const FINE: GridSpec = GridSpec {
    half_width: 1e-4,
    points: 3,
};

/// The contour passes through `y⁰` at `t = 0` and its grid tangent is `V S`.
pub fn check_contour_centre_and_tangent(inst: &Instance) -> Result<(), String> {
    let m = &*inst.model;
    let cloud = build_contour(m, &inst.y, &FINE).map_err(|e| e.to_string())?;
    let centre = &cloud.points[cloud.centre_index];
    for i in 0..m.n() {
        if (centre[i] - inst.y[i]).abs() > 1e-10 * (1.0 + inst.y[i].abs()) {
            return Err(format!("centre coordinate {i}: {} vs {}", centre[i], inst.y[i]));
        }
    }
    let vs = &cloud.frame.v * &cloud.scale;
    let h = FINE.half_width;
    for a in 0..m.p() {
        let find = |sign: f64| {
            cloud
                .standardized
                .iter()
                .position(|u| u.iter().enumerate().all(|(d, &v)| if d == a { v == sign * h } else { v == 0.0 }))
        };
        let (Some(ip), Some(im)) = (find(1.0), find(-1.0)) else {
            continue; // the axis leaves the domain
        };
        let scale = vs.column(a).norm().max(1e-300);
        for i in 0..m.n() {
            let fd = (cloud.points[ip][i] - cloud.points[im][i]) / (2.0 * h);
            if (fd - vs[(i, a)]).abs() > 1e-6 * scale {
                return Err(format!("tangent [{i},{a}]: {fd} vs {}", vs[(i, a)]));
            }
        }
    }
    Ok(())
}

/// Location-scale contours are orbits: the exact label is constant on the cloud
/// and on its images under `y ↦ m1 + s y`.
pub fn check_location_scale_orbit(inst: &Instance, m: f64, s: f64) -> Result<(), String> {
    let grid = GridSpec {
        half_width: 3.0,
        points: 5,
    };
    let cloud = build_contour(&*inst.model, &inst.y, &grid).map_err(|e| e.to_string())?;
    let cmp = compare_exact(&*inst.model, &cloud).map_err(|e| e.to_string())?;
    if cmp.label_spread > 1e-12 {
        return Err(format!("configuration spread {:e}", cmp.label_spread));
    }
    let base = cmp.comparator.label(&cloud.base_point);
    for pt in &cloud.points {
        let moved: Vec<f64> = pt.iter().map(|v| m + s * v).collect();
        let lab = cmp.comparator.label(&moved);
        let d = lab.iter().zip(&base).fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        if d > 1e-11 {
            return Err(format!("group image leaves the orbit by {d:e}"));
        }
    }
    Ok(())
}

/// On the circle the exact radial label varies along the approximate contour
/// unless the data lie on the mean circle.
pub fn check_circle_spread_positive(inst: &Instance) -> Result<(), String> {
    let grid = GridSpec {
        half_width: 3.0,
        points: 5,
    };
    let cloud = build_contour(&*inst.model, &inst.y, &grid).map_err(|e| e.to_string())?;
    let cmp = compare_exact(&*inst.model, &cloud).map_err(|e| e.to_string())?;
    let [rho, r0] = cmp.radii.ok_or("no radii reported")?;
    if (r0 - rho).abs() > 1e-9 && cmp.label_spread <= 0.0 {
        return Err(format!("r⁰ = {r0}, ρ = {rho} but spread is {}", cmp.label_spread));
    }
    Ok(())
}

/// `f(a; θ, c) = f(−a; θ, −c)`.
pub fn check_quadrature_reflection(a: f64, theta: f64, c: f64) -> Result<(), String> {
    let f1 = ancillary_density(a, theta, c).map_err(|e| e.to_string())?;
    let f2 = ancillary_density(-a, theta, -c).map_err(|e| e.to_string())?;
    if (f1 - f2).abs() > 1e-10 {
        return Err(format!("f({a}, {theta}, {c}) = {f1} vs {f2}"));
    }
    Ok(())
}

/// Runs every model, estimation, geometry and contour invariant on one instance.
pub fn check_instance(kind: Kind, seed: u64) -> Result<(), String> {
    let inst = instance(kind, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9));
    let tag = |e: String, what: &str| format!("{kind:?} seed {seed}: {what}: {e}");
    check_derivatives(&inst).map_err(|e| tag(e, "derivatives"))?;
    check_reference_round_trip(&inst).map_err(|e| tag(e, "reference round trip"))?;
    check_tangency(&inst).map_err(|e| tag(e, "tangency"))?;
    let dir: Vec<f64> = (0..inst.model.p()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dir: Vec<f64> = if matches!(kind, Kind::ExponentialUnknown | Kind::LinearUnknown) {
        // longest step is 0.1‖d‖ scaled; keep its σ component below 0.4σ
        let mut d = dir;
        let last = d.len() - 1;
        let others = d[..last].iter().map(|v| v * v).sum::<f64>().sqrt();
        let cap = 4.0 * inst.theta[last] * others;
        d[last] = d[last].clamp(-cap, cap);
        d
    } else {
        dir
    };
    check_taylor_remainder(&inst, &dir).map_err(|e| tag(e, "Taylor remainder"))?;
    check_closed_vs_iterative(&inst).map_err(|e| tag(e, "closed form vs Newton"))?;
    check_contour_centre_and_tangent(&inst).map_err(|e| tag(e, "contour centre/tangent"))?;
    match kind {
        Kind::NormalLocationScale | Kind::CauchyLocationScale => {
            let a = rng.random_range(-5.0..5.0);
            let b = rng.random_range(0.5..2.0);
            check_location_scale_equivariance(&inst, a, b).map_err(|e| tag(e, "quantile equivariance"))?;
            check_fit_equivariance(&inst, a, b).map_err(|e| tag(e, "fit equivariance"))?;
            check_location_scale_orbit(&inst, a, b).map_err(|e| tag(e, "orbit"))?;
        }
        Kind::Circle2d | Kind::CircleN => {
            let rho = inst.model.circle_radius().expect("circle");
            check_circle_speed(&inst, rho).map_err(|e| tag(e, "constant speed"))?;
            check_circle_spread_positive(&inst).map_err(|e| tag(e, "exact spread"))?;
        }
        _ => {}
    }
    Ok(())
}

/// Random frame checks for `n ≤ 50`, `p ≤ 4`.
pub fn check_random_frame(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.random_range(1..=4);
    let n = rng.random_range(p + 1..=50);
    let (v, w) = random_arrays(seed, n, p);
    let n_scale = rng.random_range(1.0..100.0);
    check_orthogonal_frame(&v, &w).map_err(|e| format!("seed {seed} n={n} p={p}: {e}"))?;
    check_reparam_identity(&v, &w, n_scale, seed).map_err(|e| format!("seed {seed} n={n} p={p}: {e}"))
}

pub fn family_of(kind: Kind) -> Family {
    instance(kind, 0).model.family()
}
