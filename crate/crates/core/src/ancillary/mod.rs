//! Observed approximate ancillary contours `A⁰ = {y(x̂⁰; θ̂⁰ + t)}` and the
//! checks built on them.

mod exact;
mod inversion_demo;
mod severini;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffgeo::{build_frame, TaylorFrame};
use crate::error::{Error, Result};
use crate::estimation::{fit_mle, standardize, FitResult};
use crate::linalg::matrix_serde;
use crate::models::{Family, QuantileModel};

pub use exact::{compare_exact, ExactComparator, ExactComparison};
pub use inversion_demo::{cauchy_inversion_demo, InversionDemoSpec, InversionReport, LineExclusion};
pub use severini::{severini_pivot_check, SeveriniReport, SeveriniSolution};

/// Product grid over standardized parameter offsets `u ∈ [−h, h]ᵖ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    /// Points per axis; odd so that the origin is a grid point.
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_half_width() -> f64 {
    3.0
}

fn default_points() -> usize {
    41
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_width: default_half_width(),
            points: default_points(),
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!("half width must be positive, got {}", self.half_width)));
        }
        if self.points < 3 || self.points % 2 == 0 {
            return Err(Error::InvalidGrid(format!("points per axis must be odd and >= 3, got {}", self.points)));
        }
        Ok(())
    }

    /// Axis values, symmetric with an exact 0 in the middle.
    pub fn axis(&self) -> Vec<f64> {
        let m = (self.points / 2) as i64;
        (-m..=m).map(|k| self.half_width * k as f64 / m as f64).collect()
    }

    /// All grid points in row-major order (last coordinate fastest).
    pub fn points_in(&self, p: usize) -> Vec<Vec<f64>> {
        let axis = self.axis();
        let total = self.points.pow(p as u32);
        (0..total)
            .map(|mut k| {
                let mut u = vec![0.0; p];
                for d in (0..p).rev() {
                    u[d] = axis[k % self.points];
                    k /= self.points;
                }
                u
            })
            .collect()
    }
}

/// Sampled points of an observed contour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourCloud {
    pub family: Family,
    pub base_point: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub grid: GridSpec,
    /// `θ = θ̂ + S u` maps standardized offsets to parameter offsets.
    #[serde(with = "matrix_serde")]
    pub scale: DMatrix<f64>,
    /// Standardized offsets `u_k`; grid points outside the parameter domain are omitted.
    pub standardized: Vec<Vec<f64>>,
    /// Parameter offsets `t_k = S u_k`.
    pub offsets: Vec<Vec<f64>>,
    /// `y(x̂; θ̂ + t_k)`.
    pub points: Vec<Vec<f64>>,
    /// Index of the `t = 0` point.
    pub centre_index: usize,
    pub frame: TaylorFrame,
}

impl ContourCloud {
    /// Columns `t1..tp, y1..yn`, one row per grid point.
    pub fn to_csv(&self) -> String {
        let p = self.theta_hat.len();
        let n = self.base_point.len();
        let mut header: Vec<String> = (1..=p).map(|a| format!("t{a}")).collect();
        header.extend((1..=n).map(|i| format!("y{i}")));
        let mut out = header.join(",");
        out.push('\n');
        for (t, y) in self.offsets.iter().zip(&self.points) {
            let row: Vec<String> = t.iter().chain(y).map(|v| format!("{v:?}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn build_contour(model: &dyn QuantileModel, y0: &DVector<f64>, grid: &GridSpec) -> Result<ContourCloud> {
    grid.validate()?;
    let fit = fit_mle(model, y0, None)?;
    contour_from_fit(model, y0, &fit, grid)
}

/// Contour of an existing fit; `y0` is the data point the fit came from.
pub fn contour_from_fit(
    model: &dyn QuantileModel,
    y0: &DVector<f64>,
    fit: &FitResult,
    grid: &GridSpec,
) -> Result<ContourCloud> {
    grid.validate()?;
    let th = fit.theta_hat.as_slice();
    let frame = build_frame(model, &fit.x_hat, th)?;
    let scale = standardize(fit, 1.0)?.scale;
    let evaluated: Vec<Option<(Vec<f64>, Vec<f64>, Vec<f64>)>> = grid
        .points_in(model.p())
        .into_par_iter()
        .map(|u| {
            let t = &scale * DVector::from_column_slice(&u);
            let theta: Vec<f64> = th.iter().zip(t.iter()).map(|(a, b)| a + b).collect();
            if !model.in_domain(&theta) {
                return None;
            }
            let y = model.quantile(&fit.x_hat, &theta);
            Some((u, t.iter().cloned().collect(), y.iter().cloned().collect()))
        })
        .collect();
    let mut cloud = ContourCloud {
        family: model.family(),
        base_point: y0.iter().cloned().collect(),
        theta_hat: th.to_vec(),
        x_hat: fit.x_hat.iter().cloned().collect(),
        grid: *grid,
        scale,
        standardized: Vec::new(),
        offsets: Vec::new(),
        points: Vec::new(),
        centre_index: 0,
        frame,
    };
    for (u, t, y) in evaluated.into_iter().flatten() {
        if u.iter().all(|&v| v == 0.0) {
            cloud.centre_index = cloud.points.len();
        }
        cloud.standardized.push(u);
        cloud.offsets.push(t);
        cloud.points.push(y);
    }
    Ok(cloud)
}

/// Distance from `y` to the trajectory `{y(x̂; θ̂ + t)}`, minimized over `t`
/// by damped Gauss–Newton from `t_start`. Returns the distance and the
/// minimizing offset.
pub fn distance_to_trajectory(
    model: &dyn QuantileModel,
    x_hat: &DVector<f64>,
    theta_hat: &[f64],
    y: &DVector<f64>,
    t_start: &[f64],
) -> (f64, Vec<f64>) {
    let p = model.p();
    let at = |t: &[f64]| -> Vec<f64> { theta_hat.iter().zip(t).map(|(a, b)| a + b).collect() };
    let mut t = t_start.to_vec();
    let mut r = model.quantile(x_hat, &at(&t)) - y;
    let mut cost = r.norm_squared();
    let mut lambda = 1e-6;
    for _ in 0..200 {
        let j = model.dquantile_dtheta(x_hat, &at(&t));
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        // predicted Gauss–Newton decrease; stop once it is lost in rounding
        let pred = match jtj.clone().cholesky() {
            Some(c) => g.dot(&c.solve(&g)),
            None => g.norm_squared() / jtj.diagonal().amax().max(1e-300),
        };
        if !(pred > 1e-26 * cost + 1e-300) {
            break;
        }
        let mut improved = false;
        for _ in 0..12 {
            let mut m = jtj.clone();
            for a in 0..p {
                m[(a, a)] += lambda * jtj[(a, a)].max(1e-300);
            }
            let Some(step) = m.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let cand: Vec<f64> = t.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let th = at(&cand);
            if model.in_domain(&th) {
                let rc = model.quantile(x_hat, &th) - y;
                let cc = rc.norm_squared();
                if cc <= cost {
                    let small = step.amax() <= 1e-15 * (1.0 + t.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
                    t = cand;
                    r = rc;
                    let gain = cost - cc;
                    cost = cc;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = !small && gain > 0.0;
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (cost.sqrt(), t)
}

/// Outcome of rebuilding a contour from one of its own points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub family: Family,
    /// Standardized offset of `y₁` along `A(y⁰)`.
    pub t1: Vec<f64>,
    pub y1: Vec<f64>,
    /// `θ̂⁰ + S t₁`, the parameter value that generated `y₁`.
    pub theta_expected: Vec<f64>,
    pub theta_hat_y1: Vec<f64>,
    pub theta_shift_error: f64,
    /// Largest distance from a point of `A(y₁)` to the continuum `A(y⁰)`.
    pub discrepancy: f64,
    /// The same distance in units of the reference spread.
    pub discrepancy_standardized: f64,
    pub points_checked: usize,
}

/// Largest admissible `‖t₁‖` in standardized units.
pub const PARTITION_T1_CAP: f64 = 5.0;

pub fn partition_check(
    model: &dyn QuantileModel,
    y0: &DVector<f64>,
    t1: &[f64],
    grid: &GridSpec,
) -> Result<PartitionReport> {
    if t1.len() != model.p() {
        return Err(Error::InvalidDimension(format!("t1 has length {}, expected {}", t1.len(), model.p())));
    }
    let norm = t1.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm <= PARTITION_T1_CAP) {
        return Err(Error::InvalidParameter(format!(
            "t1 must lie within {PARTITION_T1_CAP} standardized units, got norm {norm}"
        )));
    }
    let fit0 = fit_mle(model, y0, None)?;
    let cloud0 = contour_from_fit(model, y0, &fit0, grid)?;
    let shift = &cloud0.scale * DVector::from_column_slice(t1);
    let theta_expected: Vec<f64> = fit0.theta_hat.iter().zip(shift.iter()).map(|(a, b)| a + b).collect();
    if !model.in_domain(&theta_expected) {
        return Err(Error::InvalidParameter("t1 leaves the parameter domain".into()));
    }
    let y1 = model.quantile(&fit0.x_hat, &theta_expected);
    let fit1 = fit_mle(model, &y1, None)?;
    let cloud1 = contour_from_fit(model, &y1, &fit1, grid)?;

    let th0 = fit0.theta_hat.as_slice();
    let discrepancy = cloud1
        .points
        .par_iter()
        .map(|q| {
            let qv = DVector::from_column_slice(q);
            let (k, _) = cloud0
                .points
                .iter()
                .enumerate()
                .map(|(k, c)| (k, c.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>()))
                .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
            let grid_d = cloud0.points[k].iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let (d, _) = distance_to_trajectory(model, &fit0.x_hat, th0, &qv, &cloud0.offsets[k]);
            d.min(grid_d)
        })
        .reduce(|| 0.0, f64::max);
    let theta_shift_error = fit1
        .theta_hat
        .iter()
        .zip(&theta_expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(PartitionReport {
        family: model.family(),
        t1: t1.to_vec(),
        y1: y1.iter().cloned().collect(),
        theta_expected,
        theta_hat_y1: fit1.theta_hat.iter().cloned().collect(),
        theta_shift_error,
        discrepancy,
        discrepancy_standardized: discrepancy / model.reference().spread(),
        points_checked: cloud1.points.len(),
    })
}
