//! Order of ancillarity of contour-cell labels.
//!
//! A lattice of observed contours is laid across the transverse direction of
//! an anchor fit. Each simulated response is labelled by its nearest contour,
//! and the label probabilities are compared at `θ̂` and `θ̂ ± δ` (standardized
//! units). All parameter values share each replicate's reference draw.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::stats::{batch_mean_cov, fit_loglog_slope, SlopeFit};
use super::{ArmCounts, BatchCounts, StatRow, VerificationReport};
use crate::ancillary::distance_to_trajectory;
use crate::diffgeo::build_frame;
use crate::error::{Error, Result};
use crate::estimation::{fit_mle, standardize};
use crate::models::{make_circle, make_location_scale, ErrorLaw, QuantileModel};
use crate::rng::replicate_rng;

/// How a lattice contour is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    /// The full trajectory `{y(x̂_k; θ̂_k + t)}`.
    SecondOrder,
    /// Its tangent plane `y_k + span(V_k)`, curvature dropped.
    TangentOnly,
}

impl Arm {
    pub const ALL: [Arm; 2] = [Arm::SecondOrder, Arm::TangentOnly];

    pub fn name(&self) -> &'static str {
        match self {
            Arm::SecondOrder => "second-order",
            Arm::TangentOnly => "tangent-only",
        }
    }
}

/// Model family indexed by `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OrderFamily {
    /// Circle in the plane with noise variance `1/n`.
    Circle { rho: f64 },
    /// `n` observations from a location-scale law, true `(μ, σ) = (0, 1)`.
    LocationScale { law: ErrorLaw },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderStudySpec {
    pub family: OrderFamily,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    /// Offsets in standardized units; the largest is the headline.
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    /// Contours in the lattice.
    #[serde(default = "default_cells")]
    pub cells: usize,
    /// Lattice spans `±half_width` reference spreads.
    #[serde(default = "default_half_width")]
    pub lattice_half_width: f64,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

fn default_n_grid() -> Vec<usize> {
    vec![8, 16, 32, 64]
}
fn default_deltas() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}
fn default_reps() -> usize {
    20_000
}
fn default_cells() -> usize {
    8
}
fn default_half_width() -> f64 {
    3.0
}
fn default_batches() -> usize {
    100
}

impl OrderStudySpec {
    pub fn new(family: OrderFamily) -> Self {
        Self {
            family,
            n_grid: default_n_grid(),
            deltas: default_deltas(),
            reps: default_reps(),
            cells: default_cells(),
            lattice_half_width: default_half_width(),
            batches: default_batches(),
        }
    }

    pub fn headline_delta(&self) -> f64 {
        self.deltas.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    fn family_name(&self) -> String {
        match self.family {
            OrderFamily::Circle { .. } => "circle".into(),
            OrderFamily::LocationScale { law } => format!("location-scale-{}", format!("{law:?}").to_lowercase()),
        }
    }
}

struct LatticeContour {
    y: DVector<f64>,
    x_hat: DVector<f64>,
    theta_hat: Vec<f64>,
    /// Orthonormal basis of the tangent plane.
    q: DMatrix<f64>,
    /// `(V′V)⁻¹V′`, for the starting offset of the trajectory search.
    pinv: DMatrix<f64>,
}

pub(crate) struct Setup {
    model: Box<dyn QuantileModel>,
    n: usize,
    /// Parameter values in count order: centre, then `(−δ, +δ)` per delta.
    thetas: Vec<Vec<f64>>,
    contours: Vec<LatticeContour>,
}

/// First unit vector orthogonal to the columns of `v`.
fn transverse_direction(v: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = v.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let candidates = v.column_iter().map(|c| c.into_owned()).chain((0..n).map(|i| {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        e
    }));
    for (idx, mut c) in candidates.enumerate() {
        for b in &basis {
            let proj = b.dot(&c);
            c -= b * proj;
        }
        let norm = c.norm();
        if norm > 1e-8 {
            if idx >= v.ncols() {
                return Ok(c / norm);
            }
            basis.push(c / norm);
        }
    }
    Err(Error::DegenerateModel("no direction transverse to the tangent plane".into()))
}

impl OrderStudySpec {
    fn validate(&self) -> Result<()> {
        if self.cells < 2 {
            return Err(Error::Config("need at least two cells".into()));
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::Config("deltas must be non-empty, finite and non-negative".into()));
        }
        if !(self.lattice_half_width > 0.0) {
            return Err(Error::Config("lattice half width must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn setup(&self, n: usize) -> Result<Setup> {
        self.validate()?;
        let (model, x_anchor, theta0): (Box<dyn QuantileModel>, DVector<f64>, Vec<f64>) = match self.family {
            OrderFamily::Circle { rho } => (Box::new(make_circle(rho, 2, 1.0 / n as f64)?), DVector::zeros(2), vec![0.0]),
            OrderFamily::LocationScale { law } => {
                if n < 3 {
                    return Err(Error::InvalidDimension("location-scale lattice needs n >= 3".into()));
                }
                let raw = DVector::from_fn(n, |i, _| -1.0 + 2.0 * i as f64 / (n - 1) as f64);
                let mean = raw.mean();
                let sd = (raw.map(|v| (v - mean).powi(2)).sum() / n as f64).sqrt();
                (Box::new(make_location_scale(n, law)?), raw.map(|v| (v - mean) / sd), vec![0.0, 1.0])
            }
        };
        let y_anchor = model.quantile(&x_anchor, &theta0);
        let fit = fit_mle(model.as_ref(), &y_anchor, None)?;
        let frame = build_frame(model.as_ref(), &fit.x_hat, fit.theta_hat.as_slice())?;
        let scale = standardize(&fit, 1.0)?.scale;
        let across = transverse_direction(&frame.v)?;
        let spread = model.reference().spread();

        let mut thetas = vec![fit.theta_hat.iter().cloned().collect::<Vec<f64>>()];
        for &d in &self.deltas {
            for s in [-1.0, 1.0] {
                let t = scale.column(0) * (s * d);
                thetas.push(fit.theta_hat.iter().zip(t.iter()).map(|(a, b)| a + b).collect());
            }
        }
        for th in &thetas {
            if !model.in_domain(th) {
                return Err(Error::Config(format!("offset parameter {th:?} leaves the domain")));
            }
        }

        let h = self.lattice_half_width;
        let mut contours = Vec::with_capacity(self.cells);
        for k in 0..self.cells {
            let c = -h + 2.0 * h * k as f64 / (self.cells - 1) as f64;
            let y = &y_anchor + &across * (c * spread);
            let fk = fit_mle(model.as_ref(), &y, None)?;
            let v = model.dquantile_dtheta(&fk.x_hat, fk.theta_hat.as_slice());
            let gram = v.transpose() * &v;
            let inv = gram
                .cholesky()
                .ok_or_else(|| Error::DegenerateModel("lattice contour has a degenerate tangent".into()))?
                .inverse();
            contours.push(LatticeContour {
                q: v.clone().qr().q(),
                pinv: inv * v.transpose(),
                y,
                x_hat: fk.x_hat,
                theta_hat: fk.theta_hat.iter().cloned().collect(),
            });
        }
        Ok(Setup {
            model,
            n,
            thetas,
            contours,
        })
    }

    pub(crate) fn run_batch(
        &self,
        setup: &Setup,
        n_index: usize,
        batch: usize,
        (start, end): (u64, u64),
        seed: u64,
    ) -> Result<BatchCounts> {
        let m = setup.model.as_ref();
        let mut counts = [
            vec![vec![0u64; self.cells]; setup.thetas.len()],
            vec![vec![0u64; self.cells]; setup.thetas.len()],
        ];
        for j in start..end {
            let mut rng = replicate_rng(seed, n_index as u64, j);
            let x = m.sample_reference(&mut rng);
            for (oi, th) in setup.thetas.iter().enumerate() {
                let y = m.quantile(&x, th);
                let mut best = [(f64::INFINITY, 0usize); 2];
                for (k, c) in setup.contours.iter().enumerate() {
                    let dy = &y - &c.y;
                    let tangent = (&dy - &c.q * (c.q.transpose() * &dy)).norm();
                    let t0: Vec<f64> = (&c.pinv * &dy).iter().cloned().collect();
                    let (curved, _) = distance_to_trajectory(m, &c.x_hat, &c.theta_hat, &y, &t0);
                    if !curved.is_finite() {
                        return Err(Error::NumericalFailure(format!("distance to contour {k} is not finite")));
                    }
                    if curved < best[0].0 {
                        best[0] = (curved, k);
                    }
                    if tangent < best[1].0 {
                        best[1] = (tangent, k);
                    }
                }
                counts[0][oi][best[0].1] += 1;
                counts[1][oi][best[1].1] += 1;
            }
        }
        let [second, tangent] = counts;
        Ok(BatchCounts {
            n_index,
            n: setup.n,
            batch,
            reps: end - start,
            arms: vec![
                ArmCounts {
                    arm: Arm::SecondOrder,
                    counts: second,
                },
                ArmCounts {
                    arm: Arm::TangentOnly,
                    counts: tangent,
                },
            ],
            values: Vec::new(),
        })
    }

    pub(crate) fn summarize(&self, batches: &[BatchCounts], nb: usize, seed: u64) -> VerificationReport {
        let mut rows = Vec::new();
        for (ni, &n) in self.n_grid.iter().enumerate() {
            let mine: Vec<&BatchCounts> = batches.iter().filter(|b| b.n_index == ni).collect();
            let total: u64 = mine.iter().map(|b| b.reps).sum();
            for (ai, arm) in Arm::ALL.iter().enumerate() {
                for (di, &delta) in self.deltas.iter().enumerate() {
                    let (lo, hi) = (1 + 2 * di, 2 + 2 * di);
                    let diffs = |c: &[Vec<u64>], reps: u64| -> (Vec<f64>, Vec<f64>) {
                        let r = reps as f64;
                        let sym = (0..self.cells)
                            .map(|k| 0.5 * (c[lo][k] + c[hi][k]) as f64 / r - c[0][k] as f64 / r)
                            .collect();
                        let anti = (0..self.cells)
                            .map(|k| 0.5 * (c[hi][k] as f64 - c[lo][k] as f64) / r)
                            .collect();
                        (sym, anti)
                    };
                    let per_batch: Vec<Vec<f64>> = mine.iter().map(|b| diffs(&b.arms[ai].counts, b.reps).0).collect();
                    let mut pooled = vec![vec![0u64; self.cells]; 1 + 2 * self.deltas.len()];
                    for b in &mine {
                        for (o, row) in b.arms[ai].counts.iter().enumerate() {
                            for (k, v) in row.iter().enumerate() {
                                pooled[o][k] += v;
                            }
                        }
                    }
                    let (mean, anti) = diffs(&pooled, total);
                    let (_, cov) = batch_mean_cov(&per_batch);
                    rows.push(sensitivity_row(n, arm.name(), delta, &mean, &anti, &cov, total));
                }
            }
        }
        let ns: Vec<f64> = self.n_grid.iter().map(|&n| n as f64).collect();
        let mut slopes = Vec::new();
        for arm in Arm::ALL {
            for &delta in &self.deltas {
                let ys: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.arm == arm.name() && r.delta == delta)
                    .map(|r| r.estimate)
                    .collect();
                if let Some((slope, se)) = fit_loglog_slope(&ns, &ys) {
                    slopes.push(SlopeFit {
                        arm: arm.name().into(),
                        delta,
                        slope,
                        se,
                        lower: slope - 2.0 * se,
                        upper: slope + 2.0 * se,
                        points: ys.iter().filter(|v| **v > 0.0).count(),
                    });
                }
            }
        }
        VerificationReport {
            study: String::new(),
            family: self.family_name(),
            n_grid: self.n_grid.clone(),
            reps: self.reps,
            batches: nb,
            seed,
            rows,
            slopes,
        }
    }
}

fn sensitivity_row(
    n: usize,
    arm: &str,
    delta: f64,
    mean: &[f64],
    anti: &[f64],
    cov: &[Vec<f64>],
    reps: u64,
) -> StatRow {
    let scale = if delta > 0.0 { 1.0 / delta } else { 1.0 };
    let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
    let trace: f64 = (0..mean.len()).map(|k| cov[k][k]).sum();
    let floor = trace.sqrt() * scale;
    let se = if norm > 0.0 {
        let mut q = 0.0;
        for i in 0..mean.len() {
            for j in 0..mean.len() {
                q += mean[i] * cov[i][j] * mean[j];
            }
        }
        (q.max(0.0)).sqrt() / norm * scale
    } else {
        floor
    };
    let estimate = norm * scale;
    let max_abs_z = mean
        .iter()
        .enumerate()
        .map(|(k, m)| if cov[k][k] > 0.0 { (m / cov[k][k].sqrt()).abs() } else { 0.0 })
        .fold(0.0, f64::max);
    let inconclusive = estimate < 3.0 * floor;
    let required_reps = (inconclusive && estimate > 0.0).then(|| (reps as f64 * (3.0 * floor / estimate).powi(2)).ceil() as u64);
    StatRow {
        n,
        arm: arm.into(),
        delta,
        estimate,
        se,
        noise_floor: floor,
        max_abs_z: Some(max_abs_z),
        first_difference: Some(anti.iter().map(|v| v * v).sum::<f64>().sqrt() * scale),
        inconclusive,
        required_reps,
    }
}
