use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::fit_mle;
use crate::models::{Family, QuantileModel};

/// One solution of `Ã(y) = Ã⁰`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeveriniSolution {
    pub theta: f64,
    pub y: Vec<f64>,
    pub distance_to_y0: f64,
}

/// Back-solving the plug-in pivot `Ã(y) = y − η(θ̂(y))` at its observed value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeveriniReport {
    pub rho: f64,
    pub r0: f64,
    pub theta_hat0: f64,
    /// `Ã⁰` as computed from the fit.
    pub pivot_observed: Vec<f64>,
    /// `((r⁰−ρ)cos θ̂⁰, (r⁰−ρ)sin θ̂⁰, y₃⁰, …)`.
    pub pivot_formula: Vec<f64>,
    pub solutions: Vec<SeveriniSolution>,
    /// Distance from `y⁰` to the nearest solution.
    pub recovery_error: f64,
    /// Exactly one solution lies within `ρ` of `y⁰`.
    pub locally_unique: bool,
    /// `r⁰ = ρ`: every `θ` solves the system and the solution set is a circle.
    pub degenerate: bool,
    pub solution_set_dim: usize,
}

const SCAN: usize = 3600;

/// `Ã(y) = Ã⁰` pins `y₃…yₙ`; in the circle plane every solution has the form
/// `y(θ) = η(θ) + Ã⁰` with `θ̂(y(θ)) = θ`. The scan looks for zeros of
/// `θ̂(y(θ)) − θ` over a full turn and refines them by bisection.
pub fn severini_pivot_check(model: &dyn QuantileModel, y0: &DVector<f64>) -> Result<SeveriniReport> {
    if model.family() != Family::CircleN || model.n() < 3 {
        return Err(Error::UnsupportedFamily(format!(
            "pivot check needs a circleN model with n >= 3, got {} with n = {}",
            model.family(),
            model.n()
        )));
    }
    let rho = model
        .circle_radius()
        .ok_or_else(|| Error::UnsupportedFamily("circle family without a radius".into()))?;
    let fit = fit_mle(model, y0, None)?;
    let a0 = fit.theta_hat[0];
    let n = model.n();
    let zero = DVector::zeros(n);
    let pivot = y0 - model.quantile(&zero, &[a0]);
    let r0 = y0[0].hypot(y0[1]);
    let mut formula = vec![(r0 - rho) * a0.cos(), (r0 - rho) * a0.sin()];
    formula.extend(y0.iter().skip(2));

    let candidate = |th: f64| model.quantile(&zero, &[th]) + &pivot;
    let residual = |th: f64| -> Option<f64> {
        let f = fit_mle(model, &candidate(th), None).ok()?;
        let d = f.theta_hat[0] - th;
        Some(d - 2.0 * PI * ((d + PI) / (2.0 * PI)).floor())
    };

    let grid: Vec<f64> = (0..=SCAN).map(|k| a0 - PI + 2.0 * PI * (k as f64 + 0.5) / SCAN as f64).collect();
    let res: Vec<Option<f64>> = grid.iter().map(|&t| residual(t)).collect();
    let degenerate = res.iter().flatten().all(|e| e.abs() < 1e-12);

    let mut solutions = Vec::new();
    if !degenerate {
        for k in 0..SCAN {
            let (Some(e0), Some(e1)) = (res[k], res[k + 1]) else { continue };
            if e0.abs() > 1.0 || e1.abs() > 1.0 || e0.signum() == e1.signum() {
                continue;
            }
            let (mut lo, mut hi, mut elo) = (grid[k], grid[k + 1], e0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let Some(em) = residual(mid) else { break };
                if em == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if em.signum() == elo.signum() {
                    lo = mid;
                    elo = em;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 {
                    break;
                }
            }
            let th = 0.5 * (lo + hi);
            let y = candidate(th);
            let distance_to_y0 = (&y - y0).amax();
            solutions.push(SeveriniSolution {
                theta: th,
                y: y.iter().cloned().collect(),
                distance_to_y0,
            });
        }
    }
    let recovery_error = solutions.iter().map(|s| s.distance_to_y0).fold(f64::INFINITY, f64::min);
    let near = solutions.iter().filter(|s| s.distance_to_y0 < rho).count();
    Ok(SeveriniReport {
        rho,
        r0,
        theta_hat0: a0,
        pivot_observed: pivot.iter().cloned().collect(),
        pivot_formula: formula,
        recovery_error: if degenerate { 0.0 } else { recovery_error },
        locally_unique: !degenerate && near == 1,
        degenerate,
        solution_set_dim: usize::from(degenerate),
        solutions,
    })
}
