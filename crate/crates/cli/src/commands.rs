use std::sync::Arc;

use nalgebra::DVector;
use qanc::ancillary::{
    cauchy_inversion_demo, compare_exact, contour_from_fit, severini_pivot_check, ContourCloud, InversionDemoSpec,
};
use qanc::diffgeo::build_frame;
use qanc::estimation::{fit_mle, FitResult};
use qanc::models::{
    make_circle, make_location_scale, make_nonlinear_regression, ErrorLaw, ExponentialMean, QuantileModel, SigmaMode,
};
use qanc::montecarlo::{quadrature_first_derivative, run_replicated, OrderFamily, OrderStudySpec};
use serde::Serialize;

use crate::config::{simulate, Format, QuadratureSpec, Resolved, VerifyStudy};
use crate::output::{join, Outputs};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Example {
    Circle2d,
    LocationScale,
    NonlinregKnown,
    NonlinregUnknown,
    Severini,
    CauchyInversion,
}

/// Seed used by the simulated regression examples when none is given.
pub const EXAMPLE_SEED: u64 = 1;

fn json<T: Serialize>(v: &T) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(v).map_err(qanc::Error::from)? + "\n")
}

fn contour_files(out: &mut Outputs, cloud: &ContourCloud, format: Format) -> Result<(), CliError> {
    match format {
        Format::Csv => out.file("contour.csv", cloud.to_csv()),
        Format::Json => out.file("contour.json", cloud.to_json()? + "\n"),
    }
    Ok(())
}

fn fit_summary(out: &mut Outputs, model: &dyn QuantileModel, fit: &FitResult) {
    out.kv("family", model.family());
    out.kv("n", model.n());
    out.kv("p", model.p());
    out.kv("theta_hat", join(fit.theta_hat.as_slice()));
    out.kv("x_hat", join(fit.x_hat.as_slice()));
    out.kv("converged", fit.converged);
}

fn contour_outputs(
    out: &mut Outputs,
    model: &dyn QuantileModel,
    y0: &DVector<f64>,
    cfg: &Resolved,
) -> Result<ContourCloud, CliError> {
    let fit = fit_mle(model, y0, None)?;
    let cloud = contour_from_fit(model, y0, &fit, &cfg.grid)?;
    fit_summary(out, model, &fit);
    out.kv("points", cloud.points.len());
    out.kv("centre", join(&cloud.points[cloud.centre_index]));
    contour_files(out, &cloud, cfg.format)?;
    Ok(cloud)
}

pub fn contour(cfg: &Resolved) -> Result<Outputs, CliError> {
    let model = cfg.model()?;
    let y0 = cfg.data(&*model)?;
    let mut out = Outputs::default();
    out.kv("command", "contour");
    contour_outputs(&mut out, &*model, &y0, cfg)?;
    Ok(out)
}

#[derive(Serialize)]
struct FrameFile<'a> {
    fit: &'a FitResult,
    frame: &'a qanc::diffgeo::TaylorFrame,
}

pub fn frame(cfg: &Resolved) -> Result<Outputs, CliError> {
    if cfg.format == Format::Csv && cfg.format_given {
        return Err(CliError::Usage("frame output is JSON only".into()));
    }
    let model = cfg.model()?;
    let y0 = cfg.data(&*model)?;
    let fit = fit_mle(&*model, &y0, None)?;
    let frame = build_frame(&*model, &fit.x_hat, fit.theta_hat.as_slice())?;
    let mut out = Outputs::default();
    out.kv("command", "frame");
    fit_summary(&mut out, &*model, &fit);
    out.kv("second_fundamental_form_max", format!("{:?}", frame.w_tilde.max_abs()));
    out.file("frame.json", json(&FrameFile { fit: &fit, frame: &frame })?);
    Ok(out)
}

pub fn verify(cfg: &Resolved, default_study: Option<&str>) -> Result<Outputs, CliError> {
    let study = match (cfg.study()?, default_study) {
        (Some(s), _) => s,
        (None, Some("ancillarity-order")) => {
            VerifyStudy::AncillarityOrder(OrderStudySpec::new(OrderFamily::Circle { rho: 1.0 }))
        }
        (None, Some("partition-order")) => VerifyStudy::PartitionOrder(Default::default()),
        (None, Some("quadrature")) => VerifyStudy::Quadrature(QuadratureSpec::default()),
        (None, Some(other)) => return Err(CliError::Usage(format!("unknown study {other:?}"))),
        (None, None) => return Err(CliError::Usage("verify needs a \"study\" in --config or --study".into())),
    };
    let mut out = Outputs::default();
    out.kv("command", "verify");
    if let VerifyStudy::Quadrature(q) = &study {
        let a = q.a_grid();
        let mut reports = Vec::new();
        let mut csv = String::from("c,max_derivative,max_symmetry_error\n");
        for &c in &q.c {
            let r = quadrature_first_derivative(c, &q.theta, &a)?;
            csv.push_str(&format!("{c:?},{:?},{:?}\n", r.max_derivative, r.max_symmetry_error));
            out.kv(&format!("max_derivative[c={c}]"), format!("{:?}", r.max_derivative));
            out.kv(&format!("max_symmetry_error[c={c}]"), format!("{:?}", r.max_symmetry_error));
            reports.push(r);
        }
        out.kv("study", "quadrature");
        out.file("quadrature.json", json(&reports)?);
        out.file("quadrature.csv", csv);
        return Ok(out);
    }
    let seed = cfg.require_seed("verify")?;
    let mut spec = study.into_study().expect("stochastic study");
    if let Some(r) = cfg.reps {
        spec.set_reps(r);
    }
    let report = run_replicated(&spec, cfg.workers, seed)?;
    out.kv("study", &report.study);
    out.kv("family", &report.family);
    out.kv("reps", report.reps);
    out.kv("seed", report.seed);
    for s in &report.slopes {
        out.kv(
            &format!("slope[{},delta={}]", s.arm, s.delta),
            format!("{:.4} se={:.4} points={}", s.slope, s.se, s.points),
        );
    }
    let inconclusive = report.rows.iter().filter(|r| r.inconclusive).count();
    out.kv("inconclusive_rows", inconclusive);
    out.file("report.json", report.to_json()? + "\n");
    out.file("report.csv", report.to_csv());
    Ok(out)
}

fn regression_example(cfg: &Resolved, unknown: bool) -> Result<(Arc<dyn QuantileModel>, DVector<f64>), CliError> {
    let times: Vec<f64> = (0..10).map(|i| 0.5 * i as f64).collect();
    let eta = Arc::new(ExponentialMean { times });
    let (model, theta): (Arc<dyn QuantileModel>, Vec<f64>) = if unknown {
        (Arc::new(make_nonlinear_regression(eta, 2, SigmaMode::Unknown)?), vec![2.0, 0.4, 0.1])
    } else {
        (Arc::new(make_nonlinear_regression(eta, 2, SigmaMode::Known(0.1))?), vec![2.0, 0.4])
    };
    let y = simulate(&*model, &theta, cfg.seed.unwrap_or(EXAMPLE_SEED))?;
    Ok((model, y))
}

pub fn example(name: Example, cfg: &Resolved) -> Result<Outputs, CliError> {
    let mut out = Outputs::default();
    out.kv("command", "example");
    match name {
        Example::Circle2d => {
            out.kv("example", "circle2d");
            let model = make_circle(1.0, 2, 0.5)?;
            let y0 = DVector::from_vec(vec![1.2, 0.0]);
            let cloud = contour_outputs(&mut out, &model, &y0, cfg)?;
            let cmp = compare_exact(&model, &cloud)?;
            if let Some([rho, r0]) = cmp.radii {
                out.kv("rho", format!("{rho:?}"));
                out.kv("r0", format!("{r0:?}"));
            }
            out.kv("exact_label_spread", format!("{:?}", cmp.label_spread));
            out.file("comparison.json", json(&cmp)?);
        }
        Example::LocationScale => {
            out.kv("example", "location-scale");
            let model = make_location_scale(5, ErrorLaw::Normal)?;
            let y0 = DVector::from_vec(vec![1.3, -0.4, 2.2, 0.7, -1.1]);
            let cloud = contour_outputs(&mut out, &model, &y0, cfg)?;
            let cmp = compare_exact(&model, &cloud)?;
            out.kv("exact_label_spread", format!("{:?}", cmp.label_spread));
            out.kv("second_fundamental_form_max", format!("{:?}", cloud.frame.w_tilde.max_abs()));
            out.file("comparison.json", json(&cmp)?);
        }
        Example::NonlinregKnown | Example::NonlinregUnknown => {
            let unknown = name == Example::NonlinregUnknown;
            out.kv("example", if unknown { "nonlinreg-unknown" } else { "nonlinreg-known" });
            out.kv("seed", cfg.seed.unwrap_or(EXAMPLE_SEED));
            let (model, y0) = regression_example(cfg, unknown)?;
            out.kv("data", join(y0.as_slice()));
            let cloud = contour_outputs(&mut out, &*model, &y0, cfg)?;
            out.kv("second_fundamental_form_max", format!("{:?}", cloud.frame.w_tilde.max_abs()));
        }
        Example::Severini => {
            out.kv("example", "severini");
            let model = make_circle(1.0, 3, 1.0 / 3.0)?;
            let y0 = DVector::from_vec(vec![1.3 * 0.7f64.cos(), 1.3 * 0.7f64.sin(), 0.4]);
            let rep = severini_pivot_check(&model, &y0)?;
            out.kv("y0", join(y0.as_slice()));
            out.kv("locally_unique", rep.locally_unique);
            out.kv("recovery_error", format!("{:?}", rep.recovery_error));
            if rep.locally_unique && rep.recovery_error <= 1e-8 {
                out.kv("back_solution", "y0");
            }
            out.kv("solutions", rep.solutions.len());
            for (k, s) in rep.solutions.iter().enumerate() {
                out.kv(&format!("solution[{k}]"), format!("{} distance={:?}", join(&s.y), s.distance_to_y0));
            }
            out.file("severini.json", json(&rep)?);
        }
        Example::CauchyInversion => {
            out.kv("example", "cauchy-inversion");
            let spec = cfg.file.inversion.clone().unwrap_or_else(InversionDemoSpec::default);
            let rep = cauchy_inversion_demo(&spec)?;
            out.kv("y_tilde", join(&rep.y_tilde));
            out.kv("z_hat", join(&rep.z_hat));
            out.kv("components", rep.components);
            for l in &rep.lines {
                let pts: Vec<String> = l.excluded.iter().map(|p| format!("({:?},{:?})", p[0], p[1])).collect();
                out.kv(&format!("excluded[offset={}]", l.offset), pts.join(";"));
            }
            out.file("inversion.json", json(&rep)?);
        }
    }
    Ok(out)
}
