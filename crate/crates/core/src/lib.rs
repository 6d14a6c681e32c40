//! Second-order approximate ancillary contours for quantile-function models.
//!
//! The pipeline is: a [`models::QuantileModel`] and data `y⁰` give a fit
//! ([`estimation::fit_mle`]), the fit gives a Taylor frame of tangent and
//! curvature arrays ([`diffgeo::build_frame`]), and the frame gives the
//! observed contour `{y(x̂⁰; θ)}` ([`ancillary::build_contour`]). The
//! [`montecarlo`] module checks how well those contours partition the sample
//! space and how ancillary the resulting labels are.

pub mod ancillary;
pub mod diffgeo;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod models;
pub mod montecarlo;
pub mod rng;

pub use error::{Error, Result};
