//! Tangent and curvature arrays of a contour and the coordinate
//! re-expressions used to simplify its second-order expansion.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matrix_serde, rank_with_null, vector_serde, VectorArray};
use crate::models::QuantileModel;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Second-order Taylor frame of `t ↦ y(x̂; θ̂ + t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorFrame {
    #[serde(with = "vector_serde")]
    pub base_point: DVector<f64>,
    /// Velocity array `V` (n × p).
    #[serde(with = "matrix_serde")]
    pub v: DMatrix<f64>,
    /// Acceleration array `W`: `p × p` vectors in `ℝⁿ`.
    pub w: VectorArray,
    /// First fundamental form `V′V`.
    #[serde(with = "matrix_serde")]
    pub gram: DMatrix<f64>,
    /// `V(V′V)⁻¹V′`.
    #[serde(with = "matrix_serde")]
    pub projection: DMatrix<f64>,
    /// Regression coefficients `h_αα′ = (V′V)⁻¹V′w_αα′`: `p × p` vectors in `ℝᵖ`.
    pub h: VectorArray,
    /// Second fundamental form `W̃ = W − VH`.
    pub w_tilde: VectorArray,
}

pub fn build_frame(model: &dyn QuantileModel, x_hat: &DVector<f64>, theta_hat: &[f64]) -> Result<TaylorFrame> {
    if x_hat.len() != model.n() || theta_hat.len() != model.p() {
        return Err(Error::InvalidDimension(format!(
            "frame needs x of length {} and θ of length {}",
            model.n(),
            model.p()
        )));
    }
    frame_from_arrays(
        model.quantile(x_hat, theta_hat),
        model.dquantile_dtheta(x_hat, theta_hat),
        model.d2quantile_dtheta2(x_hat, theta_hat),
    )
}

/// Frame from explicit base point, velocity and acceleration arrays.
pub fn frame_from_arrays(base_point: DVector<f64>, v: DMatrix<f64>, w: VectorArray) -> Result<TaylorFrame> {
    let (n, p) = v.shape();
    if base_point.len() != n || w.dim != n || w.p != p {
        return Err(Error::InvalidDimension("base point, V and W disagree in shape".into()));
    }
    let (h, w_tilde) = orthogonalize(&v, &w)?;
    let gram = v.transpose() * &v;
    let inv = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("first fundamental form is not positive definite".into()))?
        .inverse();
    let projection = &v * inv * v.transpose();
    Ok(TaylorFrame {
        base_point,
        v,
        w,
        gram,
        projection,
        h,
        w_tilde,
    })
}

fn full_rank_check(v: &DMatrix<f64>) -> Result<()> {
    let p = v.ncols();
    let (rank, null) = rank_with_null(v, RANK_TOL);
    if v.nrows() < p || rank < p {
        return Err(Error::DegenerateTangent {
            rank,
            p,
            null_directions: null,
        });
    }
    Ok(())
}

/// Split each curvature vector into its tangential part `V h_αα′` and the
/// residual `w̃_αα′ = (I − P) w_αα′`, by least squares through a QR factorization.
pub fn orthogonalize(v: &DMatrix<f64>, w: &VectorArray) -> Result<(VectorArray, VectorArray)> {
    let (n, p) = v.shape();
    if w.dim != n || w.p != p {
        return Err(Error::InvalidDimension("W does not match V".into()));
    }
    full_rank_check(v)?;
    let qr = v.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let mut h = VectorArray::zeros(p, p);
    let mut w_tilde = VectorArray::zeros(n, p);
    for a in 0..p {
        for b in a..p {
            let wab = w.vector(a, b);
            let qtw = q.transpose() * &wab;
            let coef = r
                .solve_upper_triangular(&qtw)
                .ok_or_else(|| Error::NumericalFailure("triangular solve failed".into()))?;
            // subtract the projection computed from Q directly; it is more
            // accurate than V·coef when V is poorly conditioned
            let resid = &wab - &q * qtw;
            h.set_vector(a, b, &coef);
            w_tilde.set_vector(a, b, &resid);
        }
    }
    Ok((h, w_tilde))
}

impl TaylorFrame {
    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    pub fn p(&self) -> usize {
        self.v.ncols()
    }

    /// `y₀ + Vt + t′Wt / 2 n_scale^{1/2}`.
    pub fn expansion(&self, t: &[f64], n_scale: f64) -> DVector<f64> {
        let tv = DVector::from_column_slice(t);
        &self.base_point + &self.v * tv + self.w.quadratic(t) / (2.0 * n_scale.sqrt())
    }

    /// `y₀ + Vt̃ + t′W̃t / 2 n_scale^{1/2}`, which equals [`TaylorFrame::expansion`]
    /// when `t̃` comes from [`reparameterize`].
    pub fn orthogonal_expansion(&self, t: &[f64], t_tilde: &DVector<f64>, n_scale: f64) -> DVector<f64> {
        &self.base_point + &self.v * t_tilde + self.w_tilde.quadratic(t) / (2.0 * n_scale.sqrt())
    }

    /// Frame in coordinates `u` with `θ = θ̂ + S u`.
    pub fn linear_reparam(&self, s: &DMatrix<f64>) -> Result<TaylorFrame> {
        let p = self.p();
        if s.shape() != (p, p) {
            return Err(Error::InvalidDimension("reparameterization must be p × p".into()));
        }
        let n = self.n();
        let mut w = VectorArray::zeros(n, p);
        for k in 0..n {
            for a in 0..p {
                for b in a..p {
                    let mut acc = 0.0;
                    for c in 0..p {
                        for d in 0..p {
                            acc += s[(c, a)] * s[(d, b)] * self.w.get(k, c, d);
                        }
                    }
                    w.set_sym(k, a, b, acc);
                }
            }
        }
        frame_from_arrays(self.base_point.clone(), &self.v * s, w)
    }
}

/// `t̃ = t + t′Ht / 2 n_scale^{1/2}`.
pub fn reparameterize(frame: &TaylorFrame, t: &[f64], n_scale: f64) -> DVector<f64> {
    DVector::from_column_slice(t) + frame.h.quadratic(t) / (2.0 * n_scale.sqrt())
}

/// One coordinate of a scalar-parameter expansion
/// `y = x + vθ + (a x² + 2 b x θ + w θ²) / 2 n^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarCoordinate {
    #[serde(default)]
    pub a: f64,
    pub v: f64,
    pub b: f64,
    pub w: f64,
}

/// Result of removing the cross term coordinate by coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReexpressionRecord {
    /// Net quadratic coefficient absorbed into the reference: `x̃ = x + a_i x²/2n^{1/2}`.
    pub a: Vec<f64>,
    /// Response re-expression `y = ỹ + c_i ỹ²/2n^{1/2}`, with `c_i v_i = b_i`.
    pub c: Vec<f64>,
    /// Curvature after the re-expression.
    pub w: Vec<f64>,
    /// Indices (into the input) of the retained coordinates, in order.
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    pub n_scale: f64,
    pub input_cross_norm: f64,
    pub residual_cross_norm: f64,
}

/// Coordinates with `|v| <` this are ineffective and dropped.
pub const INEFFECTIVE_V: f64 = 1e-12;

/// Re-express each coordinate so that the `xθ` term vanishes.
///
/// Substituting `y = ỹ + cỹ²/2n^{1/2}` with `c = b/v` gives, to second order,
/// `ỹ = x − (c − a)x²/2n^{1/2} + vθ + (w − bv)θ²/2n^{1/2}`.
pub fn reexpress_scalar(coords: &[ScalarCoordinate], n_scale: f64) -> Result<ReexpressionRecord> {
    if !(n_scale > 0.0) {
        return Err(Error::InvalidParameter(format!("n_scale must be positive, got {n_scale}")));
    }
    let mut rec = ReexpressionRecord {
        a: Vec::new(),
        c: Vec::new(),
        w: Vec::new(),
        kept: Vec::new(),
        dropped: Vec::new(),
        n_scale,
        input_cross_norm: coords.iter().map(|q| q.b * q.b).sum::<f64>().sqrt(),
        residual_cross_norm: 0.0,
    };
    let mut resid = 0.0;
    for (i, q) in coords.iter().enumerate() {
        if q.v.abs() < INEFFECTIVE_V {
            rec.dropped.push(i);
            continue;
        }
        let c = q.b / q.v;
        rec.kept.push(i);
        rec.c.push(c);
        rec.a.push(q.a - c);
        rec.w.push(q.w - c * q.v * q.v);
        let r = q.b - c * q.v;
        resid += r * r;
    }
    if rec.kept.is_empty() {
        return Err(Error::DegenerateModel("every coordinate has zero velocity".into()));
    }
    rec.residual_cross_norm = resid.sqrt();
    Ok(rec)
}

/// Per-coordinate `(v, b, w)` of a scalar model at `(x̂, θ̂)`, with the
/// reference quadratic coefficient `a` taken from `∂²y/∂x²` by differences.
pub fn scalar_coordinates(model: &dyn QuantileModel, x_hat: &DVector<f64>, theta_hat: f64) -> Result<Vec<ScalarCoordinate>> {
    if model.p() != 1 {
        return Err(Error::InvalidDimension(format!("scalar re-expression needs p = 1, got {}", model.p())));
    }
    let th = [theta_hat];
    let mut out = Vec::with_capacity(model.n());
    let (mut v, mut b, mut w) = ([0.0], [0.0], [0.0]);
    for i in 0..model.n() {
        let x = x_hat[i];
        let dx = model.coord_dx(i, x, &th);
        model.coord_dtheta(i, x, &th, &mut v);
        model.coord_cross(i, x, &th, &mut b);
        model.coord_d2theta(i, x, &th, &mut w);
        let h = 1e-4 * x.abs().max(1.0);
        let dxx = (model.coord_dx(i, x + h, &th) - model.coord_dx(i, x - h, &th)) / (2.0 * h);
        // units where ∂y/∂x = 1 at the expansion point
        out.push(ScalarCoordinate {
            a: dxx / (dx * dx),
            v: v[0] / dx,
            b: b[0] / (dx * dx),
            w: w[0] / dx,
        });
    }
    Ok(out)
}
