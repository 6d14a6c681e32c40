//! Dense linear-algebra helpers shared by the geometry and estimation code.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// A `p × p` array of vectors in `ℝ^dim`, symmetric in its two array indices.
///
/// This is how acceleration arrays `W` (vectors in `ℝⁿ`) and regression
/// coefficient arrays `H` (vectors in `ℝᵖ`) are stored. Element `(k, a, b)`
/// is component `k` of the vector at array position `(a, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorArray {
    pub dim: usize,
    pub p: usize,
    /// Row-major over `(k, a, b)`.
    pub data: Vec<f64>,
}

impl VectorArray {
    pub fn zeros(dim: usize, p: usize) -> Self {
        Self {
            dim,
            p,
            data: vec![0.0; dim * p * p],
        }
    }

    #[inline]
    fn idx(&self, k: usize, a: usize, b: usize) -> usize {
        (k * self.p + a) * self.p + b
    }

    #[inline]
    pub fn get(&self, k: usize, a: usize, b: usize) -> f64 {
        self.data[self.idx(k, a, b)]
    }

    /// Sets both `(k, a, b)` and `(k, b, a)`.
    #[inline]
    pub fn set_sym(&mut self, k: usize, a: usize, b: usize, v: f64) {
        let i = self.idx(k, a, b);
        let j = self.idx(k, b, a);
        self.data[i] = v;
        self.data[j] = v;
    }

    /// The vector stored at array position `(a, b)`.
    pub fn vector(&self, a: usize, b: usize) -> DVector<f64> {
        DVector::from_fn(self.dim, |k, _| self.get(k, a, b))
    }

    pub fn set_vector(&mut self, a: usize, b: usize, v: &DVector<f64>) {
        for k in 0..self.dim {
            let i = self.idx(k, a, b);
            self.data[i] = v[k];
            let j = self.idx(k, b, a);
            self.data[j] = v[k];
        }
    }

    /// The quadratic combination `t′ A t = Σ_ab t_a t_b a_ab`.
    pub fn quadratic(&self, t: &[f64]) -> DVector<f64> {
        assert_eq!(t.len(), self.p);
        let mut out = DVector::zeros(self.dim);
        for k in 0..self.dim {
            let mut s = 0.0;
            for a in 0..self.p {
                for b in 0..self.p {
                    s += t[a] * t[b] * self.get(k, a, b);
                }
            }
            out[k] = s;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|A_kab − A_kba|`.
    pub fn asymmetry(&self) -> f64 {
        let mut m = 0.0_f64;
        for k in 0..self.dim {
            for a in 0..self.p {
                for b in 0..self.p {
                    m = m.max((self.get(k, a, b) - self.get(k, b, a)).abs());
                }
            }
        }
        m
    }
}

/// JSON shape used for every dense matrix: explicit dims, row-major data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixJson {
    fn from(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl From<MatrixJson> for DMatrix<f64> {
    fn from(m: MatrixJson) -> Self {
        DMatrix::from_row_slice(m.rows, m.cols, &m.data)
    }
}

/// `#[serde(with = "matrix_serde")]` for `DMatrix<f64>` fields.
pub mod matrix_serde {
    use super::MatrixJson;
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        MatrixJson::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let m = MatrixJson::deserialize(d)?;
        if m.data.len() != m.rows * m.cols {
            return Err(serde::de::Error::custom("matrix data length does not match dims"));
        }
        Ok(m.into())
    }
}

/// `#[serde(with = "vector_serde")]` for `DVector<f64>` fields: a plain array.
pub mod vector_serde {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Ok(DVector::from_vec(v))
    }
}

pub fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Numerical rank of `m` with relative singular-value cutoff `rel_tol`,
/// together with the right singular vectors of the discarded directions.
pub fn rank_with_null(m: &DMatrix<f64>, rel_tol: f64) -> (usize, Vec<Vec<f64>>) {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let mut rank = 0;
    let mut null = Vec::new();
    for (j, &s) in svd.singular_values.iter().enumerate() {
        if smax > 0.0 && s > rel_tol * smax {
            rank += 1;
        } else {
            null.push(v_t.row(j).iter().cloned().collect());
        }
    }
    (rank, null)
}
