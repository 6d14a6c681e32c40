//! Reference (scoring) distributions and parameter-domain intervals.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Error law tag used by model configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorLaw {
    Normal,
    Cauchy,
}

/// Distribution of one coordinate of the reference variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum RefLaw {
    Normal { sd: f64 },
    Cauchy { scale: f64 },
}

impl RefLaw {
    pub fn standard(law: ErrorLaw) -> Self {
        match law {
            ErrorLaw::Normal => RefLaw::Normal { sd: 1.0 },
            ErrorLaw::Cauchy => RefLaw::Cauchy { scale: 1.0 },
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            RefLaw::Normal { sd } => {
                let z = x / sd;
                -0.5 * z * z - LN_SQRT_2PI - sd.ln()
            }
            RefLaw::Cauchy { scale } => {
                let z = x / scale;
                -(PI * scale).ln() - (1.0 + z * z).ln()
            }
        }
    }

    /// First and second derivatives of the log density.
    pub fn log_density_derivs(&self, x: f64) -> (f64, f64) {
        match *self {
            RefLaw::Normal { sd } => {
                let v = sd * sd;
                (-x / v, -1.0 / v)
            }
            RefLaw::Cauchy { scale } => {
                let z = x / scale;
                let q = 1.0 + z * z;
                (
                    -2.0 * z / (scale * q),
                    -2.0 * (1.0 - z * z) / (scale * scale * q * q),
                )
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RefLaw::Normal { sd } => {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            }
            RefLaw::Cauchy { scale } => Cauchy::new(0.0, scale)
                .expect("positive scale")
                .sample(rng),
        }
    }

    /// Typical spread of one coordinate: the sd for Normal, the scale for Cauchy.
    pub fn spread(&self) -> f64 {
        match *self {
            RefLaw::Normal { sd } => sd,
            RefLaw::Cauchy { scale } => scale,
        }
    }
}

/// Open interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const POSITIVE: Interval = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };

    pub fn contains(&self, v: f64) -> bool {
        v > self.lo && v < self.hi
    }

    /// Map a value in the interval to an unconstrained coordinate.
    pub fn to_free(&self, v: f64) -> f64 {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (false, false) => v,
            (true, false) => (v - self.lo).ln(),
            (false, true) => (self.hi - v).ln(),
            (true, true) => {
                let s = (v - self.lo) / (self.hi - self.lo);
                (s / (1.0 - s)).ln()
            }
        }
    }

    /// Inverse of [`Interval::to_free`] with first and second derivatives
    /// of the natural coordinate with respect to the free one.
    pub fn from_free(&self, phi: f64) -> (f64, f64, f64) {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (false, false) => (phi, 1.0, 0.0),
            (true, false) => {
                let e = phi.exp();
                (self.lo + e, e, e)
            }
            (false, true) => {
                let e = phi.exp();
                (self.hi - e, -e, -e)
            }
            (true, true) => {
                let w = self.hi - self.lo;
                let s = 1.0 / (1.0 + (-phi).exp());
                let d = w * s * (1.0 - s);
                (self.lo + w * s, d, d * (1.0 - 2.0 * s))
            }
        }
    }
}
