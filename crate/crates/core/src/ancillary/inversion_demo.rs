use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::fitted_reference;
use crate::models::{invert_coordinates, make_location_scale, CoordinateInversion, ErrorLaw, QuantileModel};

/// A location-scale contour `{m1 + s ẑ⁰}` for `n = 2` in reciprocal
/// coordinates `ỹ = 1/y`, and the raster used to look at it in `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionDemoSpec {
    /// Observed point in reciprocal coordinates.
    #[serde(default = "default_point")]
    pub y_tilde: [f64; 2],
    /// Optional restriction of the location `m`.
    #[serde(default)]
    pub m_range: Option<[f64; 2]>,
    /// Optional restriction of the scale `s` (always `s > 0`).
    #[serde(default)]
    pub s_range: Option<[f64; 2]>,
    /// The raster covers `[−extent, extent]²` in `y`.
    #[serde(default = "default_extent")]
    pub extent: f64,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Lines `ỹ₂ = ỹ₁ + k` whose axis crossings are reported.
    #[serde(default = "default_lines")]
    pub line_offsets: Vec<f64>,
}

fn default_point() -> [f64; 2] {
    [-0.5, 1.5]
}
fn default_extent() -> f64 {
    4.0
}
fn default_resolution() -> usize {
    400
}
fn default_lines() -> Vec<f64> {
    vec![1.0]
}

impl Default for InversionDemoSpec {
    fn default() -> Self {
        Self {
            y_tilde: default_point(),
            m_range: None,
            s_range: None,
            extent: default_extent(),
            resolution: default_resolution(),
            line_offsets: default_lines(),
        }
    }
}

/// Points of a line in `ỹ` that have no image under `y = 1/ỹ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineExclusion {
    pub offset: f64,
    /// Whether the line lies in the contour.
    pub on_contour: bool,
    pub excluded: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionReport {
    pub y_tilde: [f64; 2],
    pub mu_tilde_hat: f64,
    pub sigma_tilde_hat: f64,
    /// Fitted standardized configuration `ẑ⁰` in reciprocal coordinates.
    pub z_hat: [f64; 2],
    pub resolution: usize,
    pub extent: f64,
    pub marked_pixels: usize,
    /// 8-connected components of the back-mapped contour.
    pub components: usize,
    pub lines: Vec<LineExclusion>,
}

struct Contour {
    z: [f64; 2],
    m_range: Option<[f64; 2]>,
    s_range: Option<[f64; 2]>,
}

impl Contour {
    /// `(m, s)` with `ỹ = m1 + s ẑ`.
    fn coordinates(&self, yt: [f64; 2]) -> (f64, f64) {
        let s = (yt[1] - yt[0]) / (self.z[1] - self.z[0]);
        (yt[0] - s * self.z[0], s)
    }

    fn contains(&self, yt: [f64; 2]) -> bool {
        let (m, s) = self.coordinates(yt);
        let in_m = self.m_range.is_none_or(|[lo, hi]| m >= lo && m <= hi);
        let in_s = self.s_range.is_none_or(|[lo, hi]| s >= lo && s <= hi);
        s > 0.0 && in_m && in_s
    }
}

pub fn cauchy_inversion_demo(spec: &InversionDemoSpec) -> Result<InversionReport> {
    if spec.resolution < 2 || !(spec.extent > 0.0) {
        return Err(Error::InvalidGrid("raster needs resolution >= 2 and positive extent".into()));
    }
    let base = make_location_scale(2, ErrorLaw::Cauchy)?;
    let inverted = invert_coordinates(&base)?;
    let yt0 = DVector::from_column_slice(&spec.y_tilde);
    // the two-point Cauchy likelihood is flat to second order in μ at its
    // maximum, so the estimate comes from the closed form rather than fit_mle
    let theta = match inverted.model.closed_form_mle(&yt0) {
        Some(t) => t?,
        None => unreachable!("two-point Cauchy has a closed form"),
    };
    let x_hat = fitted_reference(&inverted.model, &yt0, theta.as_slice())?;
    let z_hat = [x_hat[0], x_hat[1]];
    let contour = Contour {
        z: z_hat,
        m_range: spec.m_range,
        s_range: spec.s_range,
    };
    let map = CoordinateInversion { n: 2 };

    let res = spec.resolution;
    let h = 2.0 * spec.extent / res as f64;
    let centre = |k: usize| -spec.extent + (k as f64 + 0.5) * h;
    let mut mask = vec![false; res * res];
    for r in 0..res {
        for c in 0..res {
            let y = DVector::from_vec(vec![centre(c), centre(r)]);
            if let Some(yt) = map.forward(&y) {
                mask[r * res + c] = contour.contains([yt[0], yt[1]]);
            }
        }
    }
    let marked_pixels = mask.iter().filter(|&&m| m).count();
    let components = count_components(&mask, res);

    let lines = spec
        .line_offsets
        .iter()
        .map(|&k| {
            // any interior point of the line decides membership of the whole line when s is unrestricted
            let probe = [0.5, 0.5 + k];
            let mut excluded = vec![[0.0, k]];
            if k != 0.0 {
                excluded.push([-k, 0.0]);
            }
            LineExclusion {
                offset: k,
                on_contour: contour.contains(probe),
                excluded,
            }
        })
        .collect();

    Ok(InversionReport {
        y_tilde: spec.y_tilde,
        mu_tilde_hat: theta[0],
        sigma_tilde_hat: theta[1],
        z_hat,
        resolution: res,
        extent: spec.extent,
        marked_pixels,
        components,
        lines,
    })
}

/// Connected components of a square boolean raster under 8-adjacency.
pub(crate) fn count_components(mask: &[bool], res: usize) -> usize {
    let mut seen = vec![false; mask.len()];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            let (r, c) = ((idx / res) as i64, (idx % res) as i64);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= res as i64 || nc >= res as i64 {
                        continue;
                    }
                    let j = nr as usize * res + nc as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn component_counting() {
        #[rustfmt::skip]
        let mask = [
            true,  false, false, true,
            false, true,  false, false,
            false, false, false, true,
            true,  true,  false, true,
        ];
        // the first two cells touch diagonally
        assert_eq!(count_components(&mask, 4), 4);
    }

    #[test]
    fn excluded_points_of_a_line() {
        let r = cauchy_inversion_demo(&InversionDemoSpec {
            resolution: 40,
            ..Default::default()
        })
        .unwrap();
        let line = &r.lines[0];
        assert!(line.on_contour);
        assert_eq!(line.excluded, vec![[0.0, 1.0], [-1.0, 0.0]]);
    }
}
