use serde::{Deserialize, Serialize};

/// Least-squares line through `(ln n, ln estimate)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub arm: String,
    pub delta: f64,
    pub slope: f64,
    /// Standard error from the regression residuals.
    pub se: f64,
    /// `slope ± 2 se`.
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

/// Slope of `ln y` on `ln n`; needs at least three positive points.
pub fn fit_loglog_slope(n: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = n
        .iter()
        .zip(y)
        .filter(|(_, &v)| v > 0.0 && v.is_finite())
        .map(|(&a, &b)| (a.ln(), b.ln()))
        .collect();
    let k = pts.len();
    if k < 3 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let se = (rss / (k as f64 - 2.0) / sxx).sqrt();
    Some((slope, se))
}

/// Mean vector and covariance of the mean from equally weighted batch means.
pub(crate) fn batch_mean_cov(batches: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let b = batches.len();
    let d = batches.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; d];
    for v in batches {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x / b as f64;
        }
    }
    let mut cov = vec![vec![0.0; d]; d];
    if b > 1 {
        for v in batches {
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] += (v[i] - mean[i]) * (v[j] - mean[j]) / ((b * (b - 1)) as f64);
                }
            }
        }
    }
    (mean, cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law() {
        let n = [8.0, 16.0, 32.0, 64.0];
        let y: Vec<f64> = n.iter().map(|v: &f64| 3.0 * v.powf(-0.75)).collect();
        let (s, se) = fit_loglog_slope(&n, &y).unwrap();
        assert!((s + 0.75).abs() < 1e-12 && se < 1e-12);
        assert!(fit_loglog_slope(&n[..2], &y[..2]).is_none());
    }

    #[test]
    fn batch_covariance_of_mean() {
        let (m, c) = batch_mean_cov(&[vec![1.0], vec![3.0]]);
        assert_eq!(m, vec![2.0]);
        assert_eq!(c[0][0], 1.0);
    }
}
