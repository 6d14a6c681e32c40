//! Order of the partition discrepancy for a curved scalar model.

use serde::{Deserialize, Serialize};

use super::stats::{batch_mean_cov, fit_loglog_slope, SlopeFit};
use super::{BatchCounts, StatRow, VerificationReport};
use crate::ancillary::{partition_check, GridSpec};
use crate::error::{Error, Result};
use crate::models::{CurvedScalar, QuantileModel};
use crate::rng::replicate_rng;

/// Each replicate draws `y⁰` from the curved scalar model, moves `t1`
/// standardized units along `A(y⁰)` and measures how far `A(y₁)` strays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionStudySpec {
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_t1")]
    pub t1: f64,
    /// True parameter used to simulate `y⁰`.
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

fn default_n_grid() -> Vec<usize> {
    vec![16, 64, 256, 1024]
}
fn default_reps() -> usize {
    24
}
fn default_t1() -> f64 {
    1.0
}
fn default_theta() -> f64 {
    0.3
}
fn default_batches() -> usize {
    24
}

impl Default for PartitionStudySpec {
    fn default() -> Self {
        Self {
            n_grid: default_n_grid(),
            reps: default_reps(),
            t1: default_t1(),
            theta: default_theta(),
            grid: GridSpec::default(),
            batches: default_batches(),
        }
    }
}

impl PartitionStudySpec {
    pub(crate) fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.n_grid.iter().any(|&n| n < 2) {
            return Err(Error::Config("partition study needs n >= 2".into()));
        }
        Ok(())
    }

    pub(crate) fn run_batch(&self, n_index: usize, batch: usize, (start, end): (u64, u64), seed: u64) -> Result<BatchCounts> {
        let n = self.n_grid[n_index];
        let model = CurvedScalar::new(n)?;
        let mut values = Vec::with_capacity((end - start) as usize);
        for j in start..end {
            let mut rng = replicate_rng(seed, n_index as u64, j);
            let x = model.sample_reference(&mut rng);
            let y0 = model.quantile(&x, &[self.theta]);
            values.push(partition_check(&model, &y0, &[self.t1], &self.grid)?.discrepancy);
        }
        Ok(BatchCounts {
            n_index,
            n,
            batch,
            reps: end - start,
            arms: Vec::new(),
            values,
        })
    }

    pub(crate) fn summarize(&self, batches: &[BatchCounts], nb: usize, seed: u64) -> VerificationReport {
        let mut rows = Vec::new();
        for (ni, &n) in self.n_grid.iter().enumerate() {
            let mine: Vec<&BatchCounts> = batches.iter().filter(|b| b.n_index == ni).collect();
            let all: Vec<f64> = mine.iter().flat_map(|b| b.values.iter().cloned()).collect();
            let mean = all.iter().sum::<f64>() / all.len() as f64;
            let per_batch: Vec<Vec<f64>> = mine
                .iter()
                .map(|b| vec![b.values.iter().sum::<f64>() / b.values.len() as f64])
                .collect();
            let (_, cov) = batch_mean_cov(&per_batch);
            let se = cov[0][0].sqrt();
            rows.push(StatRow {
                n,
                arm: "partition".into(),
                delta: self.t1,
                estimate: mean,
                se,
                noise_floor: se,
                max_abs_z: None,
                first_difference: None,
                inconclusive: mean < 3.0 * se,
                required_reps: None,
            });
        }
        let ns: Vec<f64> = self.n_grid.iter().map(|&n| n as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.estimate).collect();
        let slopes = fit_loglog_slope(&ns, &ys)
            .map(|(slope, se)| SlopeFit {
                arm: "partition".into(),
                delta: self.t1,
                slope,
                se,
                lower: slope - 2.0 * se,
                upper: slope + 2.0 * se,
                points: ys.len(),
            })
            .into_iter()
            .collect();
        VerificationReport {
            study: String::new(),
            family: "curved-scalar".into(),
            n_grid: self.n_grid.clone(),
            reps: self.reps,
            batches: nb,
            seed,
            rows,
            slopes,
        }
    }
}
