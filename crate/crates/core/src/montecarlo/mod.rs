//! Replicated simulation studies that check the order claims for observed
//! contours, plus the scalar quadrature identity.
//!
//! Every replicate draws from its own counter-seeded generator and batches
//! are aggregated in a fixed order, so reports are bit-identical for any
//! worker count.

mod order;
mod partition;
mod quadrature;
mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use order::{Arm, OrderFamily, OrderStudySpec};
pub use partition::PartitionStudySpec;
pub use quadrature::{ancillary_density, integrate, quadrature_first_derivative, QuadratureReport};
pub use stats::{fit_loglog_slope, SlopeFit};

/// Label counts of one arm: `counts[offset][cell]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmCounts {
    pub arm: Arm,
    pub counts: Vec<Vec<u64>>,
}

/// Raw output of one batch of replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchCounts {
    /// Position of the sample size in the study's `n` grid.
    pub n_index: usize,
    pub n: usize,
    pub batch: usize,
    pub reps: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub arms: Vec<ArmCounts>,
    /// Per-replicate measurements for continuous statistics.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
}

/// A replicated study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "study", rename_all = "kebab-case")]
pub enum StudySpec {
    AncillarityOrder(OrderStudySpec),
    PartitionOrder(PartitionStudySpec),
}

impl StudySpec {
    fn tag(&self) -> &'static str {
        match self {
            StudySpec::AncillarityOrder(_) => "ancillarity-order",
            StudySpec::PartitionOrder(_) => "partition-order",
        }
    }

    pub fn n_grid(&self) -> &[usize] {
        match self {
            StudySpec::AncillarityOrder(s) => &s.n_grid,
            StudySpec::PartitionOrder(s) => &s.n_grid,
        }
    }

    pub fn reps(&self) -> usize {
        match self {
            StudySpec::AncillarityOrder(s) => s.reps,
            StudySpec::PartitionOrder(s) => s.reps,
        }
    }

    pub fn set_reps(&mut self, reps: usize) {
        match self {
            StudySpec::AncillarityOrder(s) => s.reps = reps,
            StudySpec::PartitionOrder(s) => s.reps = reps,
        }
    }

    fn batches(&self) -> usize {
        match self {
            StudySpec::AncillarityOrder(s) => s.batches,
            StudySpec::PartitionOrder(s) => s.batches,
        }
    }
}

/// One statistic at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub n: usize,
    /// `second-order`, `tangent-only` or `partition`.
    pub arm: String,
    /// Parameter offset in standardized units.
    pub delta: f64,
    pub estimate: f64,
    pub se: f64,
    /// Size of the estimate expected from Monte Carlo noise alone.
    pub noise_floor: f64,
    /// Largest `|z|` of the per-cell probability changes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_abs_z: Option<f64>,
    /// Norm of the antisymmetric (first) difference, per unit offset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_difference: Option<f64>,
    pub inconclusive: bool,
    /// Replications needed for the estimate to clear three noise floors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub required_reps: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub study: String,
    pub family: String,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub batches: usize,
    pub seed: u64,
    pub rows: Vec<StatRow>,
    pub slopes: Vec<SlopeFit>,
}

impl VerificationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One line per `(n, arm, delta)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,arm,delta,estimate,se,noise_floor,inconclusive\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:?},{:?},{:?},{:?},{}\n",
                r.n, r.arm, r.delta, r.estimate, r.se, r.noise_floor, r.inconclusive
            ));
        }
        out
    }

    pub fn slope(&self, arm: &str, delta: f64) -> Option<&SlopeFit> {
        self.slopes.iter().find(|s| s.arm == arm && s.delta == delta)
    }

    pub fn rows_for(&self, arm: &str, delta: f64) -> Vec<&StatRow> {
        self.rows.iter().filter(|r| r.arm == arm && r.delta == delta).collect()
    }
}

/// Replicate range `[start, end)` of each batch.
fn batch_ranges(reps: usize, batches: usize) -> Vec<(u64, u64)> {
    let b = batches.clamp(1, reps);
    (0..b)
        .map(|k| ((k * reps / b) as u64, ((k + 1) * reps / b) as u64))
        .collect()
}

/// Run a study on `workers` threads. The report depends only on the spec and
/// the seed.
pub fn run_replicated(spec: &StudySpec, workers: usize, seed: u64) -> Result<VerificationReport> {
    if spec.reps() == 0 {
        return Err(Error::EmptyStudy);
    }
    if spec.n_grid().is_empty() {
        return Err(Error::Config("study needs a non-empty n grid".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::NumericalFailure(format!("thread pool: {e}")))?;

    let ranges = batch_ranges(spec.reps(), spec.batches());
    match spec {
        StudySpec::AncillarityOrder(s) => {
            let setups = s.n_grid.iter().map(|&n| s.setup(n)).collect::<Result<Vec<_>>>()?;
            let jobs: Vec<(usize, usize)> = (0..setups.len())
                .flat_map(|i| (0..ranges.len()).map(move |b| (i, b)))
                .collect();
            let results: Vec<Result<BatchCounts>> = pool.install(|| {
                jobs.par_iter()
                    .map(|&(i, b)| s.run_batch(&setups[i], i, b, ranges[b], seed))
                    .collect()
            });
            let batches = collect_batches(results)?;
            Ok(s.summarize(&batches, ranges.len(), seed))
        }
        StudySpec::PartitionOrder(s) => {
            s.validate()?;
            let jobs: Vec<(usize, usize)> = (0..s.n_grid.len())
                .flat_map(|i| (0..ranges.len()).map(move |b| (i, b)))
                .collect();
            let results: Vec<Result<BatchCounts>> = pool.install(|| {
                jobs.par_iter()
                    .map(|&(i, b)| s.run_batch(i, b, ranges[b], seed))
                    .collect()
            });
            let batches = collect_batches(results)?;
            Ok(s.summarize(&batches, ranges.len(), seed))
        }
    }
    .map(|mut r: VerificationReport| {
        r.study = spec.tag().to_string();
        r
    })
}

fn collect_batches(results: Vec<Result<BatchCounts>>) -> Result<Vec<BatchCounts>> {
    let total = results.len();
    let mut done = Vec::with_capacity(total);
    let mut first_err = None;
    for r in results {
        match r {
            Ok(b) => done.push(b),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        None => Ok(done),
        Some(e) => Err(Error::PartialResults {
            completed: done.len(),
            total,
            batches: done,
            source: Box::new(e),
        }),
    }
}
