//! Run configuration: a JSON file merged with command-line flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DVector;
use qanc::ancillary::{GridSpec, InversionDemoSpec};
use qanc::models::{BuiltinModelSpec, QuantileModel};
use qanc::montecarlo::{OrderStudySpec, PartitionStudySpec, StudySpec};
use qanc::rng::replicate_rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// A model given inline or as a path to a JSON file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Path(PathBuf),
    Inline(BuiltinModelSpec),
}

/// Where the observed data vector comes from. Exactly one key may be given.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Inline(Vec<f64>),
    /// JSON array, or numbers separated by commas or whitespace.
    File(PathBuf),
    Simulate(Simulate),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulate {
    pub theta: Vec<f64>,
    /// Falls back to the run seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    #[serde(default = "default_c")]
    pub c: Vec<f64>,
    #[serde(default = "default_a_range")]
    pub a_range: [f64; 2],
    #[serde(default = "default_a_points")]
    pub a_points: usize,
    #[serde(default = "default_theta")]
    pub theta: Vec<f64>,
}

fn default_c() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}
fn default_a_range() -> [f64; 2] {
    [-3.0, 3.0]
}
fn default_a_points() -> usize {
    61
}
fn default_theta() -> Vec<f64> {
    vec![0.1, 0.3, 0.7, 1.5]
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            c: default_c(),
            a_range: default_a_range(),
            a_points: default_a_points(),
            theta: default_theta(),
        }
    }
}

impl QuadratureSpec {
    pub fn a_grid(&self) -> Vec<f64> {
        let [lo, hi] = self.a_range;
        if self.a_points < 2 {
            return vec![lo];
        }
        (0..self.a_points)
            .map(|k| lo + (hi - lo) * k as f64 / (self.a_points - 1) as f64)
            .collect()
    }
}

/// Studies accepted by `verify`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "study", rename_all = "kebab-case")]
pub enum VerifyStudy {
    AncillarityOrder(OrderStudySpec),
    PartitionOrder(PartitionStudySpec),
    Quadrature(QuadratureSpec),
}

impl VerifyStudy {
    pub fn into_study(self) -> Option<StudySpec> {
        match self {
            VerifyStudy::AncillarityOrder(s) => Some(StudySpec::AncillarityOrder(s)),
            VerifyStudy::PartitionOrder(s) => Some(StudySpec::PartitionOrder(s)),
            VerifyStudy::Quadrature(_) => None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Subcommand this file is meant for; checked when present.
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub model: Option<ModelSource>,
    #[serde(default)]
    pub data: Option<DataSource>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub study: Option<serde_json::Value>,
    #[serde(default)]
    pub inversion: Option<InversionDemoSpec>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub reps: Option<usize>,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Directory that relative paths in the file are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonFlags {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "N")]
    pub reps: Option<usize>,
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Contour grid as "half_width,points".
    #[arg(long, value_name = "HW,POINTS", value_parser = parse_grid)]
    pub grid: Option<GridSpec>,
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let (hw, pts) = s
        .split_once(',')
        .ok_or_else(|| format!("expected \"half_width,points\", got {s:?}"))?;
    let grid = GridSpec {
        half_width: hw.trim().parse().map_err(|e| format!("half width: {e}"))?,
        points: pts.trim().parse().map_err(|e| format!("points: {e}"))?,
    };
    grid.validate().map_err(|e| e.to_string())?;
    Ok(grid)
}

/// Settings after merging defaults, the config file and flags.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub file: RunConfig,
    pub out: PathBuf,
    pub format: Format,
    /// Whether a format was asked for rather than defaulted.
    pub format_given: bool,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub workers: usize,
    pub grid: GridSpec,
}

impl Resolved {
    pub fn new(flags: &CommonFlags, command: &str) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        if let Some(c) = &file.command {
            if c != command {
                return Err(CliError::Usage(format!("config is for `{c}`, not `{command}`")));
            }
        }
        let grid = flags.grid.or(file.grid).unwrap_or_default();
        grid.validate()?;
        let workers = flags
            .workers
            .or(file.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
        if workers == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        Ok(Self {
            out: flags
                .out
                .clone()
                .or_else(|| file.out.as_ref().map(|p| file.base_dir.join(p)))
                .unwrap_or_else(|| PathBuf::from(".")),
            format: flags.format.or(file.format).unwrap_or(Format::Csv),
            format_given: flags.format.or(file.format).is_some(),
            seed: flags.seed.or(file.seed),
            reps: flags.reps.or(file.reps),
            workers,
            grid,
            file,
        })
    }

    pub fn require_seed(&self, what: &str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Usage(format!("{what} is stochastic and needs a seed (--seed or \"seed\")")))
    }

    pub fn model(&self) -> Result<Arc<dyn QuantileModel>, CliError> {
        let spec = match &self.file.model {
            None => return Err(CliError::Usage("config needs a \"model\"".into())),
            Some(ModelSource::Inline(s)) => s.clone(),
            Some(ModelSource::Path(p)) => {
                let path = self.file.base_dir.join(p);
                let text = read(&path)?;
                BuiltinModelSpec::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
        };
        Ok(spec.build()?)
    }

    pub fn data(&self, model: &dyn QuantileModel) -> Result<DVector<f64>, CliError> {
        let y = match &self.file.data {
            None => return Err(CliError::Usage("config needs a \"data\" source".into())),
            Some(DataSource::Inline(v)) => DVector::from_vec(v.clone()),
            Some(DataSource::File(p)) => {
                let path = self.file.base_dir.join(p);
                DVector::from_vec(parse_numbers(&read(&path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?)
            }
            Some(DataSource::Simulate(sim)) => {
                let seed = match sim.seed.or(self.seed) {
                    Some(s) => s,
                    None => return Err(CliError::Usage("simulated data needs a seed".into())),
                };
                simulate(model, &sim.theta, seed)?
            }
        };
        if y.len() != model.n() {
            return Err(CliError::Usage(format!("data has {} values, model has n = {}", y.len(), model.n())));
        }
        Ok(y)
    }

    pub fn study(&self) -> Result<Option<VerifyStudy>, CliError> {
        self.file
            .study
            .clone()
            .map(|v| serde_json::from_value(v).map_err(|e| CliError::Usage(format!("study: {e}"))))
            .transpose()
    }
}

/// One reference draw from the `(seed, 0, 0)` stream mapped through the model.
pub fn simulate(model: &dyn QuantileModel, theta: &[f64], seed: u64) -> Result<DVector<f64>, CliError> {
    if !model.in_domain(theta) {
        return Err(CliError::Usage(format!("simulation parameter {theta:?} is outside the parameter domain")));
    }
    let mut rng = replicate_rng(seed, 0, 0);
    let x = model.sample_reference(&mut rng);
    Ok(model.quantile(&x, theta))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = read(path)?;
    let mut cfg: RunConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(cfg)
}

fn parse_numbers(text: &str) -> Result<Vec<f64>, String> {
    let t = text.trim();
    if t.starts_with('[') {
        return serde_json::from_str(t).map_err(|e| e.to_string());
    }
    t.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_flag_parses_and_validates() {
        assert_eq!(parse_grid("2.5, 11").unwrap(), GridSpec { half_width: 2.5, points: 11 });
        assert!(parse_grid("3,40").is_err());
        assert!(parse_grid("3").is_err());
        assert!(parse_grid("-1,5").is_err());
    }

    #[test]
    fn numbers_from_json_or_plain_text() {
        assert_eq!(parse_numbers("[1, 2.5]").unwrap(), vec![1.0, 2.5]);
        assert_eq!(parse_numbers("1,2\n3 4\n").unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert!(parse_numbers("1,x").is_err());
    }

    #[test]
    fn data_sources_are_exclusive() {
        let two = r#"{"data": {"inline": [1.0], "file": "y.txt"}}"#;
        assert!(serde_json::from_str::<RunConfig>(two).is_err());
        let one = r#"{"data": {"simulate": {"theta": [0.0, 1.0]}}}"#;
        assert!(serde_json::from_str::<RunConfig>(one).is_ok());
    }
}
