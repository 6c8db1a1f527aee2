use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lpiopt_core::optimizer::{Sampling, ScheduleMode};
use lpiopt_core::problems::{
    quadratic_problem, ridge_problem, synthetic_holder_problem_with, synthetic_regression_data, Dataset,
    DEFAULT_MARGIN,
};
use lpiopt_core::LossProblem;

use crate::BenchError;

/// Environment variable overriding the `m^d` cap.
pub const GRID_CAP_ENV: &str = "LPIOPT_CAP_GRID";

/// JSON schema for [`ExperimentConfig`].
pub const EXPERIMENT_SCHEMA: &str = include_str!("../schema/experiment.schema.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    Ridge {
        lambda_reg: f64,
        d: usize,
    },
    SyntheticHolder {
        eta: f64,
        d: usize,
        p: usize,
        l2: f64,
        #[serde(default = "one")]
        mu: f64,
        #[serde(default = "two")]
        l1: f64,
    },
    Quadratic {
        d: usize,
        p: usize,
    },
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

impl ProblemSpec {
    pub fn build(&self) -> lpiopt_core::Result<LossProblem> {
        match *self {
            ProblemSpec::Ridge { lambda_reg, d } => ridge_problem(lambda_reg, d),
            ProblemSpec::SyntheticHolder { eta, d, p, l2, mu, l1 } => {
                synthetic_holder_problem_with(eta, d, p, l2, mu, l1)
            }
            ProblemSpec::Quadratic { d, p } => quadratic_problem(d, p),
        }
    }

    pub fn d(&self) -> usize {
        match *self {
            ProblemSpec::Ridge { d, .. } | ProblemSpec::SyntheticHolder { d, .. } | ProblemSpec::Quadratic { d, .. } => d,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Generated regression data; the seed defaults to one split from the top-level seed.
    Synthetic {
        n: usize,
        #[serde(default = "default_margin")]
        margin: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Raw CSV, rescaled onto `[margin, 1 - margin]^d`.
    Csv {
        path: PathBuf,
        #[serde(default = "default_margin")]
        margin: f64,
    },
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

fn default_kernel() -> String {
    "boxcar".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OptimizerSpec {
    LpiGd {
        #[serde(default)]
        iterations: Option<usize>,
        #[serde(default)]
        m: Option<usize>,
        #[serde(default)]
        h: Option<f64>,
        #[serde(default)]
        l: Option<u32>,
        #[serde(default = "default_kernel")]
        kernel: String,
        #[serde(default)]
        audit: bool,
    },
    Gd {
        iterations: usize,
        #[serde(default)]
        audit: bool,
    },
    Sgd {
        iterations: usize,
        #[serde(default)]
        sampling: Sampling,
        #[serde(default)]
        record_every: Option<usize>,
    },
}

impl OptimizerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerSpec::LpiGd { .. } => "lpi-gd",
            OptimizerSpec::Gd { .. } => "gd",
            OptimizerSpec::Sgd { .. } => "sgd",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    /// Largest admissible `m^d`.
    #[serde(default)]
    pub max_grid_points: Option<u64>,
    #[serde(default)]
    pub max_runtime_secs: Option<f64>,
}

fn default_mode() -> ScheduleMode {
    ScheduleMode::Practical
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub dataset: DatasetSource,
    pub optimizers: Vec<OptimizerSpec>,
    #[serde(default = "default_mode")]
    pub schedule_mode: ScheduleMode,
    /// Accuracy used for theory schedules, the `converged` flag and the comparison table.
    #[serde(default)]
    pub target_eps: Option<f64>,
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
    pub output_dir: PathBuf,
    pub seed: u64,
    #[serde(default)]
    pub caps: Caps,
    /// Adds measured wall time to the comparison table; off by default so
    /// outputs stay byte-identical across runs.
    #[serde(default)]
    pub report_wall_time: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            BenchError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.optimizers.is_empty() {
            return bad("field `optimizers`: at least one optimizer is required".into());
        }
        if let Some(eps) = self.target_eps {
            if !(eps > 0.0) {
                return bad(format!("field `target_eps`: must be positive, got {eps}"));
            }
        }
        for (i, o) in self.optimizers.iter().enumerate() {
            match o {
                OptimizerSpec::LpiGd { iterations, m, h, l, .. } if self.schedule_mode == ScheduleMode::Practical => {
                    if iterations.is_none() || m.is_none() || h.is_none() || l.is_none() {
                        return bad(format!(
                            "field `optimizers[{i}]`: practical lpi-gd needs `iterations`, `m`, `h` and `l`"
                        ));
                    }
                }
                OptimizerSpec::LpiGd { .. } if self.target_eps.is_none() => {
                    return bad("field `target_eps`: required for theory schedules".into());
                }
                OptimizerSpec::Gd { iterations: 0, .. } | OptimizerSpec::Sgd { iterations: 0, .. } => {
                    return bad(format!("field `optimizers[{i}].iterations`: must be at least 1"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical serialization, excluding the output location.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&canon).expect("config serializes");
        hex(&Sha256::digest(&bytes))
    }

    /// Grid cap from the environment, else the config, else the library default.
    pub fn grid_cap(&self) -> Result<u64, BenchError> {
        match std::env::var(GRID_CAP_ENV) {
            Ok(v) => v
                .trim()
                .parse::<u64>()
                .map_err(|e| BenchError::Config(format!("{GRID_CAP_ENV}={v:?}: {e}"))),
            Err(_) => Ok(self.caps.max_grid_points.unwrap_or(lpiopt_core::DEFAULT_GRID_CAP)),
        }
    }

    pub fn load_dataset(&self) -> Result<Dataset, BenchError> {
        let d = self.problem.d();
        let ds = match &self.dataset {
            DatasetSource::Synthetic { n, margin, seed } => {
                let seed = seed.unwrap_or_else(|| split_seed(self.seed, "dataset"));
                synthetic_regression_data(*n, d, *margin, seed)
            }
            DatasetSource::Csv { path, margin } => Dataset::from_csv_path(path, *margin),
        }
        .map_err(|e| BenchError::Config(format!("field `dataset`: {e}")))?;
        if ds.d() != d {
            return Err(BenchError::Config(format!(
                "field `dataset`: samples have {} coordinates, problem expects d = {d}",
                ds.d()
            )));
        }
        Ok(ds)
    }
}

/// Per-component seed: the first 8 bytes of `SHA-256(seed || label)`.
pub fn split_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest has 32 bytes"))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpCheckConfig {
    pub d: usize,
    pub eta: f64,
    #[serde(default = "one")]
    pub l2: f64,
    #[serde(default = "default_kernel")]
    pub kernel: String,
    pub m_values: Vec<usize>,
    /// `h = bandwidth_factor / m`.
    pub bandwidth_factor: f64,
    pub probes: usize,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl InterpCheckConfig {
    pub fn from_path(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| BenchError::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
    }
}
