//! Run configuration: JSON file merged with command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use claimscore::{ClaimScoreConfig, Error, GridSpec, ModelSpec, Result, Schema, SimulationConfig};
use serde::{Deserialize, Serialize};

use crate::args::CommonArgs;

/// Every specification of the model matrix, grouped as static, one-product,
/// multi-product and piecewise-linear.
pub const DEFAULT_MODELS: &[&str] = &[
    "GLM-PG", "GLM-PIG", "GLM-NBG", "GLM-NBIG",
    "GLM-PG-One", "GLM-PIG-One", "GLM-NBG-One", "GLM-NBIG-One",
    "GAM-PG-One", "GAM-PIG-One", "GAM-NBG-One", "GAM-NBIG-One",
    "GLM-PG-Multi", "GLM-PIG-Multi", "GLM-NBG-Multi", "GLM-NBIG-Multi",
    "GAM-PG-Multi", "GAM-PIG-Multi", "GAM-NBG-Multi", "GAM-NBIG-Multi",
    "GAM-PG-Multi-PL", "GAM-PIG-Multi-PL", "GAM-NBG-Multi-PL", "GAM-NBIG-Multi-PL",
];

pub const DEFAULT_BENCHMARK: &str = "GLM-PG";
pub const DEFAULT_OUT: &str = "claimscore-out";
pub const OPTIMAL_CONFIGS_FILE: &str = "optimal_configs.json";

/// Contents of a `--config` file. Every entry is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub history: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub models: Option<Vec<String>>,
    pub benchmark: Option<String>,
    pub grid: Option<GridSpec>,
    pub simulation: Option<SimulationConfig>,
    /// Claim-score parameters by product name.
    pub score_configs: BTreeMap<String, ClaimScoreConfig>,
    pub spline_k: Option<usize>,
    pub smoothing: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Validation { file: path.display().to_string(), row: e.line(), message: e.to_string() })
    }
}

/// Effective settings after merging file and flags.
#[derive(Debug, Clone)]
pub struct Settings {
    pub out: PathBuf,
    pub data: PathBuf,
    pub schema: PathBuf,
    pub history: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: usize,
    pub models: Vec<String>,
    pub benchmark: String,
    pub grid: GridSpec,
    pub simulation: SimulationConfig,
    pub score_configs: BTreeMap<String, ClaimScoreConfig>,
    pub spline_k: usize,
    pub smoothing: f64,
}

impl Settings {
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let out = args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        let history = args.history.clone().or(file.history).or_else(|| {
            let default = out.join("history.csv");
            default.exists().then_some(default)
        });
        let mut simulation = file.simulation.unwrap_or_default();
        let seed = args.seed.or(file.seed);
        if let Some(seed) = seed {
            simulation.seed = seed;
        }
        let models = args
            .models
            .clone()
            .or(file.models)
            .unwrap_or_else(|| DEFAULT_MODELS.iter().map(|s| s.to_string()).collect());
        let settings = Self {
            data: args.data.clone().or(file.data).unwrap_or_else(|| out.join("records.csv")),
            schema: args.schema.clone().or(file.schema).unwrap_or_else(|| out.join("schema.json")),
            history,
            seed,
            jobs: args.jobs.or(file.jobs).unwrap_or(1),
            models: models.into_iter().map(|m| m.trim().to_string()).filter(|m| !m.is_empty()).collect(),
            benchmark: args.benchmark.clone().or(file.benchmark).unwrap_or_else(|| DEFAULT_BENCHMARK.into()),
            grid: file.grid.unwrap_or_default(),
            simulation,
            score_configs: file.score_configs,
            spline_k: file.spline_k.unwrap_or(ModelSpec::DEFAULT_SPLINE_K),
            smoothing: file.smoothing.unwrap_or(0.0),
            out,
        };
        if settings.jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        if settings.models.is_empty() {
            return Err(Error::Config("no models requested".into()));
        }
        Ok(settings)
    }

    /// Parse every requested model for `product`.
    pub fn model_specs(&self, product: usize) -> Result<Vec<ModelSpec>> {
        self.models
            .iter()
            .map(|abbr| {
                let mut spec = ModelSpec::parse(abbr, product)?;
                spec.spline_k = self.spline_k;
                spec.smoothing = self.smoothing;
                Ok(spec)
            })
            .collect()
    }

    /// Claim-score parameters per product index: the run configuration wins,
    /// then a previous `optimize` result in the output directory, then a
    /// fixed default. Returns warnings for products on the default.
    pub fn resolve_score_configs(&self, schema: &Schema) -> Result<(BTreeMap<usize, ClaimScoreConfig>, Vec<String>)> {
        let optimal_path = self.out.join(OPTIMAL_CONFIGS_FILE);
        let optimal: BTreeMap<String, ClaimScoreConfig> = if optimal_path.exists() {
            let text = std::fs::read_to_string(&optimal_path)?;
            serde_json::from_str(&text)?
        } else {
            BTreeMap::new()
        };
        for name in self.score_configs.keys().chain(optimal.keys()) {
            if schema.product_index(name).is_none() {
                return Err(Error::Config(format!("claim-score configuration for unknown product {name:?}")));
            }
        }
        let mut configs = BTreeMap::new();
        let mut warnings = Vec::new();
        for j in 0..schema.num_products() {
            let name = schema.product_name(j);
            let cfg = match self.score_configs.get(name).or_else(|| optimal.get(name)) {
                Some(cfg) => *cfg,
                None => {
                    let cfg = default_score_config();
                    warnings.push(format!("no claim-score configuration for product {name}; using {cfg}"));
                    cfg
                }
            };
            configs.insert(j, cfg);
        }
        Ok((configs, warnings))
    }
}

pub fn default_score_config() -> ClaimScoreConfig {
    ClaimScoreConfig::new(2, 5, 2).expect("valid default")
}
