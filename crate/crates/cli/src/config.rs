//! Experiment configuration: one TOML file with flat sections. Unknown keys
//! are rejected, the seed is mandatory, and every numeric constraint is
//! validated up front so pipeline stages can assume a sound config.

use serde::{Deserialize, Serialize};

use driftflow::tracer::{TracerConfig, TracerMode};
use driftflow::SpectrumParams;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub spectrum: SpectrumParams,
    pub field: FieldSection,
    pub tracer: TracerSection,
    pub ensemble: EnsembleSection,
    pub analysis: AnalysisSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub mode_count: usize,
    pub strata: usize,
    /// Experiment seed; mandatory, no wall-clock default.
    pub seed: u64,
    /// Sampling floor as a fraction of K + dK.
    #[serde(default = "default_floor")]
    pub floor_factor: f64,
}

fn default_floor() -> f64 {
    driftflow::field::DEFAULT_FLOOR_FACTOR
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TracerSection {
    pub epsilon: f64,
    pub horizon: f64,
    pub dt: f64,
    #[serde(default)]
    pub kappa: f64,
    pub mode: TracerMode,
    #[serde(default)]
    pub sample_stride: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub path_count: usize,
    pub workers: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Log-log fit window [lo, hi] in trajectory time.
    pub fit_window: [f64; 2],
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Smallest grid time; defaults to horizon / 1000.
    #[serde(default)]
    pub grid_min: Option<f64>,
}

fn default_grid_points() -> usize {
    48
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
    #[serde(default)]
    pub write_trajectories: bool,
}

fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.ensemble.path_count == 0 {
            return Err(CliError::Config("ensemble.path_count must be >= 1".into()));
        }
        if self.ensemble.workers == 0 {
            return Err(CliError::Config("ensemble.workers must be >= 1".into()));
        }
        if self.field.mode_count == 0 || self.field.strata == 0 {
            return Err(CliError::Config("field.mode_count and field.strata must be >= 1".into()));
        }
        if self.field.mode_count < self.field.strata {
            return Err(CliError::Config("field.mode_count must be >= field.strata".into()));
        }
        if !(self.field.floor_factor > 0.0 && self.field.floor_factor < 1.0) {
            return Err(CliError::Config("field.floor_factor must lie in (0, 1)".into()));
        }
        let [lo, hi] = self.analysis.fit_window;
        if !(lo > 0.0 && hi > lo) {
            return Err(CliError::Config("analysis.fit_window must satisfy 0 < lo < hi".into()));
        }
        if self.analysis.grid_points < 2 {
            return Err(CliError::Config("analysis.grid_points must be >= 2".into()));
        }
        if let Some(g) = self.analysis.grid_min {
            if g <= 0.0 {
                return Err(CliError::Config("analysis.grid_min must be positive".into()));
            }
        }
        for f in &self.output.formats {
            if f != "csv" && f != "json" {
                return Err(CliError::Config(format!("unknown output format {f:?}")));
            }
        }
        self.tracer_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn tracer_config(&self) -> TracerConfig {
        TracerConfig {
            epsilon: self.tracer.epsilon,
            horizon: self.tracer.horizon,
            dt: self.tracer.dt,
            kappa: self.tracer.kappa,
            mode: self.tracer.mode,
            sample_stride: self.tracer.sample_stride,
        }
    }

    pub fn grid_min(&self) -> f64 {
        self.analysis.grid_min.unwrap_or(self.tracer.horizon / 1000.0)
    }
}
