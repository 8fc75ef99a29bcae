//! Experiment configuration: a flat `key = value` text file.
//!
//! One assignment per line, `#` starts a comment, unknown keys are rejected
//! so typos cannot silently fall back to defaults.

use crate::factory::FactoryPipeline;
use crate::quoin::NoiseModel;
use serde::Serialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`: {reason}")]
    InvalidValue {
        line: usize,
        key: String,
        reason: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Classical,
    Bounds,
    Verify,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "simulate" => Some(Mode::Simulate),
            "classical" => Some(Mode::Classical),
            "bounds" => Some(Mode::Bounds),
            "verify" => Some(Mode::Verify),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Classical => "classical",
            Mode::Bounds => "bounds",
            Mode::Verify => "verify",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// The default preparation angles: 0 to 165 degrees in 15-degree steps.
pub fn default_theta_grid() -> Vec<f64> {
    (0..12).map(|i| 15.0 * i as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    /// Preparation angles in degrees.
    pub theta_list: Vec<f64>,
    /// Quoins prepared per angle for the p and q estimates (split evenly).
    pub n_quoins: u64,
    /// Derived coins produced per angle / per bias point.
    pub n_outputs: u64,
    pub seed: u64,
    pub noise: NoiseModel,
    pub pipeline: FactoryPipeline,
    /// Truncation gap of the classical f_t construction.
    pub eps1: f64,
    /// Truncation half-gap of the bare doubling stage.
    pub eps1p: f64,
    /// Inner truncation gap used by the classical q_t construction.
    pub qt_eps1: f64,
    /// Monte Carlo shards; the report is independent of how many worker
    /// threads execute them.
    pub shards: u64,
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: None,
            theta_list: default_theta_grid(),
            n_quoins: 1_000_000,
            n_outputs: 100_000,
            seed: crate::DEFAULT_SEED,
            noise: NoiseModel::default(),
            pipeline: FactoryPipeline::default(),
            eps1: 0.035,
            eps1p: 0.0175,
            qt_eps1: 0.04,
            shards: 64,
            output_path: None,
            output_format: OutputFormat::Csv,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: stripped.to_string(),
            })?;
            cfg.assign(line, key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn assign(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        fn bad(line: usize, key: &str, reason: impl Into<String>) -> ConfigError {
            ConfigError::InvalidValue {
                line,
                key: key.to_string(),
                reason: reason.into(),
            }
        }
        fn num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.parse::<T>().map_err(|e| bad(line, key, e.to_string()))
        }
        fn flag(line: usize, key: &str, value: &str) -> Result<bool, ConfigError> {
            match value {
                "true" | "1" | "on" => Ok(true),
                "false" | "0" | "off" => Ok(false),
                _ => Err(bad(line, key, "expected true/false")),
            }
        }

        match key {
            "mode" => {
                self.mode =
                    Some(Mode::parse(value).ok_or_else(|| {
                        bad(line, key, "expected simulate|classical|bounds|verify")
                    })?)
            }
            "theta_list" => {
                let mut thetas = Vec::new();
                for part in value.split(',') {
                    thetas.push(num::<f64>(line, key, part.trim())?);
                }
                if thetas.is_empty() {
                    return Err(bad(line, key, "empty angle list"));
                }
                self.theta_list = thetas;
            }
            "n_quoins" => self.n_quoins = num(line, key, value)?,
            "n_outputs" => self.n_outputs = num(line, key, value)?,
            "seed" => self.seed = num(line, key, value)?,
            "steady_excited" => self.noise.steady_excited = num(line, key, value)?,
            "purify_residual" => self.noise.purify_residual = num(line, key, value)?,
            "gate_error" => self.noise.gate_error = num(line, key, value)?,
            "readout_f0" => self.noise.readout_f0 = num(line, key, value)?,
            "readout_f1" => self.noise.readout_f1 = num(line, key, value)?,
            "purification_enabled" => self.noise.purification_enabled = flag(line, key, value)?,
            "max_rounds" => self.pipeline.max_rounds = num(line, key, value)?,
            "max_draws" => self.pipeline.max_draws = num(line, key, value)?,
            "lazy_toss" => self.pipeline.lazy_toss = flag(line, key, value)?,
            "half_coin_free" => self.pipeline.half_coin_free = flag(line, key, value)?,
            "eps1" => self.eps1 = num(line, key, value)?,
            "eps1p" => self.eps1p = num(line, key, value)?,
            "qt_eps1" => self.qt_eps1 = num(line, key, value)?,
            "shards" => self.shards = num(line, key, value)?,
            "output_path" => self.output_path = Some(PathBuf::from(value)),
            "output_format" => {
                self.output_format = match value {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    _ => return Err(bad(line, key, "expected csv or json")),
                }
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.noise
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.pipeline
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for theta in &self.theta_list {
            if !(0.0..=180.0).contains(theta) || theta.is_nan() {
                return Err(ConfigError::Invalid(format!(
                    "theta {theta} outside [0, 180] degrees"
                )));
            }
        }
        for (name, eps, hi) in [
            ("eps1", self.eps1, 0.5),
            ("eps1p", self.eps1p, 0.25),
            ("qt_eps1", self.qt_eps1, 0.5),
        ] {
            if !(eps > 0.0 && eps < hi) {
                return Err(ConfigError::Invalid(format!(
                    "{name} = {eps} outside (0, {hi})"
                )));
            }
        }
        if self.shards == 0 {
            return Err(ConfigError::Invalid("shards must be at least 1".into()));
        }
        Ok(())
    }
}
