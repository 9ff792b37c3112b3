//! Flat `key = value` run configuration.
//!
//! One pair per line, `#` starts a comment, unknown and duplicated keys are
//! hard errors so typos cannot silently fall back to defaults.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{ModelError, ModelParams, ModelSpec};
use crate::pdesolver::LayerMode;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { key: String, line: usize },
    #[error("key `{key}`: expected {expected}, got `{value}`")]
    TypeMismatch { key: String, expected: &'static str, value: String },
    #[error("missing required key `{0}`")]
    MissingRequired(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelSpec,
    // grid
    pub y_min: f64,
    pub y_max: f64,
    pub n_y: usize,
    pub n_t: usize,
    pub eps: f64,
    pub grading: f64,
    pub layer_mode: LayerMode,
    // simulation
    pub dt: f64,
    pub n_paths: usize,
    pub base_seed: u64,
    pub t0: f64,
    pub y0_list: Vec<f64>,
    pub x0: f64,
    // reporting
    pub out_dir: PathBuf,
    pub sandwich_slack: f64,
    pub norm_samples: usize,
}

struct Raw {
    entries: HashMap<String, (String, usize)>,
}

impl Raw {
    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(v, _)| v)
    }

    fn take_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.parse::<f64>().map(Some).map_err(|_| ConfigError::TypeMismatch {
                key: key.into(),
                expected: "a real number",
                value: v,
            }),
        }
    }

    fn take_usize(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.parse::<usize>().map(Some).map_err(|_| ConfigError::TypeMismatch {
                key: key.into(),
                expected: "a nonnegative integer",
                value: v,
            }),
        }
    }

    fn take_u64(&mut self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.parse::<u64>().map(Some).map_err(|_| ConfigError::TypeMismatch {
                key: key.into(),
                expected: "an unsigned integer",
                value: v,
            }),
        }
    }

    fn require_f64(&mut self, key: &'static str) -> Result<f64, ConfigError> {
        self.take_f64(key)?.ok_or(ConfigError::MissingRequired(key))
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let mut entries: HashMap<String, (String, usize)> = HashMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Malformed { line: line_no, text: raw_line.trim().into() });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if entries.contains_key(&key) {
            return Err(ConfigError::DuplicateKey { key, line: line_no });
        }
        entries.insert(key, (value, line_no));
    }
    let mut raw = Raw { entries };

    let model_name = raw.take("model").ok_or(ConfigError::MissingRequired("model"))?;
    let horizon = raw.take_f64("T")?.unwrap_or(1.0);
    let theta = raw.take_f64("theta")?;

    let model = if model_name == "custom" {
        let params = ModelParams {
            b0: raw.require_f64("b0")?,
            b1: raw.require_f64("b1")?,
            s0: raw.require_f64("s0")?,
            s1: raw.require_f64("s1")?,
            eta_c: raw.require_f64("eta_c")?,
            eta_p: raw.require_f64("eta_p")?,
            lambda_c: raw.require_f64("lambda_c")?,
            lambda_p: raw.require_f64("lambda_p")?,
            gamma_c: raw.require_f64("gamma_c")?,
            gamma_p: raw.require_f64("gamma_p")?,
            theta: theta.unwrap_or(0.0),
            horizon,
        };
        ModelSpec::from_params("custom", params)?
    } else {
        let mut m = ModelSpec::catalog(&model_name)?.with_horizon(horizon)?;
        if let Some(theta) = theta {
            m = m.with_theta(theta)?;
        }
        m
    };

    let eps = raw.take_f64("eps")?.unwrap_or(1e-3 * model.horizon);
    let dt = raw.take_f64("dt")?.unwrap_or(1e-3 * model.horizon);

    let y0_list = match raw.take("y0") {
        None => vec![1.0, 3.0, 5.0],
        Some(list) => {
            let parsed: Result<Vec<f64>, _> = list.split(',').map(|s| s.trim().parse::<f64>()).collect();
            parsed.map_err(|_| ConfigError::TypeMismatch {
                key: "y0".into(),
                expected: "a comma-separated list of reals",
                value: list,
            })?
        }
    };

    let layer_mode = match raw.take("layer_mode") {
        None => LayerMode::EtaOverEps,
        Some(v) => match v.as_str() {
            "eta_over_eps" => LayerMode::EtaOverEps,
            "envelope_geomean" | "envelope-geomean" => LayerMode::EnvelopeGeomean,
            _ => {
                return Err(ConfigError::TypeMismatch {
                    key: "layer_mode".into(),
                    expected: "eta_over_eps | envelope_geomean",
                    value: v,
                })
            }
        },
    };

    let cfg = RunConfig {
        y_min: raw.take_f64("y_min")?.unwrap_or(-10.0),
        y_max: raw.take_f64("y_max")?.unwrap_or(10.0),
        n_y: raw.take_usize("n_y")?.unwrap_or(401),
        n_t: raw.take_usize("n_t")?.unwrap_or(2000),
        eps,
        grading: raw.take_f64("grading")?.unwrap_or(1.0),
        layer_mode,
        dt,
        n_paths: raw.take_usize("n_paths")?.unwrap_or(10_000),
        base_seed: raw.take_u64("base_seed")?.unwrap_or(42),
        t0: raw.take_f64("t0")?.unwrap_or(0.0),
        y0_list,
        x0: raw.take_f64("x0")?.unwrap_or(1.0),
        out_dir: raw.take("out_dir").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out")),
        sandwich_slack: raw.take_f64("sandwich_slack")?.unwrap_or(crate::envelopes::DEFAULT_SANDWICH_SLACK),
        norm_samples: raw.take_usize("norm_samples")?.unwrap_or(100_000),
        model,
    };

    if let Some((key, (_, line))) = raw.entries.into_iter().min_by_key(|(_, (_, line))| *line) {
        return Err(ConfigError::UnknownKey { key, line });
    }
    Ok(cfg)
}
