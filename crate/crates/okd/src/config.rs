//! Optional TOML configuration whose keys are the long flag names.
//!
//! ```toml
//! nbar-e = [10, 75]
//! distortion-db = -30
//! decoding = "both"
//! tail-epsilon = 1e-12
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
}

/// A scalar or a list; list-valued flags accept both forms.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            Self::One(x) => vec![x.clone()],
            Self::Many(v) => v.clone(),
        }
    }

    /// The value when exactly one is given.
    pub fn single(&self) -> Option<T> {
        match self {
            Self::One(x) => Some(x.clone()),
            Self::Many(v) if v.len() == 1 => Some(v[0].clone()),
            Self::Many(_) => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Config {
    pub nbar_e: Option<OneOrMany<f64>>,
    pub delta_e: Option<f64>,
    pub distortion: Option<f64>,
    pub distortion_db: Option<f64>,
    pub tau_ratio: Option<OneOrMany<f64>>,
    pub n_b: Option<OneOrMany<f64>>,
    pub decoding: Option<String>,
    pub k0: Option<u64>,
    pub k1: Option<u64>,
    pub slots: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tail_epsilon: Option<f64>,
    pub db_min: Option<f64>,
    pub db_max: Option<f64>,
    pub steps: Option<usize>,
    pub estimator: Option<String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}
