//! Optional TOML training settings. Every key is optional; unknown keys are
//! rejected so typos do not silently fall back to defaults.

use std::path::Path;

use debias_core::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub method: Option<String>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub q: Option<f64>,
    pub eval_every: Option<usize>,
    pub checkpoint_every: Option<usize>,
    pub hidden: Option<Vec<usize>>,
}

impl FileConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
    }
}
