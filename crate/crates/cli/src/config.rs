//! TOML configuration. Every key is optional; command-line flags win.
//!
//! ```toml
//! codebook = "models/k4096.vscb"   # default codebook path
//! embedding_rate = "75"            # frame rate for CSV embeddings, "num" or "num/den"
//! jobs = 4
//!
//! [cluster]
//! m = 5
//! tau = 0.7
//! beta = 0.2
//! s_max = 4
//!
//! [frontend]
//! sample_rate = 24000
//! fft_size = 1024
//! hop_size = 320
//! mel_bands = 80
//! log_floor = 1e-5
//! window = "hann"                  # hann | hamming | rectangular
//!
//! [train]
//! codebook_size = 4096
//! decay = 0.99
//! epochs = 20
//! seed = 0
//! awaken_fraction = 0.01
//!
//! [lm]
//! order = 3
//! alpha = 0.1
//! ```

use anyhow::{Context, Result};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use vfrtok::frontend::FrontendConfig;
use vfrtok::tadpc::ClusterParams;
use vfrtok::vq::TrainConfig;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    pub order: usize,
    pub alpha: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            order: 3,
            alpha: 0.1,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub codebook: Option<PathBuf>,
    pub embedding_rate: Option<String>,
    pub jobs: Option<usize>,
    pub cluster: ClusterParams,
    pub frontend: FrontendConfig,
    pub train: TrainConfig,
    pub lm: LmConfig,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Config = toml::from_str(&text)
            .map_err(|e| ConfigError(format!("invalid config {}: {e}", path.display())))
            .context("loading configuration")?;
        Ok(cfg)
    }
}
