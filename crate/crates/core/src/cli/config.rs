//! The JSON run configuration read by `train` and `eval`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::Activation;
use crate::model::CrnnConfig;
use crate::training::TrainConfig;

/// Architecture options. Input shape and class count come from the archive;
/// if given here they must agree with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOptions {
    pub window_len: Option<usize>,
    pub in_channels: Option<usize>,
    pub num_classes: Option<usize>,
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub conv_activation: Activation,
    pub dropout1: f64,
    pub pool_size: usize,
    pub lstm_units: usize,
    pub lstm_stateful: bool,
    pub dropout2: f64,
    pub head_activation: Activation,
    pub batchnorm_momentum: f64,
    pub batchnorm_epsilon: f64,
}

impl Default for ModelOptions {
    fn default() -> Self {
        let d = CrnnConfig::new(1, 1, 1);
        ModelOptions {
            window_len: None,
            in_channels: None,
            num_classes: None,
            conv_filters: d.conv_filters,
            conv_kernel: d.conv_kernel,
            conv_activation: d.conv_activation,
            dropout1: d.dropout1,
            pool_size: d.pool_size,
            lstm_units: d.lstm_units,
            lstm_stateful: d.lstm_stateful,
            dropout2: d.dropout2,
            head_activation: d.head_activation,
            batchnorm_momentum: d.batchnorm_momentum,
            batchnorm_epsilon: d.batchnorm_epsilon,
        }
    }
}

impl ModelOptions {
    pub fn resolve(
        &self,
        window_len: usize,
        in_channels: usize,
        num_classes: usize,
    ) -> Result<CrnnConfig> {
        for (name, given, actual) in [
            ("window_len", self.window_len, window_len),
            ("in_channels", self.in_channels, in_channels),
            ("num_classes", self.num_classes, num_classes),
        ] {
            if let Some(v) = given.filter(|&v| v != actual) {
                return Err(Error::Config(format!(
                    "model.{name} is {v} but the archive has {actual}"
                )));
            }
        }
        let cfg = CrnnConfig {
            in_channels,
            window_len,
            conv_filters: self.conv_filters,
            conv_kernel: self.conv_kernel,
            conv_activation: self.conv_activation,
            dropout1: self.dropout1,
            pool_size: self.pool_size,
            lstm_units: self.lstm_units,
            lstm_stateful: self.lstm_stateful,
            dropout2: self.dropout2,
            num_classes,
            head_activation: self.head_activation,
            batchnorm_momentum: self.batchnorm_momentum,
            batchnorm_epsilon: self.batchnorm_epsilon,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitOptions {
    pub train_fraction: f64,
    /// Fraction held out for validation; 0 disables the three-way split.
    pub validation_fraction: f64,
    pub stratified: bool,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            train_fraction: 0.25,
            validation_fraction: 0.0,
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub archive: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model: ModelOptions,
    pub train: TrainConfig,
    pub split: SplitOptions,
    /// Record wall-clock seconds in the metrics CSV. Off by default so that
    /// repeated runs produce identical files.
    pub timing: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn archive(&self) -> Result<&Path> {
        self.archive.as_deref().ok_or_else(|| {
            Error::Config("no archive given (--archive or \"archive\" in the config)".into())
        })
    }

    pub fn out(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| {
            Error::Config("no output directory given (--out or \"out\" in the config)".into())
        })
    }
}
