use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{batchnorm, Activation};

/// Architecture hyperparameters of the conv -> LSTM classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrnnConfig {
    pub in_channels: usize,
    pub window_len: usize,
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub conv_activation: Activation,
    pub dropout1: f64,
    pub pool_size: usize,
    pub lstm_units: usize,
    pub lstm_stateful: bool,
    pub dropout2: f64,
    pub num_classes: usize,
    pub head_activation: Activation,
    #[serde(default = "default_bn_momentum")]
    pub batchnorm_momentum: f64,
    #[serde(default = "default_bn_epsilon")]
    pub batchnorm_epsilon: f64,
}

fn default_bn_momentum() -> f64 {
    batchnorm::DEFAULT_MOMENTUM
}

fn default_bn_epsilon() -> f64 {
    batchnorm::DEFAULT_EPSILON
}

/// Intermediate shape after one stage, excluding the batch axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub name: &'static str,
    pub shape: Vec<usize>,
}

impl CrnnConfig {
    /// 84 filters of width 84 (elu), dropout 0.01, pool 8, 24 LSTM units,
    /// dropout 0.01, sigmoid head.
    pub fn new(window_len: usize, in_channels: usize, num_classes: usize) -> Self {
        CrnnConfig {
            in_channels,
            window_len,
            conv_filters: 84,
            conv_kernel: 84,
            conv_activation: Activation::Elu,
            dropout1: 0.01,
            pool_size: 8,
            lstm_units: 24,
            lstm_stateful: false,
            dropout2: 0.01,
            num_classes,
            head_activation: Activation::Sigmoid,
            batchnorm_momentum: batchnorm::DEFAULT_MOMENTUM,
            batchnorm_epsilon: batchnorm::DEFAULT_EPSILON,
        }
    }

    /// 150-row windows of 8 accelerometer channels, 4 health states.
    pub fn ims() -> Self {
        Self::new(150, 8, 4)
    }

    /// 205-row single-channel windows, 6 health states.
    pub fn cwru() -> Self {
        Self::new(205, 1, 6)
    }

    pub fn conv_output_len(&self) -> Result<usize> {
        if self.window_len < self.conv_kernel {
            return Err(Error::Config(format!(
                "conv1d stage: window length {} is shorter than kernel {} (output length would be {})",
                self.window_len,
                self.conv_kernel,
                self.window_len as i64 - self.conv_kernel as i64 + 1
            )));
        }
        Ok(self.window_len - self.conv_kernel + 1)
    }

    pub fn pooled_len(&self) -> Result<usize> {
        let conv = self.conv_output_len()?;
        if conv < self.pool_size {
            return Err(Error::Config(format!(
                "max-pool stage: conv output length {conv} is shorter than pool size {}",
                self.pool_size
            )));
        }
        Ok(conv / self.pool_size)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("in_channels", self.in_channels),
            ("window_len", self.window_len),
            ("conv_filters", self.conv_filters),
            ("conv_kernel", self.conv_kernel),
            ("pool_size", self.pool_size),
            ("lstm_units", self.lstm_units),
            ("num_classes", self.num_classes),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        for (name, p) in [("dropout1", self.dropout1), ("dropout2", self.dropout2)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {p}")));
            }
        }
        if !(self.batchnorm_epsilon > 0.0) || !(0.0..=1.0).contains(&self.batchnorm_momentum) {
            return Err(Error::Config(
                "batch-norm needs epsilon > 0 and momentum in [0, 1]".into(),
            ));
        }
        self.pooled_len().map(|_| ())
    }

    /// Per-sample shapes after each stage.
    pub fn shape_chain(&self) -> Result<Vec<Stage>> {
        let conv = self.conv_output_len()?;
        let pooled = self.pooled_len()?;
        let f = self.conv_filters;
        Ok(vec![
            Stage {
                name: "input",
                shape: vec![self.window_len, self.in_channels],
            },
            Stage {
                name: "conv1d",
                shape: vec![conv, f],
            },
            Stage {
                name: "batchnorm",
                shape: vec![conv, f],
            },
            Stage {
                name: "dropout1",
                shape: vec![conv, f],
            },
            Stage {
                name: "maxpool",
                shape: vec![pooled, f],
            },
            Stage {
                name: "lstm",
                shape: vec![self.lstm_units],
            },
            Stage {
                name: "dropout2",
                shape: vec![self.lstm_units],
            },
            Stage {
                name: "dense",
                shape: vec![self.num_classes],
            },
        ])
    }
}
