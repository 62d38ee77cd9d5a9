//! A convolutional-recurrent classifier for bearing faults, trained directly
//! on raw multichannel vibration windows.
//!
//! The network is a 1D convolution (elu) followed by batch normalization,
//! dropout, max-pooling, an LSTM whose final hidden state feeds a dropout
//! and a sigmoid dense head. Every layer has a hand-written backward pass,
//! and training uses mean squared logarithmic error with Adagrad.
//!
//! ```
//! use bearing_crnn::{CrnnConfig, CrnnModel, Rng, Tensor};
//!
//! let mut cfg = CrnnConfig::new(64, 2, 4);
//! cfg.conv_filters = 8;
//! cfg.conv_kernel = 16;
//! cfg.pool_size = 4;
//! cfg.lstm_units = 6;
//! let model = CrnnModel::build(cfg, &mut Rng::new(1)).unwrap();
//! let x = Tensor::zeros(&[3, 64, 2]).unwrap();
//! assert_eq!(model.infer(&x).unwrap().shape(), &[3, 4]);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod error;
pub mod io;
pub mod layers;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod training;

pub use data::{SignalMatrix, SplitSpec, SynthSpec, WindowSet};
pub use error::{Error, Result};
pub use layers::Mode;
pub use model::{CrnnConfig, CrnnModel};
pub use rng::Rng;
pub use tensor::Tensor;
pub use training::{EpochMetrics, TrainConfig};
