//! Network layers with explicit forward caches and analytic backward passes.

pub mod activation;
pub mod batchnorm;
pub mod conv1d;
pub mod dense;
pub mod dropout;
pub mod lstm;
pub mod maxpool;

pub use activation::{elu, elu_grad, sigmoid, tanh, Activation, ELU_ALPHA};
pub use batchnorm::{BatchNorm, BatchNormCache, BatchNormGrads};
pub use conv1d::{Conv1d, Conv1dCache, Conv1dGrads};
pub use dense::{Dense, DenseCache, DenseGrads};
pub use dropout::{Dropout, DropoutCache};
pub use lstm::{CellCache, Gate, Lstm, LstmCache, LstmGrads};
pub use maxpool::{MaxPool1d, MaxPoolCache};

/// How stochastic and batch-dependent layers behave during a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active; batch-norm uses batch statistics and updates its
    /// running averages.
    Train,
    /// Dropout off; batch-norm uses batch statistics but leaves its running
    /// averages untouched. Deterministic, used for gradient checks and for
    /// measuring training-set metrics.
    Frozen,
    /// Dropout off; batch-norm uses running statistics.
    Inference,
}
