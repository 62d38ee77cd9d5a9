//! Loss, optimizer, metrics, the training loop and gradient checking.

pub mod adagrad;
pub mod gradcheck;
pub mod loss;
pub mod metrics;
pub mod trainer;

pub use adagrad::{adagrad_step, AdagradState};
pub use gradcheck::{gradient_check, GradEntry, GradReport};
pub use loss::{msle_grad, msle_loss};
pub use metrics::{
    accuracy, confusion, ConfusionMatrix, ConfusionReport, EpochMetrics, METRICS_CSV_HEADER,
};
pub use trainer::{evaluate, fit, init_model, train_epoch, train_step, Evaluation, TrainConfig};
