//! Deterministic mini-batch training loop.
//!
//! Randomness comes from independent streams of the run seed: stream 0
//! initializes the model and stream `e` drives shuffling and dropout in
//! epoch `e` (1-based), so a run resumed from a checkpoint at epoch `e`
//! replays the same batches as an uninterrupted one.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{one_hot, WindowSet};
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::model::CrnnModel;
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::training::adagrad;
use crate::training::loss::{msle_grad, msle_loss};
use crate::training::metrics::{confusion, ConfusionMatrix, EpochMetrics};

/// Stream of the run seed used for weight initialization.
pub const INIT_STREAM: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adagrad_epsilon: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 64,
            learning_rate: adagrad::DEFAULT_LEARNING_RATE,
            adagrad_epsilon: adagrad::DEFAULT_EPSILON,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.adagrad_epsilon > 0.0) {
            return Err(Error::Config("adagrad_epsilon must be > 0".into()));
        }
        Ok(())
    }
}

/// Errors unless `batch` divides `n`, suggesting the nearest batch sizes that do.
pub fn check_divisible(n: usize, batch: usize, what: &str) -> Result<()> {
    if batch == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    if n >= batch && n.is_multiple_of(batch) {
        return Ok(());
    }
    let below = (1..batch.min(n + 1))
        .rev()
        .find(|b| n.is_multiple_of(*b))
        .unwrap_or(1);
    let above = (batch + 1..=n).find(|b| n.is_multiple_of(*b));
    let hint = match above {
        Some(a) => format!("nearest feasible batch sizes are {below} and {a}"),
        None => format!("nearest feasible batch size is {below}"),
    };
    Err(Error::Divisibility(format!(
        "{what} has {n} samples, not a positive multiple of batch size {batch}; {hint}"
    )))
}

/// Model with weights drawn from the initialization stream of `seed`.
pub fn init_model(config: crate::model::CrnnConfig, seed: u64) -> Result<CrnnModel> {
    CrnnModel::build(config, &mut Rng::stream(seed, INIT_STREAM))
}

/// One forward / backward / Adagrad update on a single batch. Returns the
/// batch loss before the update.
pub fn train_step(
    model: &mut CrnnModel,
    x: &Tensor,
    targets: &Tensor,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<f64> {
    let scores = model.forward(x, Mode::Train, rng)?;
    let loss = msle_loss(targets, &scores)?;
    let grads = model.backward(&msle_grad(targets, &scores)?)?;
    model.apply_gradients(&grads, cfg.learning_rate, cfg.adagrad_epsilon)?;
    Ok(loss)
}

fn check_compatible(model: &CrnnModel, data: &WindowSet) -> Result<()> {
    let c = model.config();
    if data.window_len() != c.window_len
        || data.channels() != c.in_channels
        || data.num_classes() != c.num_classes
    {
        return Err(Error::Config(format!(
            "data is {} classes of {}x{} windows but the model expects {} classes of {}x{}",
            data.num_classes(),
            data.window_len(),
            data.channels(),
            c.num_classes,
            c.window_len,
            c.in_channels
        )));
    }
    Ok(())
}

/// One pass over `train` in batches of `cfg.batch_size`. The order is
/// shuffled with `rng` when `cfg.shuffle` is set and the LSTM is stateless.
/// Returns the mean batch loss.
pub fn train_epoch(
    model: &mut CrnnModel,
    train: &WindowSet,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<f64> {
    check_compatible(model, train)?;
    check_divisible(train.len(), cfg.batch_size, "training set")?;
    model.reset_state();
    let mut order: Vec<usize> = (0..train.len()).collect();
    if cfg.shuffle && !model.config().lstm_stateful {
        rng.shuffle(&mut order);
    }
    let num_classes = train.num_classes();
    let mut total = 0.0;
    let mut batches = 0;
    for idx in order.chunks(cfg.batch_size) {
        let x = train.samples().gather(idx)?;
        let labels: Vec<usize> = idx.iter().map(|&i| train.labels()[i]).collect();
        let y = one_hot(&labels, num_classes)?;
        total += train_step(model, &x, &y, cfg, rng)?;
        batches += 1;
    }
    Ok(total / batches as f64)
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Mean of the per-batch MSLE.
    pub loss: f64,
    pub accuracy: f64,
    pub predictions: Vec<usize>,
    pub scores: Tensor,
    pub confusion: ConfusionMatrix,
}

/// Scores `data` in order, in batches of `batch_size` (the last one may be
/// short unless the LSTM is stateful), without updating any parameter.
/// `mode` is normally [`Mode::Inference`]; [`Mode::Frozen`] measures the
/// network as it behaves during training, minus dropout.
pub fn evaluate(
    model: &mut CrnnModel,
    data: &WindowSet,
    batch_size: usize,
    mode: Mode,
) -> Result<Evaluation> {
    if mode == Mode::Train {
        return Err(Error::InvalidArgument(
            "evaluation cannot run in train mode".into(),
        ));
    }
    check_compatible(model, data)?;
    if model.config().lstm_stateful {
        check_divisible(data.len(), batch_size, "evaluation set")?;
    } else if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let order: Vec<usize> = (0..data.len()).collect();
    // dropout is off outside train mode, so this stream is never drawn from
    let mut unused = Rng::new(0);
    model.reset_state();
    let mut total = 0.0;
    let mut batches = 0;
    let mut all = Vec::with_capacity(data.len() * data.num_classes());
    for idx in order.chunks(batch_size) {
        let x = data.samples().gather(idx)?;
        let labels: Vec<usize> = idx.iter().map(|&i| data.labels()[i]).collect();
        let y = one_hot(&labels, data.num_classes())?;
        let scores = model.forward(&x, mode, &mut unused)?;
        total += msle_loss(&y, &scores)?;
        batches += 1;
        all.extend_from_slice(scores.data());
    }
    model.reset_state();
    let scores = Tensor::from_vec(&[data.len(), data.num_classes()], all)?;
    let predictions = scores.argmax_rows()?;
    let confusion = confusion(&predictions, data.labels(), data.num_classes())?;
    Ok(Evaluation {
        loss: total / batches as f64,
        accuracy: confusion.accuracy(),
        predictions,
        scores,
        confusion,
    })
}

/// Trains epochs `start_epoch + 1 ..= cfg.epochs`, calling `on_epoch` after
/// each. Train metrics come from a frozen pass over the training set after
/// the epoch's updates; test metrics from an inference pass over `test`.
/// `wall_seconds` is only measured when `timed` is set and is 0 otherwise,
/// which keeps metric logs reproducible byte for byte.
pub fn fit(
    model: &mut CrnnModel,
    train: &WindowSet,
    test: &WindowSet,
    cfg: &TrainConfig,
    start_epoch: usize,
    timed: bool,
    mut on_epoch: impl FnMut(&EpochMetrics, &CrnnModel) -> Result<()>,
) -> Result<Vec<EpochMetrics>> {
    cfg.validate()?;
    check_compatible(model, train)?;
    check_compatible(model, test)?;
    check_divisible(train.len(), cfg.batch_size, "training set")?;
    check_divisible(test.len(), cfg.batch_size, "test set")?;
    let mut history = Vec::new();
    for epoch in start_epoch + 1..=cfg.epochs {
        let started = Instant::now();
        let mut rng = Rng::stream(cfg.seed, epoch as u64);
        train_epoch(model, train, cfg, &mut rng)?;
        let tr = evaluate(model, train, cfg.batch_size, Mode::Frozen)?;
        let te = evaluate(model, test, cfg.batch_size, Mode::Inference)?;
        let metrics = EpochMetrics {
            epoch,
            train_loss: tr.loss,
            train_accuracy: tr.accuracy,
            test_loss: te.loss,
            test_accuracy: te.accuracy,
            wall_seconds: if timed {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        };
        model.epochs_trained = epoch;
        on_epoch(&metrics, model)?;
        history.push(metrics);
    }
    Ok(history)
}
