//! The conv -> batch-norm -> dropout -> max-pool -> LSTM -> dropout -> dense
//! classifier.

use crate::error::{Error, Result};
use crate::layers::{
    BatchNorm, BatchNormCache, Conv1d, Conv1dCache, Dense, DenseCache, Dropout, DropoutCache, Gate,
    Lstm, LstmCache, MaxPool1d, MaxPoolCache, Mode,
};
use crate::model::CrnnConfig;
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::training::adagrad::{adagrad_step, AdagradState};

/// Names of the trainable tensors, in the order used by [`CrnnModel::params`]
/// and [`ModelGrads::params`].
pub const PARAM_NAMES: [&str; 14] = [
    "conv.weight",
    "conv.bias",
    "bn.gamma",
    "bn.beta",
    "lstm.w_i",
    "lstm.w_f",
    "lstm.w_o",
    "lstm.w_c",
    "lstm.b_i",
    "lstm.b_f",
    "lstm.b_o",
    "lstm.b_c",
    "dense.weight",
    "dense.bias",
];

/// Non-trainable tensors that are still persisted.
pub const BUFFER_NAMES: [&str; 2] = ["bn.running_mean", "bn.running_var"];

/// Bias given to the LSTM forget gate at initialization.
pub const FORGET_GATE_BIAS: f64 = 1.0;

#[derive(Debug, Clone)]
struct ForwardCache {
    conv: Conv1dCache,
    bn: BatchNormCache,
    drop1: DropoutCache,
    pool: MaxPoolCache,
    lstm: LstmCache,
    drop2: DropoutCache,
    dense: DenseCache,
}

#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub d_input: Tensor,
    /// One gradient per trainable tensor, ordered like [`PARAM_NAMES`].
    pub params: Vec<Tensor>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamRow {
    pub layer: &'static str,
    pub trainable: usize,
    pub non_trainable: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamTable {
    pub rows: Vec<ParamRow>,
}

impl ParamTable {
    pub fn trainable(&self) -> usize {
        self.rows.iter().map(|r| r.trainable).sum()
    }

    pub fn non_trainable(&self) -> usize {
        self.rows.iter().map(|r| r.non_trainable).sum()
    }
}

#[derive(Debug, Clone)]
pub struct CrnnModel {
    config: CrnnConfig,
    class_names: Vec<String>,
    pub conv: Conv1d,
    pub batchnorm: BatchNorm,
    dropout1: Dropout,
    pool: MaxPool1d,
    pub lstm: Lstm,
    dropout2: Dropout,
    pub dense: Dense,
    optimizer: Vec<AdagradState>,
    /// Completed training epochs, persisted so runs can resume.
    pub epochs_trained: usize,
    cache: Option<ForwardCache>,
}

fn glorot(rng: &mut Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Result<Tensor> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::uniform(rng, shape, -limit, limit)
}

impl CrnnModel {
    /// All-zero parameters with default batch-norm state; the starting point
    /// for [`CrnnModel::build`] and for loading checkpoints.
    pub fn zeroed(config: CrnnConfig) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let conv = Conv1d::zeros(
            c.conv_filters,
            c.in_channels,
            c.conv_kernel,
            c.conv_activation,
        )?;
        let batchnorm = BatchNorm::new(c.conv_filters, c.batchnorm_momentum, c.batchnorm_epsilon)?;
        let lstm = Lstm::zeros(c.conv_filters, c.lstm_units, c.lstm_stateful)?;
        let dense = Dense::zeros(c.lstm_units, c.num_classes, c.head_activation)?;
        let class_names = (0..c.num_classes).map(|i| format!("class{i}")).collect();
        let mut model = CrnnModel {
            dropout1: Dropout::new(c.dropout1)?,
            pool: MaxPool1d::new(c.pool_size)?,
            dropout2: Dropout::new(c.dropout2)?,
            config,
            class_names,
            conv,
            batchnorm,
            lstm,
            dense,
            optimizer: Vec::new(),
            epochs_trained: 0,
            cache: None,
        };
        model.optimizer = model
            .params()
            .into_iter()
            .map(AdagradState::for_param)
            .collect();
        Ok(model)
    }

    /// Glorot-uniform weights drawn in a fixed order (conv, LSTM gates i, f,
    /// o, c, dense), zero biases except the forget gate.
    pub fn build(config: CrnnConfig, rng: &mut Rng) -> Result<Self> {
        let mut m = Self::zeroed(config)?;
        let c = m.config.clone();
        m.conv.weight = glorot(
            rng,
            &[c.conv_filters, c.in_channels, c.conv_kernel],
            c.in_channels * c.conv_kernel,
            c.conv_filters * c.conv_kernel,
        )?;
        let width = c.lstm_units + c.conv_filters;
        for w in m.lstm.weights.iter_mut() {
            *w = glorot(rng, &[c.lstm_units, width], width, c.lstm_units)?;
        }
        m.lstm.biases[Gate::Forget as usize] = Tensor::filled(&[c.lstm_units], FORGET_GATE_BIAS)?;
        m.dense.weight = glorot(
            rng,
            &[c.num_classes, c.lstm_units],
            c.lstm_units,
            c.num_classes,
        )?;
        Ok(m)
    }

    pub fn config(&self) -> &CrnnConfig {
        &self.config
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn set_class_names(&mut self, names: Vec<String>) -> Result<()> {
        if names.len() != self.config.num_classes {
            return Err(Error::Config(format!(
                "{} class names for a {}-class model",
                names.len(),
                self.config.num_classes
            )));
        }
        self.class_names = names;
        Ok(())
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let [wi, wf, wo, wc] = &self.lstm.weights;
        let [bi, bf, bo, bc] = &self.lstm.biases;
        vec![
            &self.conv.weight,
            &self.conv.bias,
            &self.batchnorm.gamma,
            &self.batchnorm.beta,
            wi,
            wf,
            wo,
            wc,
            bi,
            bf,
            bo,
            bc,
            &self.dense.weight,
            &self.dense.bias,
        ]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let [wi, wf, wo, wc] = &mut self.lstm.weights;
        let [bi, bf, bo, bc] = &mut self.lstm.biases;
        vec![
            &mut self.conv.weight,
            &mut self.conv.bias,
            &mut self.batchnorm.gamma,
            &mut self.batchnorm.beta,
            wi,
            wf,
            wo,
            wc,
            bi,
            bf,
            bo,
            bc,
            &mut self.dense.weight,
            &mut self.dense.bias,
        ]
    }

    pub fn buffers(&self) -> Vec<&Tensor> {
        vec![&self.batchnorm.running_mean, &self.batchnorm.running_var]
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.batchnorm.running_mean,
            &mut self.batchnorm.running_var,
        ]
    }

    pub fn optimizer_state(&self) -> &[AdagradState] {
        &self.optimizer
    }

    pub fn optimizer_state_mut(&mut self) -> &mut [AdagradState] {
        &mut self.optimizer
    }

    pub fn reset_state(&mut self) {
        self.lstm.reset_state();
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        let c = &self.config;
        match x.shape() {
            &[b, t, ch] if t == c.window_len && ch == c.in_channels => Ok(b),
            other => Err(Error::Shape(format!(
                "model expects [batch, {}, {}], got {other:?}",
                c.window_len, c.in_channels
            ))),
        }
    }

    /// Runs the full stack, keeping caches for [`CrnnModel::backward`].
    /// Returns per-class scores `[batch, num_classes]`.
    pub fn forward(&mut self, x: &Tensor, mode: Mode, rng: &mut Rng) -> Result<Tensor> {
        self.check_input(x)?;
        let (h, conv) = self.conv.forward(x)?;
        let (h, bn) = self.batchnorm.forward(&h, mode)?;
        let (h, drop1) = self.dropout1.forward(&h, rng, mode)?;
        let (h, pool) = self.pool.forward(&h)?;
        let (h, lstm) = self.lstm.forward(&h)?;
        let (h, drop2) = self.dropout2.forward(&h, rng, mode)?;
        let (scores, dense) = self.dense.forward(&h)?;
        self.cache = Some(ForwardCache {
            conv,
            bn,
            drop1,
            pool,
            lstm,
            drop2,
            dense,
        });
        Ok(scores)
    }

    /// Inference-mode scores without touching any model state. The LSTM
    /// always starts from a zero state here.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let batch = self.check_input(x)?;
        let (h, _) = self.conv.forward(x)?;
        let h = self.batchnorm.forward_inference(&h)?;
        let (h, _) = self.pool.forward(&h)?;
        let zeros = Tensor::zeros(&[batch, self.config.lstm_units])?;
        let (h, _, _) = self.lstm.forward_from(&h, &zeros, &zeros)?;
        Ok(self.dense.forward(&h)?.0)
    }

    /// Arg-max class per sample of [`CrnnModel::infer`]; ties go to the lower
    /// class index.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        self.infer(x)?.argmax_rows()
    }

    /// Gradients of a scalar loss given its gradient w.r.t. the scores of the
    /// most recent [`CrnnModel::forward`].
    pub fn backward(&self, d_scores: &Tensor) -> Result<ModelGrads> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        let dense = self.dense.backward(&cache.dense, d_scores)?;
        let d = self.dropout2.backward(&cache.drop2, &dense.d_input)?;
        let lstm = self.lstm.backward(&cache.lstm, &d)?;
        let d = self.pool.backward(&cache.pool, &lstm.d_input)?;
        let d = self.dropout1.backward(&cache.drop1, &d)?;
        let bn = self.batchnorm.backward(&cache.bn, &d)?;
        let conv = self.conv.backward(&cache.conv, &bn.d_input)?;

        let [wi, wf, wo, wc] = lstm.d_weights;
        let [bi, bf, bo, bc] = lstm.d_biases;
        Ok(ModelGrads {
            d_input: conv.d_input,
            params: vec![
                conv.d_weight,
                conv.d_bias,
                bn.d_gamma,
                bn.d_beta,
                wi,
                wf,
                wo,
                wc,
                bi,
                bf,
                bo,
                bc,
                dense.d_weight,
                dense.d_bias,
            ],
        })
    }

    /// One Adagrad update of every trainable tensor.
    pub fn apply_gradients(&mut self, grads: &ModelGrads, lr: f64, eps: f64) -> Result<()> {
        let mut optimizer = std::mem::take(&mut self.optimizer);
        let result = self
            .params_mut()
            .into_iter()
            .zip(&grads.params)
            .zip(optimizer.iter_mut())
            .try_for_each(|((p, g), s)| adagrad_step(p, g, s, lr, eps));
        self.optimizer = optimizer;
        result
    }

    pub fn param_count(&self) -> ParamTable {
        let c = &self.config;
        let lstm: usize = self
            .lstm
            .weights
            .iter()
            .chain(&self.lstm.biases)
            .map(Tensor::len)
            .sum();
        ParamTable {
            rows: vec![
                ParamRow {
                    layer: "conv1d",
                    trainable: self.conv.weight.len() + self.conv.bias.len(),
                    non_trainable: 0,
                },
                ParamRow {
                    layer: "batchnorm",
                    trainable: 2 * c.conv_filters,
                    non_trainable: 2 * c.conv_filters,
                },
                ParamRow {
                    layer: "dropout1",
                    trainable: 0,
                    non_trainable: 0,
                },
                ParamRow {
                    layer: "maxpool",
                    trainable: 0,
                    non_trainable: 0,
                },
                ParamRow {
                    layer: "lstm",
                    trainable: lstm,
                    non_trainable: 0,
                },
                ParamRow {
                    layer: "dropout2",
                    trainable: 0,
                    non_trainable: 0,
                },
                ParamRow {
                    layer: "dense",
                    trainable: self.dense.weight.len() + self.dense.bias.len(),
                    non_trainable: 0,
                },
            ],
        }
    }
}
