//! Central finite-difference checks of the analytic backward passes.
//!
//! Layers are checked through the scalar `L = sum(R * out)` with a fixed
//! random `R`, so every output element contributes a distinct weight. The
//! full model is checked through the MSLE loss in [`Mode::Frozen`].

use std::fmt;

use crate::error::Result;
use crate::layers::{Activation, BatchNorm, Conv1d, Dense, Dropout, Lstm, MaxPool1d, Mode};
use crate::model::{CrnnConfig, CrnnModel, PARAM_NAMES};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::training::loss::{msle_grad, msle_loss};

pub const DEFAULT_STEP: f64 = 1e-5;
/// Tolerance for layers with saturating or piecewise pieces.
pub const LAYER_TOLERANCE: f64 = 1e-4;
/// Tolerance for the dense layer and the loss.
pub const STRICT_TOLERANCE: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, 1e-6)`; the floor keeps vanishing gradients from
/// inflating the ratio.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Central differences of `f` with respect to every element of `x`.
pub fn numeric_gradient(
    x: &Tensor,
    step: f64,
    mut f: impl FnMut(&Tensor) -> Result<f64>,
) -> Result<Tensor> {
    let mut probe = x.clone();
    let mut grad = x.map(|_| 0.0);
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let plus = f(&probe)?;
        probe.data_mut()[i] = orig - step;
        let minus = f(&probe)?;
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (plus - minus) / (2.0 * step);
    }
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradEntry {
    pub name: String,
    pub count: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub tolerance: f64,
}

impl GradEntry {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

/// Compares an analytic gradient against a numeric one.
pub fn compare(
    name: &str,
    analytic: &Tensor,
    numeric: &Tensor,
    tolerance: f64,
) -> Result<GradEntry> {
    analytic.expect_same_shape(numeric)?;
    let mut rel: f64 = 0.0;
    let mut abs: f64 = 0.0;
    for (&a, &n) in analytic.data().iter().zip(numeric.data()) {
        rel = rel.max(relative_error(a, n));
        abs = abs.max((a - n).abs());
    }
    Ok(GradEntry {
        name: name.to_string(),
        count: analytic.len(),
        max_rel_error: rel,
        max_abs_error: abs,
        tolerance,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradReport {
    pub entries: Vec<GradEntry>,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(GradEntry::passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.max_rel_error)
            .fold(0.0, f64::max)
    }

    /// Replaces every entry's tolerance.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        for e in &mut self.entries {
            e.tolerance = tolerance;
        }
        self
    }

    pub fn failures(&self) -> impl Iterator<Item = &GradEntry> {
        self.entries.iter().filter(|e| !e.passed())
    }

    fn extend(&mut self, other: GradReport) {
        self.entries.extend(other.entries);
    }
}

impl fmt::Display for GradReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<24} {:>6} {:>12} {:>12} {:>10}  result",
            "tensor", "n", "max_rel", "max_abs", "tol"
        )?;
        for e in &self.entries {
            writeln!(
                f,
                "{:<24} {:>6} {:>12.3e} {:>12.3e} {:>10.1e}  {}",
                e.name,
                e.count,
                e.max_rel_error,
                e.max_abs_error,
                e.tolerance,
                if e.passed() { "ok" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

fn weighted_sum(out: &Tensor, r: &Tensor) -> Result<f64> {
    Ok(out.hadamard(r)?.sum())
}

fn random(rng: &mut Rng, shape: &[usize]) -> Result<Tensor> {
    Tensor::uniform(rng, shape, -1.0, 1.0)
}

pub fn check_conv1d(rng: &mut Rng) -> Result<GradReport> {
    let conv = Conv1d::new(
        random(rng, &[3, 2, 4])?,
        random(rng, &[3])?,
        Activation::Elu,
    )?;
    let x = random(rng, &[2, 9, 2])?;
    let (out, cache) = conv.forward(&x)?;
    let r = random(rng, out.shape())?;
    let g = conv.backward(&cache, &r)?;
    let loss = |c: &Conv1d, x: &Tensor| weighted_sum(&c.forward(x)?.0, &r);
    let nw = numeric_gradient(&conv.weight, DEFAULT_STEP, |w| {
        let mut c = conv.clone();
        c.weight = w.clone();
        loss(&c, &x)
    })?;
    let nb = numeric_gradient(&conv.bias, DEFAULT_STEP, |b| {
        let mut c = conv.clone();
        c.bias = b.clone();
        loss(&c, &x)
    })?;
    let nx = numeric_gradient(&x, DEFAULT_STEP, |x| loss(&conv, x))?;
    Ok(GradReport {
        entries: vec![
            compare("conv1d.weight", &g.d_weight, &nw, LAYER_TOLERANCE)?,
            compare("conv1d.bias", &g.d_bias, &nb, LAYER_TOLERANCE)?,
            compare("conv1d.input", &g.d_input, &nx, LAYER_TOLERANCE)?,
        ],
    })
}

pub fn check_maxpool(rng: &mut Rng) -> Result<GradReport> {
    let pool = MaxPool1d::new(3)?;
    // distinct values 0.01 apart so a step of 1e-5 never changes the winner
    let mut values: Vec<f64> = (0..2 * 10 * 3).map(|i| i as f64 * 0.01).collect();
    rng.shuffle(&mut values);
    let x = Tensor::from_vec(&[2, 10, 3], values)?;
    let (out, cache) = pool.forward(&x)?;
    let r = random(rng, out.shape())?;
    let dx = pool.backward(&cache, &r)?;
    let nx = numeric_gradient(&x, DEFAULT_STEP, |x| weighted_sum(&pool.forward(x)?.0, &r))?;
    Ok(GradReport {
        entries: vec![compare("maxpool.input", &dx, &nx, LAYER_TOLERANCE)?],
    })
}

pub fn check_dropout(rng: &mut Rng) -> Result<GradReport> {
    let drop = Dropout::new(0.3)?;
    let x = random(rng, &[3, 5, 2])?;
    let seed = rng.next_u64();
    let (out, cache) = drop.forward(&x, &mut Rng::new(seed), Mode::Train)?;
    let r = random(rng, out.shape())?;
    let dx = drop.backward(&cache, &r)?;
    // reseeding per evaluation keeps the mask fixed
    let nx = numeric_gradient(&x, DEFAULT_STEP, |x| {
        weighted_sum(&drop.forward(x, &mut Rng::new(seed), Mode::Train)?.0, &r)
    })?;
    Ok(GradReport {
        entries: vec![compare("dropout.input", &dx, &nx, LAYER_TOLERANCE)?],
    })
}

pub fn check_batchnorm(rng: &mut Rng) -> Result<GradReport> {
    let mut bn = BatchNorm::new(3, 0.9, 1e-5)?;
    bn.gamma = Tensor::uniform(rng, &[3], 0.5, 1.5)?;
    bn.beta = random(rng, &[3])?;
    let x = random(rng, &[2, 4, 3])?;
    let (out, cache) = bn.forward(&x, Mode::Frozen)?;
    let r = random(rng, out.shape())?;
    let g = bn.backward(&cache, &r)?;
    let loss = |b: &BatchNorm, x: &Tensor| weighted_sum(&b.clone().forward(x, Mode::Frozen)?.0, &r);
    let ng = numeric_gradient(&bn.gamma, DEFAULT_STEP, |v| {
        let mut b = bn.clone();
        b.gamma = v.clone();
        loss(&b, &x)
    })?;
    let nb = numeric_gradient(&bn.beta, DEFAULT_STEP, |v| {
        let mut b = bn.clone();
        b.beta = v.clone();
        loss(&b, &x)
    })?;
    let nx = numeric_gradient(&x, DEFAULT_STEP, |x| loss(&bn, x))?;

    // running statistics make the layer affine in its input
    bn.running_mean = random(rng, &[3])?;
    bn.running_var = Tensor::uniform(rng, &[3], 0.5, 2.0)?;
    let (_, cache) = bn.forward(&x, Mode::Inference)?;
    let gi = bn.backward(&cache, &r)?;
    let nxi = numeric_gradient(&x, DEFAULT_STEP, |x| {
        weighted_sum(&bn.forward_inference(x)?, &r)
    })?;
    Ok(GradReport {
        entries: vec![
            compare("batchnorm.gamma", &g.d_gamma, &ng, LAYER_TOLERANCE)?,
            compare("batchnorm.beta", &g.d_beta, &nb, LAYER_TOLERANCE)?,
            compare("batchnorm.input", &g.d_input, &nx, LAYER_TOLERANCE)?,
            compare(
                "batchnorm.input(running)",
                &gi.d_input,
                &nxi,
                LAYER_TOLERANCE,
            )?,
        ],
    })
}

pub fn check_lstm(rng: &mut Rng) -> Result<GradReport> {
    let (input, hidden, batch, steps) = (3, 4, 2, 5);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for _ in 0..4 {
        weights.push(Tensor::uniform(rng, &[hidden, hidden + input], -0.7, 0.7)?);
        biases.push(Tensor::uniform(rng, &[hidden], -0.5, 0.5)?);
    }
    let lstm = Lstm::from_parts(
        weights.try_into().expect("four gates"),
        biases.try_into().expect("four gates"),
        false,
    )?;
    let x = random(rng, &[batch, steps, input])?;
    let h0 = Tensor::uniform(rng, &[batch, hidden], -0.5, 0.5)?;
    let c0 = Tensor::uniform(rng, &[batch, hidden], -0.5, 0.5)?;
    let (h, _, cache) = lstm.forward_from(&x, &h0, &c0)?;
    let r = random(rng, h.shape())?;
    let g = lstm.backward(&cache, &r)?;
    let loss = |l: &Lstm, x: &Tensor, h0: &Tensor, c0: &Tensor| {
        weighted_sum(&l.forward_from(x, h0, c0)?.0, &r)
    };

    let mut report = GradReport::default();
    for (k, gate) in crate::layers::Gate::ALL.iter().enumerate() {
        let nw = numeric_gradient(&lstm.weights[k], DEFAULT_STEP, |w| {
            let mut l = lstm.clone();
            l.weights[k] = w.clone();
            loss(&l, &x, &h0, &c0)
        })?;
        let nb = numeric_gradient(&lstm.biases[k], DEFAULT_STEP, |b| {
            let mut l = lstm.clone();
            l.biases[k] = b.clone();
            loss(&l, &x, &h0, &c0)
        })?;
        let s = gate.suffix();
        report.entries.push(compare(
            &format!("lstm.w_{s}"),
            &g.d_weights[k],
            &nw,
            LAYER_TOLERANCE,
        )?);
        report.entries.push(compare(
            &format!("lstm.b_{s}"),
            &g.d_biases[k],
            &nb,
            LAYER_TOLERANCE,
        )?);
    }
    let nx = numeric_gradient(&x, DEFAULT_STEP, |x| loss(&lstm, x, &h0, &c0))?;
    let nh = numeric_gradient(&h0, DEFAULT_STEP, |h| loss(&lstm, &x, h, &c0))?;
    let nc = numeric_gradient(&c0, DEFAULT_STEP, |c| loss(&lstm, &x, &h0, c))?;
    report
        .entries
        .push(compare("lstm.input", &g.d_input, &nx, LAYER_TOLERANCE)?);
    report
        .entries
        .push(compare("lstm.h0", &g.d_h0, &nh, LAYER_TOLERANCE)?);
    report
        .entries
        .push(compare("lstm.c0", &g.d_c0, &nc, LAYER_TOLERANCE)?);
    Ok(report)
}

pub fn check_dense(rng: &mut Rng) -> Result<GradReport> {
    let dense = Dense::new(
        random(rng, &[3, 5])?,
        random(rng, &[3])?,
        Activation::Sigmoid,
    )?;
    let x = random(rng, &[4, 5])?;
    let (out, cache) = dense.forward(&x)?;
    let r = random(rng, out.shape())?;
    let g = dense.backward(&cache, &r)?;
    let loss = |d: &Dense, x: &Tensor| weighted_sum(&d.forward(x)?.0, &r);
    let nw = numeric_gradient(&dense.weight, DEFAULT_STEP, |w| {
        let mut d = dense.clone();
        d.weight = w.clone();
        loss(&d, &x)
    })?;
    let nb = numeric_gradient(&dense.bias, DEFAULT_STEP, |b| {
        let mut d = dense.clone();
        d.bias = b.clone();
        loss(&d, &x)
    })?;
    let nx = numeric_gradient(&x, DEFAULT_STEP, |x| loss(&dense, x))?;
    Ok(GradReport {
        entries: vec![
            compare("dense.weight", &g.d_weight, &nw, STRICT_TOLERANCE)?,
            compare("dense.bias", &g.d_bias, &nb, STRICT_TOLERANCE)?,
            compare("dense.input", &g.d_input, &nx, STRICT_TOLERANCE)?,
        ],
    })
}

pub fn check_msle(rng: &mut Rng) -> Result<GradReport> {
    let labels: Vec<usize> = (0..5).map(|_| rng.below(4)).collect();
    let y = crate::data::one_hot(&labels, 4)?;
    let yhat = Tensor::uniform(rng, &[5, 4], 0.05, 0.95)?;
    let g = msle_grad(&y, &yhat)?;
    let n = numeric_gradient(&yhat, DEFAULT_STEP, |p| msle_loss(&y, p))?;
    Ok(GradReport {
        entries: vec![compare("msle", &g, &n, STRICT_TOLERANCE)?],
    })
}

/// Checks every trainable tensor of `model` and its input through the MSLE
/// loss against `target`, with dropout off and batch-norm on batch
/// statistics.
pub fn gradient_check(
    model: &CrnnModel,
    input: &Tensor,
    target: &Tensor,
    tolerance: f64,
) -> Result<GradReport> {
    let mut model = model.clone();
    model.reset_state();
    let mut unused = Rng::new(0);
    let scores = model.forward(input, Mode::Frozen, &mut unused)?;
    let grads = model.backward(&msle_grad(target, &scores)?)?;

    let mut probe = model.clone();
    let mut loss_at = |m: &mut CrnnModel, x: &Tensor| -> Result<f64> {
        m.reset_state();
        let s = m.forward(x, Mode::Frozen, &mut unused)?;
        msle_loss(target, &s)
    };

    let mut report = GradReport::default();
    for (k, name) in PARAM_NAMES.iter().enumerate() {
        let analytic = &grads.params[k];
        let mut numeric = analytic.map(|_| 0.0);
        for i in 0..analytic.len() {
            let orig = probe.params()[k].data()[i];
            probe.params_mut()[k].data_mut()[i] = orig + DEFAULT_STEP;
            let plus = loss_at(&mut probe, input)?;
            probe.params_mut()[k].data_mut()[i] = orig - DEFAULT_STEP;
            let minus = loss_at(&mut probe, input)?;
            probe.params_mut()[k].data_mut()[i] = orig;
            numeric.data_mut()[i] = (plus - minus) / (2.0 * DEFAULT_STEP);
        }
        report.entries.push(compare(
            &format!("model.{name}"),
            analytic,
            &numeric,
            tolerance,
        )?);
    }
    let nx = numeric_gradient(input, DEFAULT_STEP, |x| loss_at(&mut probe, x))?;
    report
        .entries
        .push(compare("model.input", &grads.d_input, &nx, tolerance)?);
    Ok(report)
}

/// The toy model used for the end-to-end check: T=20, C=2, four filters of
/// width 5, pool 2, three LSTM units, four classes.
pub fn toy_config() -> CrnnConfig {
    let mut c = CrnnConfig::new(20, 2, 4);
    c.conv_filters = 4;
    c.conv_kernel = 5;
    c.pool_size = 2;
    c.lstm_units = 3;
    c
}

/// Every layer check plus the toy model, all from one seed.
pub fn check_all(seed: u64) -> Result<GradReport> {
    let mut rng = Rng::new(seed);
    let mut report = GradReport::default();
    report.extend(check_conv1d(&mut rng)?);
    report.extend(check_batchnorm(&mut rng)?);
    report.extend(check_dropout(&mut rng)?);
    report.extend(check_maxpool(&mut rng)?);
    report.extend(check_lstm(&mut rng)?);
    report.extend(check_dense(&mut rng)?);
    report.extend(check_msle(&mut rng)?);

    let mut model = CrnnModel::build(toy_config(), &mut rng)?;
    // non-trivial affine batch-norm parameters exercise every path
    model.batchnorm.gamma = Tensor::uniform(&mut rng, &[4], 0.5, 1.5)?;
    model.batchnorm.beta = Tensor::uniform(&mut rng, &[4], -0.5, 0.5)?;
    let x = Tensor::uniform(&mut rng, &[3, 20, 2], -1.0, 1.0)?;
    let labels: Vec<usize> = (0..3).map(|_| rng.below(4)).collect();
    let y = crate::data::one_hot(&labels, 4)?;
    report.extend(gradient_check(&model, &x, &y, LAYER_TOLERANCE)?);
    Ok(report)
}
