//! Batch normalization over the leading (batch) axes.
//!
//! Inputs of any rank are treated as `[rows, features]` where `features` is
//! the last dimension and every other axis is folded into `rows`, so a conv
//! output `[batch, time, filters]` is normalized per filter across both batch
//! and time.

use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::tensor::Tensor;

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.99;

#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
enum Stats {
    /// Normalized with the mini-batch's own mean and variance.
    Batch { x_hat: Tensor, inv_std: Vec<f64> },
    /// Normalized with the running statistics (a per-feature affine map).
    Running { x_hat: Tensor, inv_std: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    shape: Vec<usize>,
    stats: Stats,
}

impl BatchNormCache {
    pub fn x_hat(&self) -> &Tensor {
        match &self.stats {
            Stats::Batch { x_hat, .. } | Stats::Running { x_hat, .. } => x_hat,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads {
    pub d_input: Tensor,
    pub d_gamma: Tensor,
    pub d_beta: Tensor,
}

fn as_rows(shape: &[usize]) -> (usize, usize) {
    let features = *shape.last().expect("tensor rank >= 1");
    (shape.iter().product::<usize>() / features, features)
}

impl BatchNorm {
    pub fn new(features: usize, momentum: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "batch-norm epsilon must be positive, got {epsilon}"
            )));
        }
        if !(0.0..=1.0).contains(&momentum) {
            return Err(Error::InvalidArgument(format!(
                "batch-norm momentum must be in [0, 1], got {momentum}"
            )));
        }
        Ok(BatchNorm {
            gamma: Tensor::filled(&[features], 1.0)?,
            beta: Tensor::zeros(&[features])?,
            running_mean: Tensor::zeros(&[features])?,
            running_var: Tensor::filled(&[features], 1.0)?,
            momentum,
            epsilon,
        })
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }

    /// Train mode uses batch statistics and updates the running averages;
    /// frozen mode uses batch statistics without touching them; inference
    /// mode normalizes with the running statistics.
    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<(Tensor, BatchNormCache)> {
        let (y, cache, batch_stats) = self.normalize(x, mode)?;
        if let (Mode::Train, Some((mean, var))) = (mode, batch_stats) {
            let m = self.momentum;
            let rm = self.running_mean.data_mut();
            for (r, b) in rm.iter_mut().zip(&mean) {
                *r = m * *r + (1.0 - m) * b;
            }
            let rv = self.running_var.data_mut();
            for (r, b) in rv.iter_mut().zip(&var) {
                *r = m * *r + (1.0 - m) * b;
            }
        }
        Ok((y, cache))
    }

    /// Inference-mode forward without mutable access.
    pub fn forward_inference(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.normalize(x, Mode::Inference)?.0)
    }

    #[allow(clippy::type_complexity)]
    fn normalize(
        &self,
        x: &Tensor,
        mode: Mode,
    ) -> Result<(Tensor, BatchNormCache, Option<(Vec<f64>, Vec<f64>)>)> {
        let (rows, features) = as_rows(x.shape());
        if features != self.features() {
            return Err(Error::Shape(format!(
                "batch-norm expects {} features, got {features}",
                self.features()
            )));
        }
        let xd = x.data();
        let (mean, var) = match mode {
            Mode::Inference => (
                self.running_mean.data().to_vec(),
                self.running_var.data().to_vec(),
            ),
            Mode::Train | Mode::Frozen => {
                if rows < 2 {
                    return Err(Error::Shape(format!(
                        "batch-norm needs at least 2 rows per feature in training, got {rows}"
                    )));
                }
                let mut mean = vec![0.0; features];
                for r in 0..rows {
                    for (m, &v) in mean.iter_mut().zip(&xd[r * features..(r + 1) * features]) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= rows as f64);
                let mut var = vec![0.0; features];
                for r in 0..rows {
                    for f in 0..features {
                        var[f] += (xd[r * features + f] - mean[f]).powi(2);
                    }
                }
                var.iter_mut().for_each(|v| *v /= rows as f64);
                (mean, var)
            }
        };
        let inv_std: Vec<f64> = var
            .iter()
            .map(|v| 1.0 / (v + self.epsilon).sqrt())
            .collect();
        let mut x_hat = vec![0.0; xd.len()];
        let mut y = vec![0.0; xd.len()];
        let (g, b) = (self.gamma.data(), self.beta.data());
        for r in 0..rows {
            for f in 0..features {
                let i = r * features + f;
                x_hat[i] = (xd[i] - mean[f]) * inv_std[f];
                y[i] = g[f] * x_hat[i] + b[f];
            }
        }
        let x_hat = Tensor::from_vec(x.shape(), x_hat)?;
        let (stats, batch_stats) = match mode {
            Mode::Inference => (Stats::Running { x_hat, inv_std }, None),
            _ => (Stats::Batch { x_hat, inv_std }, Some((mean, var))),
        };
        Ok((
            Tensor::from_vec(x.shape(), y)?,
            BatchNormCache {
                shape: x.shape().to_vec(),
                stats,
            },
            batch_stats,
        ))
    }

    pub fn backward(&self, cache: &BatchNormCache, d_out: &Tensor) -> Result<BatchNormGrads> {
        d_out.expect_shape(&cache.shape, "batch-norm backward d_out")?;
        let (rows, features) = as_rows(&cache.shape);
        let dy = d_out.data();
        let x_hat = cache.x_hat().data();
        let gamma = self.gamma.data();

        let mut d_gamma = vec![0.0; features];
        let mut d_beta = vec![0.0; features];
        for r in 0..rows {
            for f in 0..features {
                let i = r * features + f;
                d_beta[f] += dy[i];
                d_gamma[f] += dy[i] * x_hat[i];
            }
        }

        let mut d_x = vec![0.0; dy.len()];
        match &cache.stats {
            Stats::Running { inv_std, .. } => {
                for r in 0..rows {
                    for f in 0..features {
                        let i = r * features + f;
                        d_x[i] = dy[i] * gamma[f] * inv_std[f];
                    }
                }
            }
            Stats::Batch { inv_std, .. } => {
                // Mean and variance depend on every row, so
                // dx = g/(m*s) * (m*dy - sum(dy) - x_hat * sum(dy * x_hat)).
                let m = rows as f64;
                for r in 0..rows {
                    for f in 0..features {
                        let i = r * features + f;
                        d_x[i] = gamma[f] * inv_std[f] / m
                            * (m * dy[i] - d_beta[f] - x_hat[i] * d_gamma[f]);
                    }
                }
            }
        }
        Ok(BatchNormGrads {
            d_input: Tensor::from_vec(&cache.shape, d_x)?,
            d_gamma: Tensor::from_vec(&[features], d_gamma)?,
            d_beta: Tensor::from_vec(&[features], d_beta)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rng;

    #[test]
    fn constant_batch_returns_beta() {
        let mut bn = BatchNorm::new(3, DEFAULT_MOMENTUM, DEFAULT_EPSILON).unwrap();
        bn.gamma = Tensor::from_vec(&[3], vec![2.0, -1.0, 0.5]).unwrap();
        bn.beta = Tensor::from_vec(&[3], vec![0.1, 0.2, -0.3]).unwrap();
        let x = Tensor::filled(&[5, 3], 4.2).unwrap();
        let (y, _) = bn.forward(&x, Mode::Train).unwrap();
        for r in 0..5 {
            for f in 0..3 {
                let got = y.get(&[r, f]).unwrap();
                assert!((got - bn.beta.data()[f]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn unit_batch_by_hand() {
        let mut bn = BatchNorm::new(2, DEFAULT_MOMENTUM, DEFAULT_EPSILON).unwrap();
        let x = Tensor::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let (y, _) = bn.forward(&x, Mode::Train).unwrap();
        let scale = (1.0 / (1.0 + DEFAULT_EPSILON)).sqrt();
        let expected = [-scale, scale, scale, -scale];
        for (a, b) in y.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn normalized_batch_statistics() {
        let mut rng = Rng::new(12);
        let mut bn = BatchNorm::new(4, DEFAULT_MOMENTUM, DEFAULT_EPSILON).unwrap();
        let x = Tensor::uniform(&mut rng, &[3, 7, 4], -2.0, 5.0).unwrap();
        let (y, cache) = bn.forward(&x, Mode::Train).unwrap();
        let rows = 21;
        for f in 0..4 {
            let col: Vec<f64> = (0..rows).map(|r| cache.x_hat().data()[r * 4 + f]).collect();
            let mean = col.iter().sum::<f64>() / rows as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64;
            let raw: Vec<f64> = (0..rows).map(|r| x.data()[r * 4 + f]).collect();
            let rm = raw.iter().sum::<f64>() / rows as f64;
            let sigma2 = raw.iter().map(|v| (v - rm).powi(2)).sum::<f64>() / rows as f64;
            assert!(mean.abs() <= 1e-9);
            assert!((var * (1.0 + DEFAULT_EPSILON / sigma2) - 1.0).abs() <= 1e-6);
            let ymean = (0..rows).map(|r| y.data()[r * 4 + f]).sum::<f64>() / rows as f64;
            assert!(ymean.abs() <= 1e-9);
        }
    }

    #[test]
    fn running_stats_move_toward_batch() {
        let mut bn = BatchNorm::new(1, 0.9, DEFAULT_EPSILON).unwrap();
        let x = Tensor::from_vec(&[2, 1], vec![1.0, 3.0]).unwrap();
        bn.forward(&x, Mode::Train).unwrap();
        assert!((bn.running_mean.data()[0] - 0.2).abs() < 1e-15);
        assert!((bn.running_var.data()[0] - (0.9 + 0.1 * 1.0)).abs() < 1e-15);
        let before = bn.running_mean.clone();
        bn.forward(&x, Mode::Frozen).unwrap();
        bn.forward(&x, Mode::Inference).unwrap();
        assert_eq!(bn.running_mean, before);
    }

    #[test]
    fn parameter_gradients_are_column_sums() {
        let mut rng = Rng::new(13);
        let mut bn = BatchNorm::new(3, DEFAULT_MOMENTUM, DEFAULT_EPSILON).unwrap();
        let x = Tensor::uniform(&mut rng, &[6, 3], -1.0, 1.0).unwrap();
        let (_, cache) = bn.forward(&x, Mode::Train).unwrap();
        let d = Tensor::uniform(&mut rng, &[6, 3], -1.0, 1.0).unwrap();
        let g = bn.backward(&cache, &d).unwrap();
        assert!(g.d_beta.max_abs_diff(&d.column_sums().unwrap()).unwrap() < 1e-15);
        let dg = d.hadamard(cache.x_hat()).unwrap().column_sums().unwrap();
        assert!(g.d_gamma.max_abs_diff(&dg).unwrap() < 1e-15);
    }

    #[test]
    fn single_row_rejected_in_training() {
        let mut bn = BatchNorm::new(2, DEFAULT_MOMENTUM, DEFAULT_EPSILON).unwrap();
        let x = Tensor::zeros(&[1, 2]).unwrap();
        assert!(bn.forward(&x, Mode::Train).is_err());
        assert!(bn.forward(&x, Mode::Inference).is_ok());
    }
}
