//! Valid, stride-1 one-dimensional convolution over `[batch, time, channels]`.

use crate::error::{Error, Result};
use crate::layers::Activation;
use crate::tensor::Tensor;

/// Weights are `[filters, in_channels, kernel]`, bias is `[filters]`.
///
/// `out[b, t, f] = g(bias[f] + sum_c sum_p w[f, c, p] * x[b, t + p, c])`
/// for `t` in `0..=T-K`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct Conv1dCache {
    input: Tensor,
    pre_activation: Tensor,
}

#[derive(Debug, Clone)]
pub struct Conv1dGrads {
    pub d_input: Tensor,
    pub d_weight: Tensor,
    pub d_bias: Tensor,
}

impl Conv1d {
    pub fn new(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        let &[filters, _, _] = weight.shape() else {
            return Err(Error::Shape(format!(
                "conv1d weight must be [filters, channels, kernel], got {:?}",
                weight.shape()
            )));
        };
        bias.expect_shape(&[filters], "conv1d bias")?;
        Ok(Conv1d {
            weight,
            bias,
            activation,
        })
    }

    pub fn zeros(
        filters: usize,
        channels: usize,
        kernel: usize,
        activation: Activation,
    ) -> Result<Self> {
        Self::new(
            Tensor::zeros(&[filters, channels, kernel])?,
            Tensor::zeros(&[filters])?,
            activation,
        )
    }

    pub fn filters(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn output_len(&self, input_len: usize) -> Result<usize> {
        if input_len < self.kernel() {
            return Err(Error::Shape(format!(
                "conv1d input length {input_len} shorter than kernel {}",
                self.kernel()
            )));
        }
        Ok(input_len - self.kernel() + 1)
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Conv1dCache)> {
        let &[batch, len, channels] = x.shape() else {
            return Err(Error::Shape(format!(
                "conv1d input must be [batch, time, channels], got {:?}",
                x.shape()
            )));
        };
        if channels != self.in_channels() {
            return Err(Error::Shape(format!(
                "conv1d expects {} channels, got {channels}",
                self.in_channels()
            )));
        }
        let out_len = self.output_len(len)?;
        let (nf, k) = (self.filters(), self.kernel());
        let w = self.weight.data();
        let xd = x.data();
        let mut z = vec![0.0; batch * out_len * nf];
        for b in 0..batch {
            for t in 0..out_len {
                let window = &xd[(b * len + t) * channels..(b * len + t + k) * channels];
                let out = &mut z[(b * out_len + t) * nf..(b * out_len + t + 1) * nf];
                for (f, o) in out.iter_mut().enumerate() {
                    let wf = &w[f * channels * k..(f + 1) * channels * k];
                    let mut acc = self.bias.data()[f];
                    for p in 0..k {
                        for c in 0..channels {
                            acc += wf[c * k + p] * window[p * channels + c];
                        }
                    }
                    *o = acc;
                }
            }
        }
        let pre_activation = Tensor::from_vec(&[batch, out_len, nf], z)?;
        let out = self.activation.apply(&pre_activation);
        Ok((
            out,
            Conv1dCache {
                input: x.clone(),
                pre_activation,
            },
        ))
    }

    pub fn backward(&self, cache: &Conv1dCache, d_out: &Tensor) -> Result<Conv1dGrads> {
        d_out.expect_shape(cache.pre_activation.shape(), "conv1d backward d_out")?;
        let dz = self.activation.backprop(&cache.pre_activation, d_out)?;
        let &[batch, len, channels] = cache.input.shape() else {
            unreachable!("cache input is rank 3");
        };
        let (nf, k) = (self.filters(), self.kernel());
        let out_len = len - k + 1;
        let xd = cache.input.data();
        let w = self.weight.data();
        let dzd = dz.data();

        let mut d_w = vec![0.0; nf * channels * k];
        let mut d_b = vec![0.0; nf];
        let mut d_x = vec![0.0; batch * len * channels];
        for b in 0..batch {
            for t in 0..out_len {
                let base = (b * len + t) * channels;
                for f in 0..nf {
                    let g = dzd[(b * out_len + t) * nf + f];
                    if g == 0.0 {
                        continue;
                    }
                    d_b[f] += g;
                    let off = f * channels * k;
                    for c in 0..channels {
                        for p in 0..k {
                            d_w[off + c * k + p] += g * xd[base + p * channels + c];
                            d_x[base + p * channels + c] += g * w[off + c * k + p];
                        }
                    }
                }
            }
        }
        Ok(Conv1dGrads {
            d_input: Tensor::from_vec(cache.input.shape(), d_x)?,
            d_weight: Tensor::from_vec(&[nf, channels, k], d_w)?,
            d_bias: Tensor::from_vec(&[nf], d_b)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel_is_identity() {
        let conv = Conv1d::new(
            Tensor::filled(&[1, 1, 1], 1.0).unwrap(),
            Tensor::zeros(&[1]).unwrap(),
            Activation::Identity,
        )
        .unwrap();
        let x =
            Tensor::from_vec(&[2, 4, 1], vec![1.0, -2.0, 3.0, 0.5, 7.0, 8.0, -9.0, 1.5]).unwrap();
        let (y, cache) = conv.forward(&x).unwrap();
        assert_eq!(y, x);
        let g = conv.backward(&cache, &x).unwrap();
        assert_eq!(g.d_input, x);
    }

    #[test]
    fn hand_convolution() {
        let conv = Conv1d::new(
            Tensor::filled(&[1, 1, 2], 1.0).unwrap(),
            Tensor::zeros(&[1]).unwrap(),
            Activation::Identity,
        )
        .unwrap();
        let x = Tensor::from_vec(&[1, 3, 1], vec![1.0, 2.0, 3.0]).unwrap();
        let (y, _) = conv.forward(&x).unwrap();
        assert_eq!(y.data(), &[3.0, 5.0]);
    }

    #[test]
    fn ims_shape_rule() {
        let conv = Conv1d::zeros(84, 8, 84, Activation::Elu).unwrap();
        let x = Tensor::zeros(&[2, 150, 8]).unwrap();
        let (y, _) = conv.forward(&x).unwrap();
        assert_eq!(y.shape(), &[2, 67, 84]);
    }

    #[test]
    fn too_short_input() {
        let conv = Conv1d::zeros(2, 1, 5, Activation::Identity).unwrap();
        let x = Tensor::zeros(&[1, 4, 1]).unwrap();
        assert!(matches!(conv.forward(&x), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_upstream_gradient() {
        let mut rng = crate::Rng::new(4);
        let conv = Conv1d::new(
            Tensor::uniform(&mut rng, &[3, 2, 3], -1.0, 1.0).unwrap(),
            Tensor::uniform(&mut rng, &[3], -1.0, 1.0).unwrap(),
            Activation::Elu,
        )
        .unwrap();
        let x = Tensor::uniform(&mut rng, &[2, 6, 2], -1.0, 1.0).unwrap();
        let (y, cache) = conv.forward(&x).unwrap();
        let g = conv
            .backward(&cache, &Tensor::zeros(y.shape()).unwrap())
            .unwrap();
        assert!(g.d_input.data().iter().all(|&v| v == 0.0));
        assert!(g.d_weight.data().iter().all(|&v| v == 0.0));
        assert!(g.d_bias.data().iter().all(|&v| v == 0.0));
    }
}
