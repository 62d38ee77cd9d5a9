use crate::error::{Error, Result};
use crate::layers::Activation;
use crate::tensor::Tensor;

/// Fully-connected layer: `y = g(x W^T + b)` with `W: [out, in]`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Tensor,
    pre_activation: Tensor,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub d_input: Tensor,
    pub d_weight: Tensor,
    pub d_bias: Tensor,
}

impl Dense {
    pub fn new(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        let &[out, _] = weight.shape() else {
            return Err(Error::Shape(format!(
                "dense weight must be [out, in], got {:?}",
                weight.shape()
            )));
        };
        bias.expect_shape(&[out], "dense bias")?;
        Ok(Dense {
            weight,
            bias,
            activation,
        })
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Result<Self> {
        Self::new(
            Tensor::zeros(&[outputs, inputs])?,
            Tensor::zeros(&[outputs])?,
            activation,
        )
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, DenseCache)> {
        if x.rank() != 2 || x.shape()[1] != self.inputs() {
            return Err(Error::Shape(format!(
                "dense expects [batch, {}], got {:?}",
                self.inputs(),
                x.shape()
            )));
        }
        let mut z = x.matmul_transposed(&self.weight)?;
        for row in z.data_mut().chunks_mut(self.outputs()) {
            for (v, b) in row.iter_mut().zip(self.bias.data()) {
                *v += b;
            }
        }
        let y = self.activation.apply(&z);
        Ok((
            y,
            DenseCache {
                input: x.clone(),
                pre_activation: z,
            },
        ))
    }

    pub fn backward(&self, cache: &DenseCache, d_out: &Tensor) -> Result<DenseGrads> {
        d_out.expect_shape(cache.pre_activation.shape(), "dense backward d_out")?;
        let dz = self.activation.backprop(&cache.pre_activation, d_out)?;
        Ok(DenseGrads {
            d_input: dz.matmul(&self.weight)?,
            d_weight: dz.transposed_matmul(&cache.input)?,
            d_bias: dz.column_sums()?,
        })
    }
}
