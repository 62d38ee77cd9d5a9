//! Adagrad: `G += g * g; theta -= lr * g / (sqrt(G) + eps)`, elementwise.

use crate::error::Result;
use crate::tensor::Tensor;

pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_EPSILON: f64 = 1e-7;

/// Sum of squared gradients for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdagradState {
    pub accumulator: Tensor,
}

impl AdagradState {
    pub fn for_param(param: &Tensor) -> Self {
        AdagradState {
            accumulator: param.map(|_| 0.0),
        }
    }
}

pub fn adagrad_step(
    param: &mut Tensor,
    grad: &Tensor,
    state: &mut AdagradState,
    lr: f64,
    eps: f64,
) -> Result<()> {
    param.expect_same_shape(grad)?;
    param.expect_same_shape(&state.accumulator)?;
    let acc = state.accumulator.data_mut();
    for ((p, &g), a) in param.data_mut().iter_mut().zip(grad.data()).zip(acc) {
        *a += g * g;
        if g != 0.0 {
            *p -= lr * g / (a.sqrt() + eps);
        }
    }
    Ok(())
}
