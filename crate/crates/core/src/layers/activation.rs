//! Pointwise activation functions and their derivatives.

use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;

/// Scale of the negative branch of elu used by [`Activation::Elu`].
pub const ELU_ALPHA: f64 = 1.0;

/// Logistic sigmoid, stable for large |t|.
pub fn sigmoid_scalar(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub fn elu_scalar(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        alpha * x.exp_m1()
    }
}

pub fn elu_grad_scalar(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        alpha * x.exp()
    }
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

pub fn elu(x: &Tensor, alpha: f64) -> Tensor {
    x.map(|v| elu_scalar(v, alpha))
}

pub fn elu_grad(x: &Tensor, alpha: f64) -> Tensor {
    x.map(|v| elu_grad_scalar(v, alpha))
}

pub fn tanh(x: &Tensor) -> Tensor {
    x.map(f64::tanh)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Sigmoid,
    Tanh,
    Elu,
}

impl Activation {
    pub fn apply_scalar(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Sigmoid => sigmoid_scalar(z),
            Activation::Tanh => z.tanh(),
            Activation::Elu => elu_scalar(z, ELU_ALPHA),
        }
    }

    /// Derivative at pre-activation `z`.
    pub fn derivative_scalar(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => {
                let s = sigmoid_scalar(z);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Elu => elu_grad_scalar(z, ELU_ALPHA),
        }
    }

    pub fn apply(self, z: &Tensor) -> Tensor {
        z.map(|v| self.apply_scalar(v))
    }

    /// `d_out * g'(z)` elementwise.
    pub fn backprop(self, z: &Tensor, d_out: &Tensor) -> crate::Result<Tensor> {
        z.zip_map(d_out, |zv, d| d * self.derivative_scalar(zv))
    }
}
