//! Mean squared logarithmic error.
//!
//! `L = 1/N * sum_i (ln(y_i + 1) - ln(yhat_i + 1))^2` over all `N` elements.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn check(y: &Tensor, yhat: &Tensor) -> Result<()> {
    y.expect_same_shape(yhat)?;
    if let Some(v) = y.data().iter().chain(yhat.data()).find(|&&v| !(v > -1.0)) {
        return Err(Error::InvalidArgument(format!(
            "MSLE needs every element > -1, found {v}"
        )));
    }
    Ok(())
}

pub fn msle_loss(y: &Tensor, yhat: &Tensor) -> Result<f64> {
    check(y, yhat)?;
    let n = y.len() as f64;
    Ok(y.data()
        .iter()
        .zip(yhat.data())
        .map(|(&a, &b)| (a.ln_1p() - b.ln_1p()).powi(2))
        .sum::<f64>()
        / n)
}

/// Gradient of [`msle_loss`] with respect to `yhat`.
pub fn msle_grad(y: &Tensor, yhat: &Tensor) -> Result<Tensor> {
    check(y, yhat)?;
    let n = y.len() as f64;
    y.zip_map(yhat, |a, b| -2.0 / n * (a.ln_1p() - b.ln_1p()) / (b + 1.0))
}
