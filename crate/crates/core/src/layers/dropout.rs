//! Inverted dropout.

use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Zeroes each element with probability `rate` during training and scales
/// survivors by `1 / (1 - rate)`; outside training it is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    rate: f64,
}

#[derive(Debug, Clone)]
pub struct DropoutCache {
    mask: Option<Tensor>,
}

impl DropoutCache {
    pub fn mask(&self) -> Option<&Tensor> {
        self.mask.as_ref()
    }
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
        Ok(Dropout { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn forward(&self, x: &Tensor, rng: &mut Rng, mode: Mode) -> Result<(Tensor, DropoutCache)> {
        if mode != Mode::Train || self.rate == 0.0 {
            return Ok((x.clone(), DropoutCache { mask: None }));
        }
        let keep = 1.0 / (1.0 - self.rate);
        let mask = x.map(|_| {
            if rng.next_f64() < self.rate {
                0.0
            } else {
                keep
            }
        });
        let out = x.hadamard(&mask)?;
        Ok((out, DropoutCache { mask: Some(mask) }))
    }

    pub fn backward(&self, cache: &DropoutCache, d_out: &Tensor) -> Result<Tensor> {
        match &cache.mask {
            Some(mask) => d_out.hadamard(mask),
            None => Ok(d_out.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_is_identity() {
        let d = Dropout::new(0.0).unwrap();
        let x = Tensor::uniform(&mut Rng::new(1), &[4, 5], -1.0, 1.0).unwrap();
        for mode in [Mode::Train, Mode::Frozen, Mode::Inference] {
            let (y, _) = d.forward(&x, &mut Rng::new(2), mode).unwrap();
            assert_eq!(y, x);
        }
    }

    #[test]
    fn inference_is_identity() {
        let d = Dropout::new(0.7).unwrap();
        let x = Tensor::uniform(&mut Rng::new(1), &[4, 5], -1.0, 1.0).unwrap();
        let (y, cache) = d.forward(&x, &mut Rng::new(2), Mode::Inference).unwrap();
        assert_eq!(y, x);
        assert!(cache.mask().is_none());
    }

    #[test]
    fn inverted_scaling_preserves_expectation() {
        let d = Dropout::new(0.5).unwrap();
        let x = Tensor::filled(&[100_000], 1.0).unwrap();
        let (y, cache) = d.forward(&x, &mut Rng::new(3), Mode::Train).unwrap();
        let mean = y.sum() / 100_000.0;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
        let zeros = cache
            .mask()
            .unwrap()
            .data()
            .iter()
            .filter(|&&m| m == 0.0)
            .count();
        assert!((zeros as f64 / 100_000.0 - 0.5).abs() < 0.01);
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn backward_uses_cached_mask() {
        let d = Dropout::new(0.3).unwrap();
        let x = Tensor::filled(&[50], 1.0).unwrap();
        let (_, cache) = d.forward(&x, &mut Rng::new(4), Mode::Train).unwrap();
        let g = Tensor::uniform(&mut Rng::new(5), &[50], -1.0, 1.0).unwrap();
        let dx = d.backward(&cache, &g).unwrap();
        assert_eq!(dx, g.hadamard(cache.mask().unwrap()).unwrap());
    }

    #[test]
    fn rate_one_rejected() {
        assert!(Dropout::new(1.0).is_err());
        assert!(Dropout::new(-0.1).is_err());
    }
}
