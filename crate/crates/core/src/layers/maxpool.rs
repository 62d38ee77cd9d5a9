//! Non-overlapping max-pooling along the time axis.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Pools `[batch, time, features]` with window and stride `size`; the final
/// `time % size` steps are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool1d {
    pub size: usize,
}

#[derive(Debug, Clone)]
pub struct MaxPoolCache {
    input_shape: Vec<usize>,
    /// Flat input offset of the winning element for each output element.
    argmax: Vec<usize>,
}

impl MaxPool1d {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidArgument("pool size must be positive".into()));
        }
        Ok(MaxPool1d { size })
    }

    pub fn output_len(&self, input_len: usize) -> Result<usize> {
        if input_len < self.size {
            return Err(Error::Shape(format!(
                "max-pool input length {input_len} shorter than pool size {}",
                self.size
            )));
        }
        Ok(input_len / self.size)
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, MaxPoolCache)> {
        let &[batch, len, features] = x.shape() else {
            return Err(Error::Shape(format!(
                "max-pool input must be [batch, time, features], got {:?}",
                x.shape()
            )));
        };
        let out_len = self.output_len(len)?;
        let xd = x.data();
        let mut out = Vec::with_capacity(batch * out_len * features);
        let mut argmax = Vec::with_capacity(out.capacity());
        for b in 0..batch {
            for n in 0..out_len {
                for f in 0..features {
                    let mut best = (b * len + n * self.size) * features + f;
                    for j in 1..self.size {
                        let idx = (b * len + n * self.size + j) * features + f;
                        // strict comparison keeps the first maximum on ties
                        if xd[idx] > xd[best] {
                            best = idx;
                        }
                    }
                    out.push(xd[best]);
                    argmax.push(best);
                }
            }
        }
        Ok((
            Tensor::from_vec(&[batch, out_len, features], out)?,
            MaxPoolCache {
                input_shape: x.shape().to_vec(),
                argmax,
            },
        ))
    }

    pub fn backward(&self, cache: &MaxPoolCache, d_out: &Tensor) -> Result<Tensor> {
        if d_out.len() != cache.argmax.len() {
            return Err(Error::Shape(format!(
                "max-pool backward expects {} gradient elements, got {}",
                cache.argmax.len(),
                d_out.len()
            )));
        }
        let mut d_x = Tensor::zeros(&cache.input_shape)?;
        let dx = d_x.data_mut();
        for (&idx, &g) in cache.argmax.iter().zip(d_out.data()) {
            dx[idx] += g;
        }
        Ok(d_x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pools_by_inspection() {
        let pool = MaxPool1d::new(2).unwrap();
        let x = Tensor::from_vec(&[1, 4, 1], vec![1.0, 3.0, 2.0, 8.0]).unwrap();
        let (y, cache) = pool.forward(&x).unwrap();
        assert_eq!(y.data(), &[3.0, 8.0]);
        let dx = pool
            .backward(&cache, &Tensor::filled(&[1, 2, 1], 1.0).unwrap())
            .unwrap();
        assert_eq!(dx.data(), &[0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_input() {
        let pool = MaxPool1d::new(3).unwrap();
        let x = Tensor::filled(&[2, 9, 2], 4.0).unwrap();
        let (y, cache) = pool.forward(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 4.0));
        // first index wins the tie
        let dx = pool
            .backward(&cache, &Tensor::filled(y.shape(), 1.0).unwrap())
            .unwrap();
        assert_eq!(dx.get(&[0, 0, 0]).unwrap(), 1.0);
        assert_eq!(dx.get(&[0, 1, 0]).unwrap(), 0.0);
    }

    #[test]
    fn floor_rule_drops_remainder() {
        let pool = MaxPool1d::new(8).unwrap();
        let x = Tensor::zeros(&[1, 67, 3]).unwrap();
        let (y, _) = pool.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 8, 3]);
        assert!(pool.forward(&Tensor::zeros(&[1, 7, 3]).unwrap()).is_err());
    }

    #[test]
    fn gradient_mass_is_conserved() {
        let mut rng = crate::Rng::new(8);
        let pool = MaxPool1d::new(3).unwrap();
        let x = Tensor::uniform(&mut rng, &[2, 10, 3], -1.0, 1.0).unwrap();
        let (y, cache) = pool.forward(&x).unwrap();
        let d = Tensor::uniform(&mut rng, y.shape(), -1.0, 1.0).unwrap();
        let dx = pool.backward(&cache, &d).unwrap();
        assert!((dx.sum() - d.sum()).abs() < 1e-12);
    }
}
