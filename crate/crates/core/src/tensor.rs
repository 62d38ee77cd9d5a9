//! Dense row-major tensors of rank 1 to 3.

use std::fmt;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Dense row-major array of `f64` with 1 to 3 dimensions.
///
/// Element `(i, j, k)` of a `[d1, d2, d3]` tensor lives at
/// `data[i * d2 * d3 + j * d3 + k]`.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.len() > 3 {
        return Err(Error::Shape(format!(
            "rank must be 1..=3, got shape {shape:?}"
        )));
    }
    if shape.contains(&0) {
        return Err(Error::Shape(format!(
            "all dimensions must be positive, got {shape:?}"
        )));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Shape(format!("element count of {shape:?} overflows")))
}

impl Tensor {
    pub fn filled(shape: &[usize], value: f64) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![value; len],
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::filled(shape, 0.0)
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len = check_shape(shape)?;
        if len != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {len} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Builds a rank-2 tensor from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::from_vec(&[rows.len(), cols], rows.concat())
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut t = Self::zeros(&[n, n])?;
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        Ok(t)
    }

    /// I.i.d. uniform draws in `[lo, hi)`.
    pub fn uniform(rng: &mut Rng, shape: &[usize], lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "uniform range needs lo < hi, got [{lo}, {hi})"
            )));
        }
        let len = check_shape(shape)?;
        let data = (0..len).map(|_| rng.uniform(lo, hi)).collect();
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Row-major strides, in elements.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.shape.len()];
        for i in (0..self.shape.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.shape[i + 1];
        }
        strides
    }

    fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len() || index.iter().zip(&self.shape).any(|(i, d)| i >= d) {
            return Err(Error::Shape(format!(
                "index {index:?} out of bounds for shape {:?}",
                self.shape
            )));
        }
        Ok(index.iter().zip(self.strides()).map(|(i, s)| i * s).sum())
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.offset(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        let off = self.offset(index)?;
        self.data[off] = value;
        Ok(())
    }

    /// Same data under a new shape with equal element count.
    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let len = check_shape(shape)?;
        if len != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.expect_same_shape(other)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn expect_same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn expect_shape(&self, shape: &[usize], what: &str) -> Result<()> {
        if self.shape != shape {
            return Err(Error::Shape(format!(
                "{what}: expected shape {shape:?}, got {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.expect_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        self.map(|x| x * factor)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        self.expect_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    fn dims2(&self, what: &str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::Shape(format!(
                "{what}: expected rank 2, got shape {:?}",
                self.shape
            ))),
        }
    }

    /// Matrix product `[m,k] x [k,n] -> [m,n]`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.dims2("matmul lhs")?;
        let (k2, n) = other.dims2("matmul rhs")?;
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul inner dimensions differ: [{m},{k}] x [{k2},{n}]"
            )));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                let b_row = &other.data[p * n..(p + 1) * n];
                for (o, &b) in row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Tensor::from_vec(&[m, n], out)
    }

    /// `self x other^T`: `[m,k] x [n,k] -> [m,n]`.
    pub fn matmul_transposed(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.dims2("matmul_transposed lhs")?;
        let (n, k2) = other.dims2("matmul_transposed rhs")?;
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul_transposed inner dimensions differ: [{m},{k}] x [{n},{k2}]^T"
            )));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let a = &self.data[i * k..(i + 1) * k];
            for j in 0..n {
                let b = &other.data[j * k..(j + 1) * k];
                out[i * n + j] = a.iter().zip(b).map(|(x, y)| x * y).sum();
            }
        }
        Tensor::from_vec(&[m, n], out)
    }

    /// `self^T x other`: `[k,m] x [k,n] -> [m,n]`.
    pub fn transposed_matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (k, m) = self.dims2("transposed_matmul lhs")?;
        let (k2, n) = other.dims2("transposed_matmul rhs")?;
        if k != k2 {
            return Err(Error::Shape(format!(
                "transposed_matmul inner dimensions differ: [{k},{m}]^T x [{k2},{n}]"
            )));
        }
        let mut out = vec![0.0; m * n];
        for p in 0..k {
            let a_row = &self.data[p * m..(p + 1) * m];
            let b_row = &other.data[p * n..(p + 1) * n];
            for (i, &a) in a_row.iter().enumerate() {
                let row = &mut out[i * n..(i + 1) * n];
                for (o, &b) in row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Tensor::from_vec(&[m, n], out)
    }

    /// Sums a `[rows, cols]` tensor over its rows, giving `[cols]`.
    pub fn column_sums(&self) -> Result<Tensor> {
        let (r, c) = self.dims2("column_sums")?;
        let mut out = vec![0.0; c];
        for i in 0..r {
            for (o, &x) in out.iter_mut().zip(&self.data[i * c..(i + 1) * c]) {
                *o += x;
            }
        }
        Tensor::from_vec(&[c], out)
    }

    /// Index of the largest element in each row of a `[rows, cols]` tensor.
    /// Ties go to the lowest index.
    pub fn argmax_rows(&self) -> Result<Vec<usize>> {
        let (r, c) = self.dims2("argmax_rows")?;
        Ok((0..r)
            .map(|i| {
                let row = &self.data[i * c..(i + 1) * c];
                let mut best = 0;
                for (j, &x) in row.iter().enumerate() {
                    if x > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect())
    }

    /// Copies the given leading-axis entries into a new tensor.
    pub fn gather(&self, indices: &[usize]) -> Result<Tensor> {
        if indices.is_empty() {
            return Err(Error::Shape("gather needs at least one index".into()));
        }
        let stride = self.data.len() / self.shape[0];
        let mut data = Vec::with_capacity(indices.len() * stride);
        for &i in indices {
            if i >= self.shape[0] {
                return Err(Error::Shape(format!(
                    "gather index {i} out of range for leading dimension {}",
                    self.shape[0]
                )));
            }
            data.extend_from_slice(&self.data[i * stride..(i + 1) * stride]);
        }
        let mut shape = self.shape.clone();
        shape[0] = indices.len();
        Tensor::from_vec(&shape, data)
    }

    /// Stacks tensors along the leading axis. Trailing dimensions must agree.
    pub fn concat(parts: &[&Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Shape("concat of zero tensors".into()))?;
        let tail = &first.shape[1..];
        let mut lead = 0;
        let mut data = Vec::new();
        for p in parts {
            if p.rank() != first.rank() || &p.shape[1..] != tail {
                return Err(Error::Shape(format!(
                    "concat shape mismatch: {:?} vs {:?}",
                    first.shape, p.shape
                )));
            }
            lead += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        let mut shape = first.shape.clone();
        shape[0] = lead;
        Tensor::from_vec(&shape, data)
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 8;
        write!(f, "Tensor{:?} [", self.shape)?;
        for (i, x) in self.data.iter().take(SHOWN).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x:.6}")?;
        }
        if self.data.len() > SHOWN {
            write!(f, ", ... ({} total)", self.data.len())?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &Tensor, b: &Tensor) -> Tensor {
        let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
        let mut out = Tensor::zeros(&[m, n]).unwrap();
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..k {
                    s += a.get(&[i, p]).unwrap() * b.get(&[p, j]).unwrap();
                }
                out.set(&[i, j], s).unwrap();
            }
        }
        out
    }

    #[test]
    fn filled_shapes() {
        let t = Tensor::filled(&[2, 3], 0.0).unwrap();
        assert_eq!(t.shape(), &[2, 3]);
        assert!(t.data().iter().all(|&x| x == 0.0));

        let t = Tensor::filled(&[1], 7.5).unwrap();
        assert_eq!(t.data(), &[7.5]);

        let t = Tensor::filled(&[2, 2, 2], 1.0).unwrap();
        assert_eq!(t.len(), 8);
        assert_eq!(t.strides(), vec![4, 2, 1]);
    }

    #[test]
    fn bad_shapes_rejected() {
        assert!(matches!(Tensor::zeros(&[2, 0]), Err(Error::Shape(_))));
        assert!(matches!(Tensor::zeros(&[]), Err(Error::Shape(_))));
        assert!(matches!(Tensor::zeros(&[1, 1, 1, 1]), Err(Error::Shape(_))));
        assert!(Tensor::from_vec(&[2, 2], vec![1.0; 3]).is_err());
    }

    #[test]
    fn element_offsets_are_row_major() {
        let t = Tensor::from_vec(&[2, 3, 4], (0..24).map(f64::from).collect()).unwrap();
        assert_eq!(t.get(&[1, 2, 3]).unwrap(), 23.0);
        assert_eq!(t.get(&[1, 0, 2]).unwrap(), 14.0);
        assert!(t.get(&[2, 0, 0]).is_err());
    }

    #[test]
    fn matmul_small_cases() {
        let m = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(Tensor::identity(2).unwrap().matmul(&m).unwrap(), m);

        let a = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().data(), &[11.0]);

        assert!(matches!(a.matmul(&a), Err(Error::Shape(_))));
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = Rng::new(1);
        let a = Tensor::uniform(&mut rng, &[3, 4], -1.0, 1.0).unwrap();
        let b = Tensor::uniform(&mut rng, &[4, 2], -1.0, 1.0).unwrap();
        let fast = a.matmul(&b).unwrap();
        assert!(fast.max_abs_diff(&naive_matmul(&a, &b)).unwrap() < 1e-14);
    }

    #[test]
    fn transposed_products_agree_with_matmul() {
        let mut rng = Rng::new(2);
        let a = Tensor::uniform(&mut rng, &[3, 5], -1.0, 1.0).unwrap();
        let b = Tensor::uniform(&mut rng, &[4, 5], -1.0, 1.0).unwrap();
        let bt = transpose(&b);
        let d1 = a.matmul_transposed(&b).unwrap();
        let d2 = naive_matmul(&a, &bt);
        assert!(d1.max_abs_diff(&d2).unwrap() < 1e-14);

        let c = Tensor::uniform(&mut rng, &[3, 2], -1.0, 1.0).unwrap();
        let d3 = a.transposed_matmul(&c).unwrap();
        let d4 = naive_matmul(&transpose(&a), &c);
        assert!(d3.max_abs_diff(&d4).unwrap() < 1e-14);
    }

    fn transpose(t: &Tensor) -> Tensor {
        let (r, c) = (t.shape()[0], t.shape()[1]);
        let mut out = Tensor::zeros(&[c, r]).unwrap();
        for i in 0..r {
            for j in 0..c {
                out.set(&[j, i], t.get(&[i, j]).unwrap()).unwrap();
            }
        }
        out
    }

    #[test]
    fn hadamard_cases() {
        let a = Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::from_vec(&[2], vec![3.0, 4.0]).unwrap();
        assert_eq!(a.hadamard(&b).unwrap().data(), &[3.0, 8.0]);

        let ones = Tensor::filled(&[2], 1.0).unwrap();
        assert_eq!(a.hadamard(&ones).unwrap(), a);
        let zeros = Tensor::zeros(&[2]).unwrap();
        assert_eq!(a.hadamard(&zeros).unwrap(), zeros);

        let c = Tensor::zeros(&[3]).unwrap();
        assert!(matches!(a.hadamard(&c), Err(Error::Shape(_))));
    }

    #[test]
    fn uniform_draws() {
        let a = Tensor::uniform(&mut Rng::new(42), &[16], 0.0, 1.0).unwrap();
        let b = Tensor::uniform(&mut Rng::new(42), &[16], 0.0, 1.0).unwrap();
        assert_eq!(a, b);

        let big = Tensor::uniform(&mut Rng::new(7), &[10_000], 0.0, 1.0).unwrap();
        let mean = big.sum() / 10_000.0;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
        assert!(big.data().iter().all(|&x| (0.0..1.0).contains(&x)));

        assert!(matches!(
            Tensor::uniform(&mut Rng::new(1), &[2], 1.0, 1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn argmax_ties_go_low() {
        let t = Tensor::from_rows(&[vec![0.2, 0.7, 0.7], vec![0.5, 0.5, 0.1]]).unwrap();
        assert_eq!(t.argmax_rows().unwrap(), vec![1, 0]);
    }

    #[test]
    fn gather_and_concat() {
        let t = Tensor::from_vec(&[3, 2], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let g = t.gather(&[2, 0]).unwrap();
        assert_eq!(g.data(), &[4.0, 5.0, 0.0, 1.0]);
        let c = Tensor::concat(&[&g, &t]).unwrap();
        assert_eq!(c.shape(), &[5, 2]);
        assert!(t.gather(&[3]).is_err());
    }
}
