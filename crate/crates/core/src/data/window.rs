//! Fixed-length windowing and labeled window sets.

use crate::data::SignalMatrix;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Cuts a recording into consecutive non-overlapping windows of `len` rows,
/// giving `[rows / len, len, cols]`. Trailing rows that do not fill a window
/// are dropped.
pub fn window(signal: &SignalMatrix, len: usize) -> Result<Tensor> {
    if len == 0 {
        return Err(Error::InvalidArgument(
            "window length must be positive".into(),
        ));
    }
    let count = signal.rows() / len;
    if count == 0 {
        return Err(Error::Shape(format!(
            "recording has {} rows, fewer than the window length {len}",
            signal.rows()
        )));
    }
    let used = count * len * signal.cols();
    Tensor::from_vec(&[count, len, signal.cols()], signal.data()[..used].to_vec())
}

/// `N` labeled windows of shape `[T, C]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    samples: Tensor,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl WindowSet {
    pub fn new(samples: Tensor, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if samples.rank() != 3 {
            return Err(Error::Shape(format!(
                "window samples must be [N, T, C], got {:?}",
                samples.shape()
            )));
        }
        if samples.shape()[0] != labels.len() {
            return Err(Error::Shape(format!(
                "{} samples but {} labels",
                samples.shape()[0],
                labels.len()
            )));
        }
        if class_names.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one class is required".into(),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        Ok(WindowSet {
            samples,
            labels,
            class_names,
        })
    }

    pub fn samples(&self) -> &Tensor {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.samples.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.samples.shape()[2]
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Samples and labels at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<WindowSet> {
        let samples = self.samples.gather(indices)?;
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        WindowSet::new(samples, labels, self.class_names.clone())
    }

    /// Windows belonging to one class, as `[n, T, C]`.
    pub fn class_samples(&self, class: usize) -> Result<Tensor> {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.labels[i] == class)
            .collect();
        self.samples.gather(&idx)
    }
}

/// Concatenates per-class window tensors, labeling the `i`-th entry with
/// class `i`.
pub fn assemble(classes: Vec<(String, Tensor)>) -> Result<WindowSet> {
    let first = classes
        .first()
        .ok_or_else(|| Error::InvalidArgument("no classes to assemble".into()))?;
    let tail = first.1.shape().get(1..).unwrap_or_default().to_vec();
    let mut labels = Vec::new();
    for (label, (name, t)) in classes.iter().enumerate() {
        if t.rank() != 3 || t.shape()[1..] != tail[..] {
            return Err(Error::Shape(format!(
                "class {name:?} has windows {:?}, expected [_, {}, {}]",
                t.shape(),
                tail.first().copied().unwrap_or(0),
                tail.get(1).copied().unwrap_or(0)
            )));
        }
        labels.extend(std::iter::repeat_n(label, t.shape()[0]));
    }
    let parts: Vec<&Tensor> = classes.iter().map(|(_, t)| t).collect();
    let samples = Tensor::concat(&parts)?;
    let names = classes.into_iter().map(|(n, _)| n).collect();
    WindowSet::new(samples, labels, names)
}

/// `[N, num_classes]` with a single 1.0 per row.
pub fn one_hot(labels: &[usize], num_classes: usize) -> Result<Tensor> {
    let mut t = Tensor::zeros(&[labels.len(), num_classes])?;
    for (i, &l) in labels.iter().enumerate() {
        if l >= num_classes {
            return Err(Error::InvalidArgument(format!(
                "label {l} out of range for {num_classes} classes"
            )));
        }
        t.data_mut()[i * num_classes + l] = 1.0;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(rows: usize, cols: usize) -> SignalMatrix {
        let data = (0..rows * cols).map(|v| v as f64).collect();
        SignalMatrix::new(rows, cols, data, 1.0).unwrap()
    }

    #[test]
    fn floor_rule() {
        let w = window(&ramp(10, 1), 4).unwrap();
        assert_eq!(w.shape(), &[2, 4, 1]);
        assert_eq!(w.data(), &[0., 1., 2., 3., 4., 5., 6., 7.]);
        assert!(window(&ramp(3, 2), 4).is_err());
    }

    #[test]
    fn assemble_labels_in_order() {
        let a = window(&ramp(8, 2), 2).unwrap();
        let b = window(&ramp(4, 2), 2).unwrap();
        let ws = assemble(vec![("a".into(), a), ("b".into(), b)]).unwrap();
        assert_eq!(ws.labels(), &[0, 0, 0, 0, 1, 1]);
        assert_eq!(ws.class_counts(), vec![4, 2]);

        let single = assemble(vec![("only".into(), window(&ramp(6, 1), 3).unwrap())]).unwrap();
        assert!(single.labels().iter().all(|&l| l == 0));

        let bad = window(&ramp(6, 3), 3).unwrap();
        let a = window(&ramp(8, 2), 2).unwrap();
        assert!(assemble(vec![("a".into(), a), ("bad".into(), bad)]).is_err());
    }

    #[test]
    fn one_hot_rows() {
        let t = one_hot(&[2], 4).unwrap();
        assert_eq!(t.data(), &[0.0, 0.0, 1.0, 0.0]);
        let labels = [0, 3, 1, 1, 2];
        let t = one_hot(&labels, 4).unwrap();
        for r in 0..labels.len() {
            assert_eq!(t.data()[r * 4..(r + 1) * 4].iter().sum::<f64>(), 1.0);
        }
        assert_eq!(t.argmax_rows().unwrap(), labels);
        assert!(one_hot(&[4], 4).is_err());
    }
}
