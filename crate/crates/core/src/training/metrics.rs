use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of positions where `predictions` and `labels` agree.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "accuracy needs equal non-empty inputs, got {} predictions and {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; num_classes]; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn record(&mut self, label: usize, prediction: usize) -> Result<()> {
        let n = self.num_classes();
        if label >= n || prediction >= n {
            return Err(Error::InvalidArgument(format!(
                "class pair ({label}, {prediction}) out of range for {n} classes"
            )));
        }
        self.counts[label][prediction] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            total => self.trace() as f64 / total as f64,
        }
    }
}

pub fn confusion(
    predictions: &[usize],
    labels: &[usize],
    num_classes: usize,
) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidArgument(
            "predictions and labels differ in length".into(),
        ));
    }
    let mut cm = ConfusionMatrix::new(num_classes);
    for (&p, &l) in predictions.iter().zip(labels) {
        cm.record(l, p)?;
    }
    Ok(cm)
}

/// JSON document `{"classes": [...], "counts": [[...]], "accuracy": r}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub accuracy: f64,
}

impl ConfusionReport {
    pub fn new(classes: &[String], cm: &ConfusionMatrix) -> Self {
        ConfusionReport {
            classes: classes.to_vec(),
            counts: cm.counts.clone(),
            accuracy: cm.accuracy(),
        }
    }
}

/// One row of the per-epoch learning curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub wall_seconds: f64,
}

pub const METRICS_CSV_HEADER: &str = "epoch,train_loss,train_acc,test_loss,test_acc,seconds";

impl EpochMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.9},{:.6},{:.9},{:.6},{:.3}",
            self.epoch,
            self.train_loss,
            self.train_accuracy,
            self.test_loss,
            self.test_accuracy,
            self.wall_seconds
        )
    }
}
