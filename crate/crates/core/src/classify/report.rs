//! Confusion matrices and run statistics.

use std::io::Write;

use serde::Serialize;

use crate::classify::ModelParams;
use crate::error::{Error, Result};

/// `counts[i][j]` is the number of class-`i` items predicted as class `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn zeros(n_classes: usize) -> Self {
        Self {
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn from_labels(truth: &[usize], pred: &[usize], n_classes: usize) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::LengthMismatch {
                left: truth.len(),
                right: pred.len(),
            });
        }
        let mut m = Self::zeros(n_classes);
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= n_classes || p >= n_classes {
                return Err(Error::Parameter(format!("class id out of range for {n_classes} classes")));
            }
            m.counts[t][p] += 1;
        }
        Ok(m)
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.n_classes() != self.n_classes() {
            return Err(Error::LengthMismatch {
                left: self.n_classes(),
                right: other.n_classes(),
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    /// Square CSV with a header of predicted class names and one row per true class.
    pub fn write_csv<W: Write>(&self, writer: W, class_names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(class_names.iter().cloned());
        w.write_record(&header)?;
        for (i, row) in self.counts.iter().enumerate() {
            let mut rec = vec![class_names.get(i).cloned().unwrap_or_else(|| i.to_string())];
            rec.extend(row.iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("writing confusion matrix", e))?;
        Ok(())
    }
}

/// Min / max / mean / population std of a list of scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl RunStats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("scores"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            min,
            max,
            // rounding can push the mean a hair outside [min, max]
            mean: mean.clamp(min, max),
            std: var.sqrt(),
        })
    }
}

/// Result of a nested cross-validation run.
#[derive(Debug, Clone)]
pub struct CvReport {
    pub fold_accuracies: Vec<f64>,
    pub chosen: Vec<ModelParams>,
    /// Inner validation score that selected each fold's parameters.
    pub inner_scores: Vec<f64>,
    pub confusion: ConfusionMatrix,
}

impl CvReport {
    pub fn stats(&self) -> Result<RunStats> {
        RunStats::from_values(&self.fold_accuracies)
    }

    /// Pooled accuracy over all holdout items.
    pub fn pooled_accuracy(&self) -> f64 {
        self.confusion.accuracy()
    }

    /// One row per outer fold.
    pub fn write_folds_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["fold", "accuracy", "inner_score", "params"])?;
        for (f, ((acc, score), p)) in self
            .fold_accuracies
            .iter()
            .zip(&self.inner_scores)
            .zip(&self.chosen)
            .enumerate()
        {
            w.write_record([f.to_string(), acc.to_string(), score.to_string(), p.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("writing fold report", e))?;
        Ok(())
    }
}
