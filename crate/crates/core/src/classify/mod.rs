//! Classifiers, hyperparameter grids and cross-validation.

pub mod cv;
pub mod knn;
pub mod report;
pub mod svm;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use cv::{derive_seed, grid_search_cv, kfold_splits, nested_cv, tune_and_score, GridSearchResult};
pub use knn::{KnnModel, KnnParams, Weighting};
pub use report::{ConfusionMatrix, CvReport, RunStats};
pub use svm::{Kernel, KernelKind, SvmModel, SvmParams};

use crate::error::{Error, Result};

/// Maps string labels to dense class ids `0..n`.
///
/// Classes are ordered numerically when every label parses as a number, and
/// lexicographically otherwise, so "2" < "10" for UCR-style integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelEncoder {
    classes: Vec<String>,
}

impl LabelEncoder {
    pub fn fit<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyInput("labels"));
        }
        let mut classes: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
        let numeric = classes.iter().all(|c| c.trim().parse::<f64>().is_ok());
        if numeric {
            classes.sort_by(|a, b| {
                let (x, y) = (a.trim().parse::<f64>().unwrap(), b.trim().parse::<f64>().unwrap());
                x.partial_cmp(&y).unwrap_or(Ordering::Equal).then_with(|| a.cmp(b))
            });
        } else {
            classes.sort();
        }
        classes.dedup();
        Ok(Self { classes })
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn encode_one(&self, label: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::Vocabulary(format!("unknown class label {label:?}")))
    }

    pub fn encode<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        labels.iter().map(|l| self.encode_one(l.as_ref())).collect()
    }

    pub fn decode(&self, id: usize) -> &str {
        &self.classes[id]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Knn,
    Svm,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Svm => "svm",
        }
    }
}

/// One hyperparameter configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    Knn(KnnParams),
    Svm(SvmParams),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Knn(_) => ModelKind::Knn,
            ModelParams::Svm(_) => ModelKind::Svm,
        }
    }

    pub fn fit(&self, rows: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<FittedModel> {
        Ok(match *self {
            ModelParams::Knn(p) => FittedModel::Knn(KnnModel::fit(rows, labels, n_classes, p)?),
            ModelParams::Svm(p) => FittedModel::Svm(SvmModel::fit(rows, labels, n_classes, p)?),
        })
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelParams::Knn(p) => {
                let w = match p.weights {
                    Weighting::Uniform => "uniform",
                    Weighting::Distance => "distance",
                };
                write!(f, "k={} weights={} p={}", p.k, w, p.p)
            }
            ModelParams::Svm(p) => match p.kernel {
                KernelKind::Linear => write!(f, "C={} kernel=linear", p.c),
                KernelKind::Rbf => write!(f, "C={} kernel=rbf", p.c),
                KernelKind::Poly => write!(f, "C={} kernel=poly degree={}", p.c, p.degree),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub enum FittedModel {
    Knn(KnnModel),
    Svm(SvmModel),
}

impl FittedModel {
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
        match self {
            FittedModel::Knn(m) => m.predict(rows),
            FittedModel::Svm(m) => m.predict(rows),
        }
    }
}

/// Fraction of positions where `pred` equals `truth`.
pub fn accuracy(truth: &[usize], pred: &[usize]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput("labels"));
    }
    let hits = truth.iter().zip(pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnGrid {
    pub k: Vec<usize>,
    pub weights: Vec<Weighting>,
    pub p: Vec<u8>,
}

impl Default for KnnGrid {
    fn default() -> Self {
        Self {
            k: vec![1, 2, 4, 6, 8, 10],
            weights: vec![Weighting::Uniform, Weighting::Distance],
            p: vec![1, 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmGrid {
    pub c: Vec<f64>,
    pub kernels: Vec<KernelKind>,
    pub degree: u32,
}

impl Default for SvmGrid {
    fn default() -> Self {
        Self {
            c: vec![0.1, 1.0, 10.0],
            kernels: vec![KernelKind::Linear, KernelKind::Rbf, KernelKind::Poly],
            degree: 2,
        }
    }
}

/// Hyperparameter search space for both model families.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperGrid {
    pub knn: KnnGrid,
    pub svm: SvmGrid,
}

impl HyperGrid {
    /// Grid points for `kind` in tie-breaking order: smaller k first, then
    /// uniform before distance, then p; smaller C first, then kernels
    /// linear, rbf, poly.
    pub fn points(&self, kind: ModelKind) -> Result<Vec<ModelParams>> {
        let mut out = Vec::new();
        match kind {
            ModelKind::Knn => {
                let mut k = self.knn.k.clone();
                k.sort_unstable();
                k.dedup();
                let mut weights = self.knn.weights.clone();
                weights.sort_by_key(|w| *w as u8);
                weights.dedup();
                let mut ps = self.knn.p.clone();
                ps.sort_unstable();
                ps.dedup();
                for &k in &k {
                    for &w in &weights {
                        for &p in &ps {
                            out.push(ModelParams::Knn(KnnParams::new(k, w, p)?));
                        }
                    }
                }
            }
            ModelKind::Svm => {
                let mut cs = self.svm.c.clone();
                cs.sort_by(f64::total_cmp);
                cs.dedup();
                let mut kernels = self.svm.kernels.clone();
                kernels.sort_by_key(|k| *k as u8);
                kernels.dedup();
                for &c in &cs {
                    for &kernel in &kernels {
                        let mut p = SvmParams::new(c, kernel);
                        p.degree = self.svm.degree;
                        out.push(ModelParams::Svm(p));
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(Error::Config(format!("empty {} hyperparameter grid", kind.name())));
        }
        Ok(out)
    }
}
