//! Experiment manifest: a JSON file whose every field can be overridden on
//! the command line.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::classify::{HyperGrid, ModelKind};
use crate::error::{Error, Result};
use crate::ingest::vessel::{ColumnMap, SegmentParams, VesselFeatureConfig, DEFAULT_EXCLUDED_LABELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    /// Directory with `<name>_TRAIN` / `<name>_TEST` files.
    #[default]
    Ucr,
    /// Vessel track CSV file or directory of CSVs.
    Vessel,
    /// Previously extracted feature CSV.
    Features,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Knn,
    Svm,
    Dtw,
}

impl ModelName {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "knn" => Ok(ModelName::Knn),
            "svm" => Ok(ModelName::Svm),
            "dtw" => Ok(ModelName::Dtw),
            other => Err(Error::Config(format!("unknown model {other:?} (expected knn, svm or dtw)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelName::Knn => "knn",
            ModelName::Svm => "svm",
            ModelName::Dtw => "dtw",
        }
    }

    /// Feature-based classifier family, `None` for the DTW baseline.
    pub fn kind(self) -> Option<ModelKind> {
        match self {
            ModelName::Knn => Some(ModelKind::Knn),
            ModelName::Svm => Some(ModelKind::Svm),
            ModelName::Dtw => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VesselOptions {
    pub columns: ColumnMap,
    /// Optional `id,label` CSV overriding labels in the track files.
    pub labels_file: Option<PathBuf>,
    pub segment: SegmentParams,
    pub features: VesselFeatureConfig,
    pub excluded_labels: Vec<String>,
}

impl Default for VesselOptions {
    fn default() -> Self {
        Self {
            columns: ColumnMap::default(),
            labels_file: None,
            segment: SegmentParams::default(),
            features: VesselFeatureConfig::default(),
            excluded_labels: DEFAULT_EXCLUDED_LABELS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub format: DatasetFormat,
    pub smoothings: Vec<usize>,
    pub windows: Vec<usize>,
    pub models: Vec<ModelName>,
    pub seed: u64,
    pub repetitions: usize,
    pub out: PathBuf,
    /// Worker threads; `None` lets rayon decide.
    pub jobs: Option<usize>,
    pub min_samples: usize,
    /// Folds of the hyperparameter search in `evaluate`, `ablate`, `windows`.
    pub folds: usize,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub grid: HyperGrid,
    /// Each mask is a list of distribution, statistic or quantile-group names.
    pub masks: Vec<Vec<String>>,
    pub class_map: Option<PathBuf>,
    pub binary: bool,
    /// DTW band as a fraction of series length; `None` is unconstrained.
    pub dtw_window: Option<f64>,
    pub vessel: VesselOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            format: DatasetFormat::Ucr,
            smoothings: vec![0, 1, 2],
            windows: vec![1, 2, 4, 6],
            models: vec![ModelName::Knn, ModelName::Svm],
            seed: 0,
            repetitions: 5,
            out: PathBuf::from("out"),
            jobs: None,
            min_samples: 500,
            folds: 10,
            outer_folds: 10,
            inner_folds: 10,
            grid: HyperGrid::default(),
            masks: Vec::new(),
            class_map: None,
            binary: false,
            dtw_window: None,
            vessel: VesselOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.smoothings.is_empty() || self.windows.is_empty() {
            return Err(Error::Config("smoothing/window grid is empty".into()));
        }
        if self.windows.contains(&0) {
            return Err(Error::Config("window counts must be positive".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("no models selected".into()));
        }
        if self.folds < 2 || self.outer_folds < 2 || self.inner_folds < 2 {
            return Err(Error::Config("fold counts must be at least 2".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if self.binary && self.class_map.is_none() {
            return Err(Error::Config("binary task requested without a class map".into()));
        }
        if let Some(w) = self.dtw_window {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Config(format!("dtw window {w} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn dataset(&self) -> Result<&Path> {
        self.dataset
            .as_deref()
            .ok_or_else(|| Error::Config("no dataset given (use --dataset or the config file)".into()))
    }

    /// Grid cells as (windows, smoothings) in canonical order.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        let mut w = self.windows.clone();
        w.sort_unstable();
        w.dedup();
        let mut s = self.smoothings.clone();
        s.sort_unstable();
        s.dedup();
        let mut cells = Vec::new();
        for &s in &s {
            for &w in &w {
                cells.push((w, s));
            }
        }
        cells
    }

    /// Feature classifiers in canonical order (knn before svm).
    pub fn feature_models(&self) -> Vec<ModelName> {
        let mut m: Vec<ModelName> = self.models.iter().copied().filter(|m| m.kind().is_some()).collect();
        m.sort_by_key(|m| *m as u8);
        m.dedup();
        m
    }
}
