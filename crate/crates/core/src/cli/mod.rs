//! Command-line front end.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{DatasetFormat, ModelName, RunConfig};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "geostat", version, about = "Geometric-statistics features and classifiers for time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub args: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write one feature CSV per (windows, smoothings) cell and split.
    Extract,
    /// Tune on train by k-fold CV, score the test split, repeat.
    Evaluate,
    /// Repeated nested cross-validation on pooled features.
    Nested,
    /// Percent change in accuracy when feature groups are removed.
    Ablate,
    /// Accuracy of each window's features on their own.
    Windows,
    /// 1-nearest-neighbour DTW baseline.
    Dtw,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dataset directory or file.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<DatasetFormat>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Smoothing iteration counts, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub smoothings: Option<Vec<usize>>,
    /// Window counts, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub windows: Option<Vec<usize>>,
    /// Models among knn, svm, dtw, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub repetitions: Option<usize>,
    /// Feature mask, e.g. `position` or `low_quantiles,kurtosis`; repeatable.
    #[arg(long, global = true)]
    pub mask: Vec<String>,
    /// JSON map from class label to binary label.
    #[arg(long = "class-map", global = true)]
    pub class_map: Option<PathBuf>,
    /// Also run the binary task defined by the class map.
    #[arg(long, global = true)]
    pub binary: bool,
    /// DTW band as a fraction of series length, or `none`.
    #[arg(long, global = true)]
    pub band: Option<String>,
    /// Folds of the hyperparameter search.
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    #[arg(long = "outer-folds", global = true)]
    pub outer_folds: Option<usize>,
    #[arg(long = "inner-folds", global = true)]
    pub inner_folds: Option<usize>,
    /// Minimum number of uniform samples per series.
    #[arg(long = "min-samples", global = true)]
    pub min_samples: Option<usize>,
    /// `id,label` CSV for vessel tracks.
    #[arg(long, global = true)]
    pub labels: Option<PathBuf>,
}

impl CommonArgs {
    /// Config file (or defaults) with every given flag applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.dataset {
            cfg.dataset = Some(v.clone());
        }
        if let Some(v) = self.format {
            cfg.format = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.jobs {
            cfg.jobs = Some(v);
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = &self.smoothings {
            cfg.smoothings = v.clone();
        }
        if let Some(v) = &self.windows {
            cfg.windows = v.clone();
        }
        if let Some(v) = &self.models {
            cfg.models = v.iter().map(|s| ModelName::parse(s)).collect::<Result<_>>()?;
        }
        if let Some(v) = self.repetitions {
            cfg.repetitions = v;
        }
        if !self.mask.is_empty() {
            cfg.masks = self
                .mask
                .iter()
                .map(|m| m.split(',').map(|s| s.trim().to_string()).collect())
                .collect();
        }
        if let Some(v) = &self.class_map {
            cfg.class_map = Some(v.clone());
        }
        if self.binary {
            cfg.binary = true;
        }
        if let Some(b) = &self.band {
            cfg.dtw_window = if b.eq_ignore_ascii_case("none") {
                None
            } else {
                Some(b.parse().map_err(|_| Error::Config(format!("invalid band {b:?}")))?)
            };
        }
        if let Some(v) = self.folds {
            cfg.folds = v;
        }
        if let Some(v) = self.outer_folds {
            cfg.outer_folds = v;
        }
        if let Some(v) = self.inner_folds {
            cfg.inner_folds = v;
        }
        if let Some(v) = self.min_samples {
            cfg.min_samples = v;
        }
        if let Some(v) = &self.labels {
            cfg.vessel.labels_file = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = cli.args.resolve()?;
    let work = || match cli.command {
        Command::Extract => commands::extract(&cfg),
        Command::Evaluate => commands::evaluate(&cfg),
        Command::Nested => commands::nested(&cfg),
        Command::Ablate => commands::ablate(&cfg),
        Command::Windows => commands::windows(&cfg),
        Command::Dtw => commands::dtw(&cfg),
    };
    match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    execute(&cli)
}
