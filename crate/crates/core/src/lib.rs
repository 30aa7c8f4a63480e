//! GeoStat representations of time series: fixed-length feature vectors
//! built from summary statistics of differential-geometric quantities, with
//! KNN/SVM classifiers, cross-validation harnesses, a 1NN-DTW baseline and
//! loaders for UCR-style archives and vessel tracks.

pub mod error;
pub mod classify;
pub mod cli;
pub mod dtw;
pub mod features;
pub mod geometry;
pub mod ingest;
pub mod series;
pub mod stats;

pub use error::{Error, Result};
