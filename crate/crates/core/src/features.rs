//! GeoStat feature assembly: windowed summaries of geometric distributions,
//! z-normalization and ablation masks.
//!
//! Columns are laid out distribution-major, then window, then statistic, so a
//! column index is `(dist * W + window) * S + stat`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::build_stack;
use crate::series::{resample_to_count, UniformSeries, MIN_UNIFORM_SAMPLES};
use crate::stats::{frechet_mean_variance, moments, summarize, LatLon, SummaryConfig};

pub const POSITION: &str = "position";
pub const VELOCITY: &str = "velocity";
pub const ACCELERATION: &str = "acceleration";
pub const CURVATURE: &str = "curvature";
pub const SIGNED_CURVATURE: &str = "signed_curvature";
pub const SPEED: &str = "speed";
pub const SPEED_DERIV: &str = "speed_deriv";

pub const UNIVARIATE_DISTRIBUTIONS: [&str; 5] =
    [POSITION, VELOCITY, ACCELERATION, CURVATURE, SIGNED_CURVATURE];

/// Mean radius of the earth in nautical miles.
pub const EARTH_RADIUS_NMI: f64 = 3440.065;

/// How positions of a multivariate series are summarized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionSpace {
    /// Channels are (latitude, longitude) in degrees.
    #[default]
    Spherical,
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoStatConfig {
    pub min_samples: usize,
    pub smoothing_iterations: usize,
    pub num_windows: usize,
    pub summary: SummaryConfig,
    #[serde(default)]
    pub position_space: PositionSpace,
}

impl GeoStatConfig {
    pub fn univariate(smoothing_iterations: usize, num_windows: usize) -> Self {
        Self {
            min_samples: 500,
            smoothing_iterations,
            num_windows,
            summary: SummaryConfig::univariate(),
            position_space: PositionSpace::Spherical,
        }
    }

    pub fn multivariate(smoothing_iterations: usize, num_windows: usize) -> Self {
        Self {
            summary: SummaryConfig::multivariate(),
            ..Self::univariate(smoothing_iterations, num_windows)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_windows == 0 {
            return Err(Error::Parameter("num_windows must be at least 1".into()));
        }
        if self.min_samples < MIN_UNIFORM_SAMPLES {
            return Err(Error::Parameter(format!(
                "min_samples must be at least {MIN_UNIFORM_SAMPLES}"
            )));
        }
        self.summary.validate()
    }
}

/// Identifies one feature column.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColumnLabel {
    pub distribution: String,
    pub window: usize,
    pub statistic: String,
}

impl ColumnLabel {
    pub fn new(distribution: &str, window: usize, statistic: &str) -> Self {
        Self {
            distribution: distribution.to_string(),
            window,
            statistic: statistic.to_string(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let mut parts = s.splitn(3, '.');
        let distribution = parts.next()?;
        let window = parts.next()?.parse().ok()?;
        let statistic = parts.next()?;
        Some(Self::new(distribution, window, statistic))
    }
}

impl fmt::Display for ColumnLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.distribution, self.window, self.statistic)
    }
}

/// One feature row per series plus its class label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<ColumnLabel>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<ColumnLabel>, rows: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: labels.len(),
            });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != columns.len()) {
            return Err(Error::Schema(format!(
                "row has {} values, expected {}",
                r.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = columns.iter().find(|c| !seen.insert(*c)) {
            return Err(Error::Schema(format!("duplicate column {dup}")));
        }
        Ok(Self {
            columns,
            rows,
            labels,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    /// Number of windows present in the column labels.
    pub fn n_windows(&self) -> usize {
        self.columns.iter().map(|c| c.window + 1).max().unwrap_or(0)
    }

    pub fn select_columns(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            columns: idx.iter().map(|&i| self.columns[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&i| r[i]).collect())
                .collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            columns: self.columns.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }

    /// Appends the rows of `other`, which must share the column schema.
    pub fn concat(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.columns != other.columns {
            return Err(Error::Schema("column labels differ".into()));
        }
        let mut out = self.clone();
        out.rows.extend(other.rows.iter().cloned());
        out.labels.extend(other.labels.iter().cloned());
        Ok(out)
    }

    /// Columns belonging to window `w` only.
    pub fn select_window(&self, w: usize) -> Result<FeatureMatrix> {
        let idx: Vec<usize> = (0..self.n_cols())
            .filter(|&i| self.columns[i].window == w)
            .collect();
        if idx.is_empty() {
            return Err(Error::Parameter(format!("no columns for window {w}")));
        }
        Ok(self.select_columns(&idx))
    }

    /// Header of `distribution.window.statistic` labels and a trailing
    /// `label` column, one line per row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = self.columns.iter().map(|c| c.to_string()).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (row, label) in self.rows.iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            rec.push(label.clone());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("writing feature csv", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<FeatureMatrix> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let n = header.len();
        if n == 0 || &header[n - 1] != "label" {
            return Err(Error::Schema("last column must be `label`".into()));
        }
        let columns = header
            .iter()
            .take(n - 1)
            .map(|h| {
                ColumnLabel::parse(h).ok_or_else(|| Error::Schema(format!("bad column label {h}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .take(n - 1)
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| {
                        Error::Schema(format!("row {}: bad value {v:?}", line + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
            labels.push(rec[n - 1].to_string());
        }
        FeatureMatrix::new(columns, rows, labels)
    }
}

/// Splits `n` samples into `w` consecutive windows; the first `n % w`
/// windows receive one extra sample.
pub fn window_bounds(n: usize, w: usize) -> Vec<Range<usize>> {
    let (base, extra) = (n / w, n % w);
    let mut start = 0;
    (0..w)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

fn checked_windows(n: usize, w: usize, min: usize) -> Result<Vec<Range<usize>>> {
    let bounds = window_bounds(n, w);
    if let Some((i, r)) = bounds.iter().enumerate().find(|(_, r)| r.len() < min) {
        return Err(Error::WindowTooSmall {
            window: i,
            len: r.len(),
            min,
        });
    }
    Ok(bounds)
}

pub fn univariate_columns(cfg: &GeoStatConfig) -> Vec<ColumnLabel> {
    let stats = cfg.summary.stat_names();
    let mut cols = Vec::new();
    for dist in UNIVARIATE_DISTRIBUTIONS {
        for w in 0..cfg.num_windows {
            cols.extend(stats.iter().map(|s| ColumnLabel::new(dist, w, s)));
        }
    }
    cols
}

fn upsampled(us: &UniformSeries, min_samples: usize) -> Result<UniformSeries> {
    if us.len() >= min_samples {
        Ok(us.clone())
    } else {
        resample_to_count(&us.to_time_series(), min_samples)
    }
}

fn push_windowed(
    out: &mut Vec<f64>,
    samples: &[f64],
    bounds: &[Range<usize>],
    cfg: &SummaryConfig,
) -> Result<()> {
    for r in bounds {
        out.extend(summarize(&samples[r.clone()], cfg)?.into_vec());
    }
    Ok(())
}

/// Feature row of a univariate series in [`univariate_columns`] order.
pub fn extract_univariate(us: &UniformSeries, cfg: &GeoStatConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if us.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: us.dim(),
        });
    }
    let us = upsampled(us, cfg.min_samples)?;
    let bounds = checked_windows(us.len(), cfg.num_windows, MIN_UNIFORM_SAMPLES)?;
    let stack = build_stack(&us, cfg.smoothing_iterations)?;
    let signed = stack
        .signed_curvature
        .as_deref()
        .expect("univariate stack carries signed curvature");
    let dists: [&[f64]; 5] = [
        stack.base.values(),
        stack.first_deriv.values(),
        stack.second_deriv.values(),
        &stack.curvature,
        signed,
    ];
    let mut row = Vec::with_capacity(5 * cfg.num_windows * cfg.summary.len());
    for d in dists {
        push_windowed(&mut row, d, &bounds, &cfg.summary)?;
    }
    Ok(row)
}

/// Extracts every series in parallel; rows keep input order.
pub fn extract_univariate_matrix(
    series: &[UniformSeries],
    labels: &[String],
    cfg: &GeoStatConfig,
) -> Result<FeatureMatrix> {
    let rows = series
        .par_iter()
        .map(|us| extract_univariate(us, cfg))
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::new(univariate_columns(cfg), rows, labels.to_vec())
}

/// Position statistic names for a multivariate series of dimension `dim`.
pub fn position_stat_names(space: PositionSpace, dim: usize) -> Vec<String> {
    match space {
        PositionSpace::Spherical => vec!["frechet_lat".into(), "frechet_lon".into(), "frechet_var".into()],
        PositionSpace::Euclidean => (0..dim)
            .map(|c| format!("mean_{c}"))
            .chain(std::iter::once("frechet_var".to_string()))
            .collect(),
    }
}

pub fn multivariate_columns(cfg: &GeoStatConfig, dim: usize, extra_names: &[&str]) -> Vec<ColumnLabel> {
    let stats = cfg.summary.stat_names();
    let mut cols = Vec::new();
    let pos = position_stat_names(cfg.position_space, dim);
    for w in 0..cfg.num_windows {
        cols.extend(pos.iter().map(|s| ColumnLabel::new(POSITION, w, s)));
    }
    for dist in [SPEED, SPEED_DERIV].iter().chain(extra_names) {
        for w in 0..cfg.num_windows {
            cols.extend(stats.iter().map(|s| ColumnLabel::new(dist, w, s)));
        }
    }
    cols
}

/// Local equirectangular projection of (lat, lon) degrees to nautical miles
/// east/north of the first point. Longitude differences are unwrapped.
pub fn local_projection(lat_lon_deg: &[(f64, f64)]) -> Vec<f64> {
    let Some(&(lat0, lon0)) = lat_lon_deg.first() else {
        return Vec::new();
    };
    let coslat = lat0.to_radians().cos();
    let mut out = Vec::with_capacity(lat_lon_deg.len() * 2);
    for &(lat, lon) in lat_lon_deg {
        let mut dlon = lon - lon0;
        dlon -= 360.0 * ((dlon + 180.0) / 360.0).floor();
        out.push(EARTH_RADIUS_NMI * dlon.to_radians() * coslat);
        out.push(EARTH_RADIUS_NMI * (lat - lat0).to_radians());
    }
    out
}

/// Fréchet mean (degrees) and variance of spherical positions given in
/// degrees.
pub fn spherical_position_stats(lat_lon_deg: &[(f64, f64)]) -> Result<[f64; 3]> {
    let pts: Vec<LatLon> = lat_lon_deg
        .iter()
        .map(|&(a, b)| LatLon::from_degrees(a, b))
        .collect();
    let (m, var) = frechet_mean_variance(&pts)?;
    Ok([m.lat.to_degrees(), m.lon.to_degrees(), var])
}

/// Coordinate means followed by the sum of squared distances to the mean.
pub fn euclidean_position_stats(values: &[f64], dim: usize) -> Result<Vec<f64>> {
    let n = values.len() / dim;
    if n == 0 {
        return Err(Error::EmptyDistribution);
    }
    let mut mean = vec![0.0; dim];
    for p in values.chunks_exact(dim) {
        for c in 0..dim {
            mean[c] += p[c];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let var = values
        .chunks_exact(dim)
        .map(|p| p.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    mean.push(var);
    Ok(mean)
}

/// Feature row of a multivariate series in [`multivariate_columns`] order.
///
/// Geometry is computed on the series as given (after a local projection to
/// nautical miles for spherical positions). Each extra distribution is cut
/// into `num_windows` windows proportionally to its own length.
pub fn extract_multivariate(
    us: &UniformSeries,
    cfg: &GeoStatConfig,
    extra_distributions: &[(String, Vec<f64>)],
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if us.dim() < 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: us.dim(),
        });
    }
    if cfg.position_space == PositionSpace::Spherical && us.dim() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: us.dim(),
        });
    }
    let us = upsampled(us, cfg.min_samples)?;
    let bounds = checked_windows(us.len(), cfg.num_windows, MIN_UNIFORM_SAMPLES)?;

    let mut row = Vec::new();
    let geometry_input = match cfg.position_space {
        PositionSpace::Spherical => {
            let ll: Vec<(f64, f64)> = (0..us.len()).map(|k| (us.point(k)[0], us.point(k)[1])).collect();
            for r in &bounds {
                row.extend(spherical_position_stats(&ll[r.clone()])?);
            }
            us.with_values(local_projection(&ll))
        }
        PositionSpace::Euclidean => {
            let d = us.dim();
            for r in &bounds {
                row.extend(euclidean_position_stats(&us.values()[r.start * d..r.end * d], d)?);
            }
            us.clone()
        }
    };
    let stack = build_stack(&geometry_input, cfg.smoothing_iterations)?;
    push_windowed(&mut row, &stack.speed, &bounds, &cfg.summary)?;
    push_windowed(&mut row, &stack.speed_deriv, &bounds, &cfg.summary)?;
    for (name, samples) in extra_distributions {
        if name.contains('.') {
            return Err(Error::Parameter(format!("distribution name {name:?} contains '.'")));
        }
        let b = checked_windows(samples.len(), cfg.num_windows, 1)?;
        push_windowed(&mut row, samples, &b, &cfg.summary)?;
    }
    Ok(row)
}

/// Column-wise standardization parameters fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ZParams {
    pub means: Vec<f64>,
    /// Zero marks a constant column, which maps to 0.
    pub stds: Vec<f64>,
}

impl ZParams {
    pub fn fit(train: &FeatureMatrix) -> Result<Self> {
        if train.n_rows() == 0 {
            return Err(Error::EmptyInput("training matrix"));
        }
        let mut means = Vec::with_capacity(train.n_cols());
        let mut stds = Vec::with_capacity(train.n_cols());
        let mut col = vec![0.0; train.n_rows()];
        for c in 0..train.n_cols() {
            for (dst, row) in col.iter_mut().zip(&train.rows) {
                *dst = row[c];
            }
            let m = moments(&col)?;
            means.push(m.mean);
            stds.push(m.std);
        }
        Ok(Self { means, stds })
    }

    pub fn apply(&self, fm: &FeatureMatrix) -> Result<FeatureMatrix> {
        if fm.n_cols() != self.means.len() {
            return Err(Error::Schema(format!(
                "matrix has {} columns, normalization expects {}",
                fm.n_cols(),
                self.means.len()
            )));
        }
        let rows = fm
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .zip(self.means.iter().zip(&self.stds))
                    .map(|(&v, (&m, &s))| if s > 0.0 { (v - m) / s } else { 0.0 })
                    .collect()
            })
            .collect();
        Ok(FeatureMatrix {
            columns: fm.columns.clone(),
            rows,
            labels: fm.labels.clone(),
        })
    }
}

/// Standardizes `train` with its own column statistics and applies the same
/// transform to every matrix in `others`.
pub fn z_normalize(
    train: &FeatureMatrix,
    others: &[&FeatureMatrix],
) -> Result<(FeatureMatrix, Vec<FeatureMatrix>, ZParams)> {
    let params = ZParams::fit(train)?;
    let t = params.apply(train)?;
    let o = others
        .iter()
        .map(|m| params.apply(m))
        .collect::<Result<Vec<_>>>()?;
    Ok((t, o, params))
}

pub const LOW_QUANTILES: &str = "low_quantiles";
pub const MID_QUANTILES: &str = "mid_quantiles";
pub const HIGH_QUANTILES: &str = "high_quantiles";

/// Distributions and statistics to drop from a feature matrix.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AblationMask {
    pub removed_distributions: BTreeSet<String>,
    pub removed_statistics: BTreeSet<String>,
}

fn normalize_group(name: &str) -> String {
    name.trim().replace([' ', '-'], "_")
}

fn quantile_stats(fm: &FeatureMatrix) -> Vec<String> {
    let mut seen = Vec::<String>::new();
    for c in &fm.columns {
        let is_q = c.statistic.strip_prefix('q').is_some_and(|r| r.parse::<f64>().is_ok());
        if is_q && !seen.contains(&c.statistic) {
            seen.push(c.statistic.clone());
        }
    }
    seen
}

/// Lowest four, middle three and highest four quantile statistics.
fn quantile_group(fm: &FeatureMatrix, group: &str) -> Option<Vec<String>> {
    let qs = quantile_stats(fm);
    let n = qs.len();
    let range = match group {
        LOW_QUANTILES => 0..4.min(n),
        HIGH_QUANTILES => n.saturating_sub(4)..n,
        MID_QUANTILES => {
            let start = n.saturating_sub(3) / 2;
            start..(start + 3).min(n)
        }
        _ => return None,
    };
    Some(qs[range].to_vec())
}

impl AblationMask {
    pub fn is_empty(&self) -> bool {
        self.removed_distributions.is_empty() && self.removed_statistics.is_empty()
    }

    /// Sorts each name into a distribution or a statistic (or quantile
    /// group) using the vocabulary of `fm`.
    pub fn from_names<S: AsRef<str>>(names: &[S], fm: &FeatureMatrix) -> Result<Self> {
        let mut mask = AblationMask::default();
        for raw in names {
            let name = normalize_group(raw.as_ref());
            if name.is_empty() {
                continue;
            }
            if fm.columns.iter().any(|c| c.distribution == name) {
                mask.removed_distributions.insert(name);
            } else if fm.columns.iter().any(|c| c.statistic == name)
                || quantile_group(fm, &name).is_some()
            {
                mask.removed_statistics.insert(name);
            } else {
                return Err(Error::Vocabulary(raw.as_ref().to_string()));
            }
        }
        Ok(mask)
    }
}

/// Drops every column whose distribution or statistic the mask names.
pub fn apply_mask(fm: &FeatureMatrix, mask: &AblationMask) -> Result<FeatureMatrix> {
    for d in &mask.removed_distributions {
        if !fm.columns.iter().any(|c| &c.distribution == d) {
            return Err(Error::Vocabulary(d.clone()));
        }
    }
    let mut stats = BTreeSet::new();
    for s in &mask.removed_statistics {
        if let Some(group) = quantile_group(fm, s) {
            stats.extend(group);
        } else if fm.columns.iter().any(|c| &c.statistic == s) {
            stats.insert(s.clone());
        } else {
            return Err(Error::Vocabulary(s.clone()));
        }
    }
    let keep: Vec<usize> = (0..fm.n_cols())
        .filter(|&i| {
            let c = &fm.columns[i];
            !mask.removed_distributions.contains(&c.distribution) && !stats.contains(&c.statistic)
        })
        .collect();
    Ok(fm.select_columns(&keep))
}
