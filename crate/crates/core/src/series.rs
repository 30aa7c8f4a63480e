//! Time-series containers, linear resampling, Laplacian smoothing and
//! length equalization.
//!
//! Values are stored row-major: sample `k` of a `d`-dimensional series
//! occupies `values[k * d..(k + 1) * d]`.

use crate::error::{Error, Result};

/// Minimum number of samples for which central second differences exist.
pub const MIN_UNIFORM_SAMPLES: usize = 3;

/// A possibly non-uniformly sampled `d`-dimensional series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    timestamps: Vec<f64>,
    values: Vec<f64>,
    dim: usize,
}

impl TimeSeries {
    /// Builds a series from timestamps and row-major values.
    pub fn new(timestamps: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSeries("dimension must be at least 1".into()));
        }
        if timestamps.is_empty() {
            return Err(Error::EmptyInput("time series"));
        }
        if values.len() != timestamps.len() * dim {
            return Err(Error::InvalidSeries(format!(
                "{} timestamps but {} values for dimension {}",
                timestamps.len(),
                values.len(),
                dim
            )));
        }
        if let Some(bad) = timestamps.iter().chain(values.iter()).find(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!("non-finite entry {bad}")));
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSeries(
                "timestamps must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            timestamps,
            values,
            dim,
        })
    }

    pub fn univariate(timestamps: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(timestamps, values, 1)
    }

    /// Univariate series sampled at `0, 1, 2, ...`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let timestamps = (0..values.len()).map(|k| k as f64).collect();
        Self::new(timestamps, values, 1)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn start(&self) -> f64 {
        self.timestamps[0]
    }

    pub fn end(&self) -> f64 {
        self.timestamps[self.timestamps.len() - 1]
    }

    pub fn duration(&self) -> f64 {
        self.end() - self.start()
    }

    /// Piecewise-linear interpolant evaluated at `t`.
    pub fn interpolate_at(&self, t: f64) -> Result<Vec<f64>> {
        if !(self.start() <= t && t <= self.end()) {
            return Err(Error::OutOfRange {
                t,
                start: self.start(),
                end: self.end(),
            });
        }
        // first index with timestamp > t, clamped so that [i, i + 1] is a segment
        let upper = self.timestamps.partition_point(|&s| s <= t);
        if upper == 0 {
            return Ok(self.point(0).to_vec());
        }
        let i = upper - 1;
        if i + 1 >= self.len() || self.timestamps[i] == t {
            return Ok(self.point(i).to_vec());
        }
        Ok(self.lerp_segment(i, t))
    }

    fn lerp_segment(&self, i: usize, t: f64) -> Vec<f64> {
        let (t0, t1) = (self.timestamps[i], self.timestamps[i + 1]);
        let w = (t - t0) / (t1 - t0);
        self.point(i)
            .iter()
            .zip(self.point(i + 1))
            .map(|(&a, &b)| a + w * (b - a))
            .collect()
    }
}

/// An equally spaced `d`-dimensional series with at least three samples.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSeries {
    start_time: f64,
    step: f64,
    values: Vec<f64>,
    dim: usize,
}

impl UniformSeries {
    pub fn new(start_time: f64, step: f64, values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSeries("dimension must be at least 1".into()));
        }
        if !(step > 0.0 && step.is_finite() && start_time.is_finite()) {
            return Err(Error::InvalidSeries(format!("invalid step {step}")));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::InvalidSeries(format!(
                "{} values is not a multiple of dimension {dim}",
                values.len()
            )));
        }
        let len = values.len() / dim;
        if len < MIN_UNIFORM_SAMPLES {
            return Err(Error::TooShort {
                len,
                min: MIN_UNIFORM_SAMPLES,
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!("non-finite entry {bad}")));
        }
        Ok(Self {
            start_time,
            step,
            values,
            dim,
        })
    }

    /// Univariate series starting at zero.
    pub fn from_scalars(values: Vec<f64>, step: f64) -> Result<Self> {
        Self::new(0.0, step, values, 1)
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn time_at(&self, k: usize) -> f64 {
        self.start_time + k as f64 * self.step
    }

    /// Copies coordinate `c` out as a scalar sequence.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.dim).copied().collect()
    }

    pub fn to_time_series(&self) -> TimeSeries {
        let timestamps = (0..self.len()).map(|k| self.time_at(k)).collect();
        TimeSeries {
            timestamps,
            values: self.values.clone(),
            dim: self.dim,
        }
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            start_time: self.start_time,
            step: self.step,
            values,
            dim: self.dim,
        }
    }

    pub(crate) fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Resamples onto `max(min_samples, n + 1)` equally spaced times spanning the
/// original domain. Samples are never dropped.
pub fn resample_uniform(ts: &TimeSeries, min_samples: usize) -> Result<UniformSeries> {
    if min_samples < MIN_UNIFORM_SAMPLES {
        return Err(Error::Parameter(format!(
            "min_samples must be at least {MIN_UNIFORM_SAMPLES}, got {min_samples}"
        )));
    }
    let count = min_samples.max(ts.len());
    resample_to_count(ts, count)
}

/// Resamples onto exactly `count` equally spaced times on `[t_0, t_n]`.
pub fn resample_to_count(ts: &TimeSeries, count: usize) -> Result<UniformSeries> {
    if ts.len() < 2 || ts.duration() <= 0.0 {
        return Err(Error::DegenerateDuration);
    }
    if count < MIN_UNIFORM_SAMPLES {
        return Err(Error::TooShort {
            len: count,
            min: MIN_UNIFORM_SAMPLES,
        });
    }
    let (t0, tn) = (ts.start(), ts.end());
    let step = (tn - t0) / (count - 1) as f64;
    let mut values = Vec::with_capacity(count * ts.dim());
    let mut seg = 0;
    for k in 0..count {
        if k + 1 == count {
            values.extend_from_slice(ts.point(ts.len() - 1));
            break;
        }
        let t = t0 + k as f64 * step;
        while seg + 2 < ts.len() && ts.timestamps[seg + 1] <= t {
            seg += 1;
        }
        if ts.timestamps[seg] == t {
            values.extend_from_slice(ts.point(seg));
        } else {
            values.extend(ts.lerp_segment(seg, t));
        }
    }
    UniformSeries::new(t0, step, values, ts.dim())
}

/// One pass of neighbour averaging on a row-major buffer; endpoints fixed.
fn smooth_pass(src: &[f64], dst: &mut [f64], dim: usize) {
    let len = src.len() / dim;
    dst.copy_from_slice(src);
    for k in 1..len.saturating_sub(1) {
        for c in 0..dim {
            dst[k * dim + c] = 0.5 * (src[(k - 1) * dim + c] + src[(k + 1) * dim + c]);
        }
    }
}

/// Applies `iterations` passes of Laplacian smoothing to a row-major buffer.
pub fn smooth_values(values: &[f64], dim: usize, iterations: usize) -> Vec<f64> {
    let mut cur = values.to_vec();
    if iterations == 0 {
        return cur;
    }
    let mut next = vec![0.0; cur.len()];
    for _ in 0..iterations {
        smooth_pass(&cur, &mut next, dim);
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Laplacian smoothing: every interior sample becomes the mean of its two
/// neighbours, endpoints are held fixed. Constants and linear trends are
/// fixed points.
pub fn laplacian_smooth(us: &UniformSeries, iterations: usize) -> UniformSeries {
    us.with_values(smooth_values(us.values(), us.dim(), iterations))
}

/// Brings a collection to a common sample count.
///
/// The longest-duration series fixes the sampling step (at least
/// `min_samples` samples, never fewer than any input has); every series is
/// resampled at that rate over its own duration and the shorter ones are
/// zero-padded at the end.
pub fn equalize_lengths(series: &[TimeSeries], min_samples: usize) -> Result<Vec<UniformSeries>> {
    if series.is_empty() {
        return Err(Error::EmptyInput("series collection"));
    }
    if min_samples < MIN_UNIFORM_SAMPLES {
        return Err(Error::Parameter(format!(
            "min_samples must be at least {MIN_UNIFORM_SAMPLES}, got {min_samples}"
        )));
    }
    let mut longest = 0.0f64;
    let mut target = min_samples;
    for ts in series {
        if ts.len() < 2 || ts.duration() <= 0.0 {
            return Err(Error::DegenerateDuration);
        }
        longest = longest.max(ts.duration());
        target = target.max(ts.len());
    }
    let step = longest / (target - 1) as f64;
    series
        .iter()
        .map(|ts| {
            let count = if ts.duration() == longest {
                target
            } else {
                ((ts.duration() / step).round() as usize + 1)
                    .clamp(MIN_UNIFORM_SAMPLES, target)
            };
            let us = resample_to_count(ts, count)?;
            if count == target {
                return Ok(us);
            }
            let dim = us.dim();
            let (start, step) = (us.start_time(), us.step());
            let mut values = us.into_values();
            values.resize(target * dim, 0.0);
            UniformSeries::new(start, step, values, dim)
        })
        .collect()
}
