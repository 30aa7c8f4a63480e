//! Dynamic time warping with a Sakoe-Chiba band and a 1-nearest-neighbour
//! classifier on top of it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::accuracy;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DtwConfig {
    /// Band half-width as a fraction of the longer series; `None` is unconstrained.
    pub window: Option<f64>,
}

impl DtwConfig {
    pub fn unconstrained() -> Self {
        Self { window: None }
    }

    pub fn band(fraction: f64) -> Result<Self> {
        let cfg = Self { window: Some(fraction) };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match self.window {
            Some(f) if !(0.0..=1.0).contains(&f) => Err(Error::Parameter(format!("warping window {f} outside [0, 1]"))),
            _ => Ok(()),
        }
    }

    /// Half-width in samples for series of lengths `n` and `m`.
    pub fn half_width(&self, n: usize, m: usize) -> usize {
        let len = n.max(m);
        match self.window {
            None => len,
            Some(f) => (f * len as f64).floor() as usize,
        }
    }
}

/// DTW distance: square root of the cheapest accumulated squared difference.
pub fn dtw_distance(a: &[f64], b: &[f64], cfg: &DtwConfig) -> Result<f64> {
    Ok(dtw_squared_bounded(a, b, cfg, f64::INFINITY)?
        .expect("unbounded search never abandons")
        .sqrt())
}

/// Squared DTW cost, or `None` as soon as every cell of a row exceeds
/// `bound` (the final cost would then exceed it too).
pub fn dtw_squared_bounded(a: &[f64], b: &[f64], cfg: &DtwConfig, bound: f64) -> Result<Option<f64>> {
    cfg.validate()?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("series"));
    }
    let (n, m) = (a.len(), b.len());
    let w = cfg.half_width(n, m);
    if n.abs_diff(m) > w {
        return Err(Error::InfeasibleBand {
            band: w,
            len_a: n,
            len_b: m,
        });
    }
    // rows indexed 0..=m, column 0 is the virtual start
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    // spans of the cells last written into each buffer
    let (mut prev_span, mut cur_span) = ((0, 0), (0, 0));
    for i in 1..=n {
        let lo = i.saturating_sub(w).max(1);
        let hi = (i + w).min(m);
        // `cur` still holds row i-2; wipe what it wrote
        for v in &mut cur[cur_span.0..=cur_span.1] {
            *v = f64::INFINITY;
        }
        let ai = a[i - 1];
        let mut row_min = f64::INFINITY;
        for j in lo..=hi {
            let d = ai - b[j - 1];
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            let v = d * d + best;
            cur[j] = v;
            row_min = row_min.min(v);
        }
        if row_min > bound {
            return Ok(None);
        }
        cur_span = (lo, hi);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut prev_span, &mut cur_span);
    }
    Ok(Some(prev[m]))
}

/// Predictions and accuracy of a 1NN-DTW run.
#[derive(Debug, Clone)]
pub struct DtwOutcome {
    pub predictions: Vec<usize>,
    pub accuracy: f64,
}

/// Index of the nearest training series; ties keep the lowest index.
pub fn nearest_neighbor(train: &[Vec<f64>], query: &[f64], cfg: &DtwConfig) -> Result<usize> {
    if train.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    let mut best = (0, f64::INFINITY);
    for (i, t) in train.iter().enumerate() {
        if let Some(d) = dtw_squared_bounded(t, query, cfg, best.1)? {
            if d < best.1 {
                best = (i, d);
            }
        }
    }
    Ok(best.0)
}

/// Labels every test series by its nearest training series.
pub fn nn_dtw_classify(
    train: &[Vec<f64>],
    train_labels: &[usize],
    test: &[Vec<f64>],
    test_labels: &[usize],
    cfg: &DtwConfig,
) -> Result<DtwOutcome> {
    if train.len() != train_labels.len() {
        return Err(Error::LengthMismatch {
            left: train.len(),
            right: train_labels.len(),
        });
    }
    let predictions = test
        .par_iter()
        .map(|q| nearest_neighbor(train, q, cfg).map(|i| train_labels[i]))
        .collect::<Result<Vec<_>>>()?;
    let accuracy = accuracy(test_labels, &predictions)?;
    Ok(DtwOutcome { predictions, accuracy })
}
