//! Summary statistics of empirical distributions and Fréchet statistics of
//! points on the unit sphere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quantile levels used for univariate series.
pub const UNIVARIATE_QUANTILES: [f64; 13] = [
    0.001, 0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99, 0.999,
];

/// Quantile levels used for multivariate series and vessel tracks.
pub const MULTIVARIATE_QUANTILES: [f64; 11] = [
    0.001, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99, 0.999,
];

/// Which moment-type statistics precede the quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatFlags {
    pub range: bool,
    pub mean: bool,
    pub std: bool,
    pub skew: bool,
    pub kurtosis: bool,
}

impl Default for StatFlags {
    fn default() -> Self {
        Self {
            range: true,
            mean: true,
            std: true,
            skew: true,
            kurtosis: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryConfig {
    pub quantiles: Vec<f64>,
    #[serde(default)]
    pub include: StatFlags,
}

impl SummaryConfig {
    pub fn new(quantiles: Vec<f64>, include: StatFlags) -> Result<Self> {
        let cfg = Self { quantiles, include };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn univariate() -> Self {
        Self {
            quantiles: UNIVARIATE_QUANTILES.to_vec(),
            include: StatFlags::default(),
        }
    }

    pub fn multivariate() -> Self {
        Self {
            quantiles: MULTIVARIATE_QUANTILES.to_vec(),
            include: StatFlags::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.quantiles.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
            return Err(Error::Parameter("quantiles must lie in (0, 1)".into()));
        }
        if self.quantiles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter(
                "quantiles must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// Names of the statistics in output order.
    pub fn stat_names(&self) -> Vec<String> {
        let f = self.include;
        let mut names: Vec<String> = [
            (f.range, "range"),
            (f.mean, "mean"),
            (f.std, "std"),
            (f.skew, "skew"),
            (f.kurtosis, "kurtosis"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| n.to_string())
        .collect();
        names.extend(self.quantiles.iter().map(|q| quantile_name(*q)));
        names
    }

    pub fn len(&self) -> usize {
        let f = self.include;
        [f.range, f.mean, f.std, f.skew, f.kurtosis]
            .iter()
            .filter(|&&b| b)
            .count()
            + self.quantiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn quantile_name(q: f64) -> String {
    format!("q{q}")
}

/// Fixed-order statistics of one empirical distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryVector(pub Vec<f64>);

impl SummaryVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Population moments of a sample; skew and excess kurtosis are zero for
/// constant samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    pub skew: f64,
    pub kurtosis: f64,
}

pub fn moments(samples: &[f64]) -> Result<Moments> {
    if samples.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let (min, max) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if min == max {
        return Ok(Moments {
            min,
            max,
            mean: min,
            std: 0.0,
            skew: 0.0,
            kurtosis: 0.0,
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in samples {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let (skew, kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Ok(Moments {
        min,
        max,
        mean,
        std: m2.sqrt(),
        skew,
        kurtosis,
    })
}

/// Quantile of already sorted data by linear interpolation between the
/// order statistics around `q * (N - 1)`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

pub fn summarize(samples: &[f64], cfg: &SummaryConfig) -> Result<SummaryVector> {
    let m = moments(samples)?;
    if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::Parameter(format!("non-finite sample {bad}")));
    }
    let f = cfg.include;
    let mut out = Vec::with_capacity(cfg.len());
    if f.range {
        out.push(m.max - m.min);
    }
    if f.mean {
        out.push(m.mean);
    }
    if f.std {
        out.push(m.std);
    }
    if f.skew {
        out.push(m.skew);
    }
    if f.kurtosis {
        out.push(m.kurtosis);
    }
    if !cfg.quantiles.is_empty() {
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        out.extend(cfg.quantiles.iter().map(|&q| quantile_sorted(&sorted, q)));
    }
    Ok(SummaryVector(out))
}

/// A point on the unit sphere in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn from_degrees(lat: f64, lon: f64) -> Self {
        Self {
            lat: lat.to_radians(),
            lon: lon.to_radians(),
        }
    }

    pub fn to_unit(self) -> [f64; 3] {
        let (sl, cl) = self.lat.sin_cos();
        let (so, co) = self.lon.sin_cos();
        [cl * co, cl * so, sl]
    }

    /// Inverse of [`LatLon::to_unit`]; longitude in `[-pi, pi)`.
    pub fn from_unit(v: [f64; 3]) -> Self {
        let lat = v[2].atan2((v[0] * v[0] + v[1] * v[1]).sqrt());
        let mut lon = v[1].atan2(v[0]);
        if lon >= std::f64::consts::PI {
            lon -= 2.0 * std::f64::consts::PI;
        }
        Self { lat, lon }
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Great-circle distance between unit vectors.
pub fn geodesic_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm(cross(a, b)).atan2(dot(a, b))
}

fn log_map(base: [f64; 3], p: [f64; 3]) -> [f64; 3] {
    let theta = geodesic_distance(base, p);
    let c = dot(base, p);
    let mut u = [p[0] - c * base[0], p[1] - c * base[1], p[2] - c * base[2]];
    let un = norm(u);
    if un < 1e-300 || theta == 0.0 {
        return [0.0; 3];
    }
    for x in &mut u {
        *x *= theta / un;
    }
    u
}

fn exp_map(base: [f64; 3], v: [f64; 3]) -> [f64; 3] {
    let t = norm(v);
    if t == 0.0 {
        return base;
    }
    let (s, c) = t.sin_cos();
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = c * base[i] + s * v[i] / t;
    }
    let n = norm(out);
    out.map(|x| x / n)
}

/// Sum of squared great-circle distances from `p` to every point.
pub fn frechet_objective(points: &[[f64; 3]], p: [f64; 3]) -> f64 {
    points
        .iter()
        .map(|&q| {
            let d = geodesic_distance(q, p);
            d * d
        })
        .sum()
}

const KARCHER_MAX_ITERATIONS: usize = 1000;
const KARCHER_TOLERANCE: f64 = 1e-13;

/// Fréchet mean and variance (the minimized sum of squared geodesic
/// distances) by Karcher iteration from the normalized Euclidean mean.
pub fn frechet_mean_variance(points: &[LatLon]) -> Result<(LatLon, f64)> {
    if points.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    if points.iter().all(|p| p == &points[0]) {
        return Ok((points[0], 0.0));
    }
    let units: Vec<[f64; 3]> = points.iter().map(|p| p.to_unit()).collect();
    let mut mean = [0.0; 3];
    for u in &units {
        for i in 0..3 {
            mean[i] += u[i];
        }
    }
    let n = norm(mean);
    if n < 1e-12 {
        return Err(Error::Parameter(
            "points are not contained in an open hemisphere".into(),
        ));
    }
    let mut p = mean.map(|x| x / n);
    let inv = 1.0 / units.len() as f64;
    for _ in 0..KARCHER_MAX_ITERATIONS {
        let mut step = [0.0; 3];
        for &u in &units {
            let v = log_map(p, u);
            for i in 0..3 {
                step[i] += v[i] * inv;
            }
        }
        if norm(step) < KARCHER_TOLERANCE {
            return Ok((LatLon::from_unit(p), frechet_objective(&units, p)));
        }
        p = exp_map(p, step);
    }
    Err(Error::Convergence {
        iterations: KARCHER_MAX_ITERATIONS,
    })
}
