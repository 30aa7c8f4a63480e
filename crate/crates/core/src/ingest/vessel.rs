//! Vessel trajectories: CSV loading, activity/gap segmentation and the
//! pooled feature row used for vessel-type classification.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::{local_projection, spherical_position_stats, ColumnLabel, FeatureMatrix, POSITION, SPEED, SPEED_DERIV};
use crate::geometry::{build_stack_with, SmoothingPlan};
use crate::series::{resample_to_count, TimeSeries, MIN_UNIFORM_SAMPLES};
use crate::stats::{frechet_objective, summarize, LatLon, SummaryConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselSample {
    /// Seconds.
    pub timestamp: f64,
    /// Degrees.
    pub lat: f64,
    pub lon: f64,
    /// Knots.
    pub speed: f64,
    pub distance_to_shore: f64,
    pub distance_to_port: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VesselTrack {
    pub id: String,
    pub label: Option<String>,
    samples: Vec<VesselSample>,
}

impl VesselTrack {
    /// Sorts samples by time and keeps the first of any repeated timestamp.
    pub fn new(id: impl Into<String>, label: Option<String>, mut samples: Vec<VesselSample>) -> Result<Self> {
        let id = id.into();
        for s in &samples {
            let finite = [s.timestamp, s.lat, s.lon, s.speed, s.distance_to_shore, s.distance_to_port]
                .iter()
                .all(|v| v.is_finite());
            if !finite || !(-90.0..=90.0).contains(&s.lat) || s.speed < 0.0 {
                return Err(Error::InvalidSeries(format!("vessel {id}: invalid sample {s:?}")));
            }
        }
        samples.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        samples.dedup_by(|b, a| a.timestamp == b.timestamp);
        Ok(Self { id, label, samples })
    }

    pub fn samples(&self) -> &[VesselSample] {
        &self.samples
    }

    pub fn span(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.timestamp - a.timestamp,
            _ => 0.0,
        }
    }
}

/// Header names of the CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    /// Vessel identifier; when absent from the file the whole file is one track.
    pub id: Option<String>,
    pub timestamp: String,
    pub lat: String,
    pub lon: String,
    pub speed: String,
    pub distance_to_shore: String,
    pub distance_to_port: String,
    pub label: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            id: Some("mmsi".into()),
            timestamp: "timestamp".into(),
            lat: "lat".into(),
            lon: "lon".into(),
            speed: "speed".into(),
            distance_to_shore: "distance_from_shore".into(),
            distance_to_port: "distance_from_port".into(),
            label: Some("label".into()),
        }
    }
}

/// Reads tracks from one CSV. Rows with an empty required field are skipped.
/// Tracks appear in order of first occurrence.
pub fn read_vessel_csv<R: Read>(reader: R, map: &ColumnMap, source: &Path) -> Result<Vec<VesselTrack>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| Error::Schema(format!("{}: missing column {name:?}", source.display())));
    let idx = [
        need(&map.timestamp)?,
        need(&map.lat)?,
        need(&map.lon)?,
        need(&map.speed)?,
        need(&map.distance_to_shore)?,
        need(&map.distance_to_port)?,
    ];
    let id_col = map.id.as_deref().and_then(col);
    let label_col = map.label.as_deref().and_then(col);
    let default_id = source.file_stem().map_or_else(|| "track".to_string(), |s| s.to_string_lossy().into_owned());

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, (Option<String>, Vec<VesselSample>)> = HashMap::new();
    let mut skipped = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let mut v = [0.0; 6];
        let mut missing = false;
        for (slot, &c) in v.iter_mut().zip(&idx) {
            let f = rec.get(c).unwrap_or("");
            if f.is_empty() || f.eq_ignore_ascii_case("nan") {
                missing = true;
                break;
            }
            *slot = f.parse().map_err(|_| Error::Parse {
                path: source.to_path_buf(),
                line,
                msg: format!("invalid number {f:?}"),
            })?;
        }
        if missing {
            skipped += 1;
            continue;
        }
        let id = id_col.and_then(|c| rec.get(c)).map_or_else(|| default_id.clone(), str::to_string);
        let label = label_col.and_then(|c| rec.get(c)).filter(|l| !l.is_empty()).map(str::to_string);
        let entry = groups.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            (None, Vec::new())
        });
        if entry.0.is_none() {
            entry.0 = label;
        }
        entry.1.push(VesselSample {
            timestamp: v[0],
            lat: v[1],
            lon: v[2],
            speed: v[3],
            distance_to_shore: v[4],
            distance_to_port: v[5],
        });
    }
    if skipped > 0 {
        log::warn!("{}: skipped {skipped} rows with missing fields", source.display());
    }
    order
        .into_iter()
        .map(|id| {
            let (label, samples) = groups.remove(&id).unwrap();
            VesselTrack::new(id, label, samples)
        })
        .collect()
}

/// Loads a single CSV file or every `*.csv` in a directory (sorted by name).
pub fn load_vessels(path: &Path, map: &ColumnMap) -> Result<Vec<VesselTrack>> {
    let files = if path.is_dir() {
        let mut v: Vec<_> = fs::read_dir(path)
            .map_err(|e| Error::io(format!("listing {}", path.display()), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    let mut tracks = Vec::new();
    for f in files {
        let file = fs::File::open(&f).map_err(|e| Error::io(format!("opening {}", f.display()), e))?;
        tracks.extend(read_vessel_csv(file, map, &f)?);
    }
    Ok(tracks)
}

/// Assigns labels from a two-column `id,label` CSV (with header).
pub fn apply_label_file(tracks: &mut [VesselTrack], path: &Path) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut map = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if let (Some(id), Some(label)) = (rec.get(0), rec.get(1)) {
            map.insert(id.to_string(), label.to_string());
        }
    }
    for t in tracks {
        if let Some(l) = map.get(&t.id) {
            t.label = Some(l.clone()).filter(|l| !l.is_empty());
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentParams {
    /// Knots; samples at or above are moving.
    pub active_threshold: f64,
    /// Seconds; consecutive samples this far apart start a new run.
    pub gap_threshold: f64,
    pub min_points: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            active_threshold: 0.4,
            gap_threshold: 5400.0,
            min_points: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SegmentSet {
    pub active: Vec<Vec<VesselSample>>,
    /// Seconds.
    pub inactive_durations: Vec<f64>,
    pub gap_durations: Vec<f64>,
    /// Total span of moving runs dropped for having too few samples.
    pub dropped_span: f64,
}

impl SegmentSet {
    pub fn active_durations(&self) -> Vec<f64> {
        self.active
            .iter()
            .map(|s| s.last().unwrap().timestamp - s[0].timestamp)
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty() && self.inactive_durations.is_empty() && self.gap_durations.is_empty()
    }

    /// Sum of all accounted time; equals the track span.
    pub fn total_time(&self) -> f64 {
        self.active_durations().iter().sum::<f64>()
            + self.inactive_durations.iter().sum::<f64>()
            + self.gap_durations.iter().sum::<f64>()
            + self.dropped_span
    }
}

/// Splits a track at long sampling gaps, then into maximal moving /
/// stationary runs. Moving runs with enough samples become active segments;
/// a stationary run contributes its duration, including the transitions to
/// its neighbouring runs, so that no time goes unaccounted.
pub fn segment_vessel(track: &VesselTrack, params: &SegmentParams) -> SegmentSet {
    let s = track.samples();
    let mut out = SegmentSet::default();
    if s.len() < 2 {
        return out;
    }
    let mut start = 0;
    for k in 0..s.len() {
        let split = k + 1 == s.len() || s[k + 1].timestamp - s[k].timestamp >= params.gap_threshold;
        if split {
            segment_section(&s[start..=k], params, &mut out);
            if k + 1 < s.len() {
                out.gap_durations.push(s[k + 1].timestamp - s[k].timestamp);
            }
            start = k + 1;
        }
    }
    out
}

fn segment_section(s: &[VesselSample], params: &SegmentParams, out: &mut SegmentSet) {
    let moving = |v: &VesselSample| v.speed >= params.active_threshold;
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut a = 0;
    for k in 1..=s.len() {
        if k == s.len() || moving(&s[k]) != moving(&s[a]) {
            runs.push((a, k - 1));
            a = k;
        }
    }
    for (r, &(a, b)) in runs.iter().enumerate() {
        if moving(&s[a]) {
            if b - a + 1 >= params.min_points {
                out.active.push(s[a..=b].to_vec());
            } else {
                out.dropped_span += s[b].timestamp - s[a].timestamp;
            }
        } else {
            let from = if r > 0 { s[runs[r - 1].1].timestamp } else { s[a].timestamp };
            let to = if r + 1 < runs.len() { s[runs[r + 1].0].timestamp } else { s[b].timestamp };
            out.inactive_durations.push(to - from);
        }
    }
}

pub const CURVATURE_RAW: &str = "curvature_raw";
pub const DISTANCE_TO_SHORE: &str = "distance_to_shore";
pub const DISTANCE_TO_PORT: &str = "distance_to_port";
pub const ACTIVE_DURATION: &str = "active_duration";
pub const INACTIVE_DURATION: &str = "inactive_duration";
pub const GAP_DURATION: &str = "gap_duration";

/// Distributions summarized after the position statistics, in column order.
pub const VESSEL_DISTRIBUTIONS: [&str; 9] = [
    SPEED,
    SPEED_DERIV,
    crate::features::CURVATURE,
    CURVATURE_RAW,
    DISTANCE_TO_SHORE,
    DISTANCE_TO_PORT,
    ACTIVE_DURATION,
    INACTIVE_DURATION,
    GAP_DURATION,
];

const POSITION_STATS: [&str; 3] = ["frechet_lat", "frechet_lon", "frechet_var"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VesselFeatureConfig {
    /// Seconds between resampled points.
    pub resample_step: f64,
    pub smoothing_iterations: usize,
    /// Seconds per averaging window.
    pub window_seconds: f64,
    pub summary: SummaryConfig,
}

impl Default for VesselFeatureConfig {
    fn default() -> Self {
        Self {
            resample_step: 60.0,
            smoothing_iterations: 10,
            window_seconds: 600.0,
            summary: SummaryConfig::multivariate(),
        }
    }
}

pub fn vessel_columns(cfg: &VesselFeatureConfig) -> Vec<ColumnLabel> {
    let mut cols: Vec<ColumnLabel> = POSITION_STATS.iter().map(|s| ColumnLabel::new(POSITION, 0, s)).collect();
    let stats = cfg.summary.stat_names();
    for d in VESSEL_DISTRIBUTIONS {
        cols.extend(stats.iter().map(|s| ColumnLabel::new(d, 0, s)));
    }
    cols
}

/// Window-averaged samples of one active segment.
#[derive(Debug, Default)]
struct SegmentSamples {
    position: Vec<LatLon>,
    dists: [Vec<f64>; 6],
}

fn segment_samples(seg: &[VesselSample], cfg: &VesselFeatureConfig) -> Result<SegmentSamples> {
    let t0 = seg[0].timestamp;
    let duration = seg.last().unwrap().timestamp - t0;
    // time in hours and positions in nautical miles give velocities in knots
    let hours: Vec<f64> = seg.iter().map(|s| (s.timestamp - t0) / 3600.0).collect();
    let mut values = Vec::with_capacity(seg.len() * 4);
    let mut lon_prev = seg[0].lon;
    let mut lon_acc = seg[0].lon;
    for s in seg {
        let mut d = s.lon - lon_prev;
        d -= 360.0 * ((d + 180.0) / 360.0).floor();
        lon_acc += d;
        lon_prev = s.lon;
        values.extend([s.lat, lon_acc, s.distance_to_shore, s.distance_to_port]);
    }
    let ts = TimeSeries::new(hours, values, 4)?;
    let count = ((duration / cfg.resample_step).ceil() as usize + 1).max(MIN_UNIFORM_SAMPLES);
    let us = resample_to_count(&ts, count)?;

    let ll: Vec<(f64, f64)> = (0..us.len()).map(|k| (us.point(k)[0], us.point(k)[1])).collect();
    let track = crate::series::UniformSeries::new(0.0, us.step(), local_projection(&ll), 2)?;
    let smoothed = build_stack_with(&track, SmoothingPlan::uniform(cfg.smoothing_iterations))?;
    let raw = build_stack_with(
        &track,
        SmoothingPlan {
            position: cfg.smoothing_iterations,
            derivatives: 0,
        },
    )?;
    let shore = us.channel(2);
    let port = us.channel(3);

    let step_s = us.step() * 3600.0;
    let mut out = SegmentSamples::default();
    let mut k = 0;
    while k < us.len() {
        let w = ((k as f64 * step_s) / cfg.window_seconds).floor();
        let mut end = k + 1;
        while end < us.len() && ((end as f64 * step_s) / cfg.window_seconds).floor() == w {
            end += 1;
        }
        let n = (end - k) as f64;
        let mean = |v: &[f64]| v[k..end].iter().sum::<f64>() / n;
        let mut u = [0.0; 3];
        for &(lat, lon) in &ll[k..end] {
            let p = LatLon::from_degrees(lat, lon).to_unit();
            (0..3).for_each(|i| u[i] += p[i]);
        }
        out.position.push(LatLon::from_unit(u));
        for (dst, src) in out.dists.iter_mut().zip([
            &smoothed.speed,
            &smoothed.speed_deriv,
            &smoothed.curvature,
            &raw.curvature,
            &shore,
            &port,
        ]) {
            dst.push(mean(src));
        }
        k = end;
    }
    Ok(out)
}

/// Fréchet statistics of the pooled positions. Points spread too widely for
/// the mean to be unique fall back to the normalized Euclidean mean.
fn pooled_position_stats(points: &[LatLon]) -> Result<[f64; 3]> {
    let deg: Vec<(f64, f64)> = points.iter().map(|p| (p.lat.to_degrees(), p.lon.to_degrees())).collect();
    match spherical_position_stats(&deg) {
        Ok(s) => Ok(s),
        Err(e @ (Error::Parameter(_) | Error::Convergence { .. })) => {
            log::warn!("position mean not well defined ({e}); using the projected Euclidean mean");
            let units: Vec<[f64; 3]> = points.iter().map(|p| p.to_unit()).collect();
            let mut m = [0.0; 3];
            for u in &units {
                (0..3).for_each(|i| m[i] += u[i]);
            }
            if m.iter().all(|&x| x.abs() < 1e-12) {
                m = units[0];
            }
            let mean = LatLon::from_unit(m);
            Ok([mean.lat.to_degrees(), mean.lon.to_degrees(), frechet_objective(&units, mean.to_unit())])
        }
        Err(e) => Err(e),
    }
}

fn push_summary(row: &mut Vec<f64>, samples: &[f64], summary: &SummaryConfig) -> Result<()> {
    if samples.is_empty() {
        row.extend(std::iter::repeat_n(0.0, summary.len()));
    } else {
        row.extend(summarize(samples, summary)?.into_vec());
    }
    Ok(())
}

/// Feature row in [`vessel_columns`] order. Distributions with no samples
/// (no active segments, no gaps, ...) are filled with zeros.
pub fn vessel_features(seg: &SegmentSet, cfg: &VesselFeatureConfig) -> Result<Vec<f64>> {
    cfg.summary.validate()?;
    if seg.is_empty() {
        return Err(Error::EmptyInput("segment set"));
    }
    if !(cfg.resample_step > 0.0 && cfg.window_seconds > 0.0) {
        return Err(Error::Parameter("resample step and window length must be positive".into()));
    }
    let mut pooled = SegmentSamples::default();
    for s in &seg.active {
        let part = segment_samples(s, cfg)?;
        pooled.position.extend(part.position);
        for (dst, src) in pooled.dists.iter_mut().zip(part.dists) {
            dst.extend(src);
        }
    }
    let mut row = Vec::with_capacity(3 + 9 * cfg.summary.len());
    if pooled.position.is_empty() {
        row.extend([0.0; 3]);
    } else {
        row.extend(pooled_position_stats(&pooled.position)?);
    }
    for d in &pooled.dists {
        push_summary(&mut row, d, &cfg.summary)?;
    }
    push_summary(&mut row, &seg.active_durations(), &cfg.summary)?;
    push_summary(&mut row, &seg.inactive_durations, &cfg.summary)?;
    push_summary(&mut row, &seg.gap_durations, &cfg.summary)?;
    Ok(row)
}

/// Segments and featurizes every track in parallel; rows keep input order.
pub fn vessel_feature_matrix(
    tracks: &[VesselTrack],
    params: &SegmentParams,
    cfg: &VesselFeatureConfig,
) -> Result<FeatureMatrix> {
    let rows = tracks
        .par_iter()
        .map(|t| vessel_features(&segment_vessel(t, params), cfg))
        .collect::<Result<Vec<_>>>()?;
    let labels = tracks.iter().map(|t| t.label.clone().unwrap_or_default()).collect();
    FeatureMatrix::new(vessel_columns(cfg), rows, labels)
}

pub const DEFAULT_EXCLUDED_LABELS: [&str; 6] = ["unknown", "unlabeled", "other_fishing", "gear", "gear_buoy", "gear/buoy"];

fn normalize_label(l: &str) -> String {
    l.trim().to_lowercase().replace([' ', '-'], "_")
}

/// Drops tracks without a usable label and tracks that show neither a
/// stationary period nor a long sampling gap.
pub fn filter_labels(tracks: Vec<VesselTrack>, excluded: &[String], params: &SegmentParams) -> Vec<VesselTrack> {
    let excluded: Vec<String> = excluded.iter().map(|l| normalize_label(l)).collect();
    tracks
        .into_iter()
        .filter(|t| {
            let Some(label) = t.label.as_deref() else {
                return false;
            };
            let l = normalize_label(label);
            if l.is_empty() || excluded.contains(&l) {
                return false;
            }
            let seg = segment_vessel(t, params);
            !(seg.inactive_durations.is_empty() && seg.gap_durations.is_empty())
        })
        .collect()
}

/// Class label -> coarser label (e.g. fishing / non-fishing).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassMap(pub BTreeMap<String, String>);

impl ClassMap {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let map: ClassMap = serde_json::from_str(&text)?;
        if map.0.is_empty() {
            return Err(Error::Config(format!("{}: empty class map", path.display())));
        }
        Ok(map)
    }

    pub fn apply(&self, label: &str) -> Result<String> {
        self.0
            .get(label)
            .cloned()
            .ok_or_else(|| Error::Vocabulary(format!("class {label:?} missing from class map")))
    }
}
