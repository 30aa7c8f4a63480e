//! The subcommands. Every output table is assembled in a canonical order
//! from per-task results, so files are byte-identical for a fixed seed no
//! matter how many worker threads ran.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::classify::{derive_seed, nested_cv, tune_and_score, CvReport, LabelEncoder, RunStats};
use crate::cli::config::{DatasetFormat, ModelName, RunConfig};
use crate::dtw::{nn_dtw_classify, DtwConfig};
use crate::error::{Error, Result};
use crate::features::{apply_mask, extract_univariate_matrix, AblationMask, FeatureMatrix, GeoStatConfig, ZParams};
use crate::ingest::ucr::{load_ucr, UcrDataset};
use crate::ingest::vessel::{apply_label_file, filter_labels, load_vessels, vessel_feature_matrix, ClassMap};
use crate::series::{equalize_lengths, TimeSeries};

/// Writes through a temporary file in the destination directory and renames
/// it into place, so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(format!("creating temp file in {}", dir.display()), e))?;
    body(tmp.as_file_mut())?;
    tmp.as_file_mut()
        .flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    tmp.persist(path)
        .map_err(|e| Error::io(format!("renaming into {}", path.display()), e.error))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_atomic(path, |w| {
        let mut wr = csv::Writer::from_writer(w);
        for r in rows {
            wr.serialize(r)?;
        }
        wr.flush().map_err(|e| Error::io("writing csv", e))?;
        Ok(())
    })
}

fn write_matrix(path: &Path, fm: &FeatureMatrix) -> Result<()> {
    write_atomic(path, |w| fm.write_csv(w))
}

fn mix(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(seed, |s, &p| derive_seed(s, p))
}

fn model_id(m: ModelName) -> u64 {
    m as u64 + 1
}

/// Feature matrices of one grid cell.
struct Cell {
    windows: usize,
    smoothings: usize,
    train: FeatureMatrix,
    test: FeatureMatrix,
}

fn extract_cells(ds: &UcrDataset, cfg: &RunConfig) -> Result<Vec<Cell>> {
    let all: Vec<TimeSeries> = ds
        .train
        .series
        .iter()
        .chain(&ds.test.series)
        .map(|v| TimeSeries::from_values(v.clone()))
        .collect::<Result<_>>()?;
    let uniform = equalize_lengths(&all, cfg.min_samples)?;
    let (train_us, test_us) = uniform.split_at(ds.train.len());
    cfg.cells()
        .into_par_iter()
        .map(|(w, s)| {
            let gs = GeoStatConfig {
                min_samples: cfg.min_samples,
                ..GeoStatConfig::univariate(s, w)
            };
            Ok(Cell {
                windows: w,
                smoothings: s,
                train: extract_univariate_matrix(train_us, &ds.train.labels, &gs)?,
                test: extract_univariate_matrix(test_us, &ds.test.labels, &gs)?,
            })
        })
        .collect()
}

/// Pooled feature matrix for the nested workflows.
fn pooled_matrix(cfg: &RunConfig) -> Result<FeatureMatrix> {
    let path = cfg.dataset()?;
    match cfg.format {
        DatasetFormat::Vessel => {
            let mut tracks = load_vessels(path, &cfg.vessel.columns)?;
            if let Some(lf) = &cfg.vessel.labels_file {
                apply_label_file(&mut tracks, lf)?;
            }
            let n = tracks.len();
            let tracks = filter_labels(tracks, &cfg.vessel.excluded_labels, &cfg.vessel.segment);
            log::info!("{} of {n} tracks usable after label and activity filtering", tracks.len());
            if tracks.is_empty() {
                return Err(Error::EmptyInput("usable vessel tracks"));
            }
            vessel_feature_matrix(&tracks, &cfg.vessel.segment, &cfg.vessel.features)
        }
        DatasetFormat::Features => {
            let f = fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
            FeatureMatrix::read_csv(f)
        }
        DatasetFormat::Ucr => Err(Error::Config(
            "this command needs pooled features (--format vessel or --format features)".into(),
        )),
    }
}

fn need_ucr(cfg: &RunConfig, cmd: &str) -> Result<UcrDataset> {
    if cfg.format != DatasetFormat::Ucr {
        return Err(Error::Config(format!("`{cmd}` needs a train/test dataset (--format ucr)")));
    }
    load_ucr(cfg.dataset()?)
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

pub fn extract(cfg: &RunConfig) -> Result<()> {
    match cfg.format {
        DatasetFormat::Ucr => {
            let ds = load_ucr(cfg.dataset()?)?;
            for c in extract_cells(&ds, cfg)? {
                let stem = format!("features_{}W_{}S", c.windows, c.smoothings);
                write_matrix(&out_path(cfg, &format!("{stem}_train.csv")), &c.train)?;
                write_matrix(&out_path(cfg, &format!("{stem}_test.csv")), &c.test)?;
            }
            Ok(())
        }
        DatasetFormat::Vessel => write_matrix(&out_path(cfg, "features_vessel.csv"), &pooled_matrix(cfg)?),
        DatasetFormat::Features => Err(Error::Config("input is already a feature matrix".into())),
    }
}

/// Encoded, z-normalized train/test rows.
struct Prepared {
    train: Vec<Vec<f64>>,
    train_y: Vec<usize>,
    test: Vec<Vec<f64>>,
    test_y: Vec<usize>,
    n_classes: usize,
}

fn prepare(train: &FeatureMatrix, test: &FeatureMatrix) -> Result<Prepared> {
    if train.n_cols() == 0 {
        return Err(Error::Config("feature matrix has no columns left".into()));
    }
    let enc = LabelEncoder::fit(&train.labels)?;
    let z = ZParams::fit(train)?;
    Ok(Prepared {
        train: z.apply(train)?.rows,
        train_y: enc.encode(&train.labels)?,
        test: z.apply(test)?.rows,
        test_y: enc.encode(&test.labels)?,
        n_classes: enc.n_classes(),
    })
}

/// Test accuracy of each repetition for one model on one prepared split.
fn holdout_runs(p: &Prepared, model: ModelName, cfg: &RunConfig, cell: (usize, usize)) -> Result<Vec<f64>> {
    let kind = model.kind().expect("feature model");
    let grid = cfg.grid.points(kind)?;
    (0..cfg.repetitions)
        .into_par_iter()
        .map(|run| {
            let seed = mix(cfg.seed, &[model_id(model), cell.0 as u64, cell.1 as u64, run as u64]);
            tune_and_score((&p.train, &p.train_y), (&p.test, &p.test_y), p.n_classes, &grid, cfg.folds, seed)
                .map(|r| r.accuracy)
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct ResultRow {
    model: String,
    windows: usize,
    smoothings: usize,
    run: usize,
    fold: String,
    accuracy: f64,
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    name: String,
    model: String,
    windows: usize,
    smoothings: usize,
    runs: usize,
    mean: f64,
    min: f64,
    max: f64,
    std: f64,
}

fn summary_row(model: &str, windows: usize, smoothings: usize, accs: &[f64]) -> Result<SummaryRow> {
    let s = RunStats::from_values(accs)?;
    Ok(SummaryRow {
        name: format!("{}_{windows}W_{smoothings}S", model.to_uppercase()),
        model: model.into(),
        windows,
        smoothings,
        runs: accs.len(),
        mean: s.mean,
        min: s.min,
        max: s.max,
        std: s.std,
    })
}

fn dtw_accuracy(ds: &UcrDataset, window: Option<f64>) -> Result<f64> {
    let enc = LabelEncoder::fit(&ds.train.labels)?;
    let out = nn_dtw_classify(
        &ds.train.series,
        &enc.encode(&ds.train.labels)?,
        &ds.test.series,
        &enc.encode(&ds.test.labels)?,
        &DtwConfig { window },
    )?;
    Ok(out.accuracy)
}

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    let ds = need_ucr(cfg, "evaluate")?;
    let cells = extract_cells(&ds, cfg)?;
    let models = cfg.feature_models();
    let tasks: Vec<(usize, ModelName)> = (0..cells.len())
        .flat_map(|c| models.iter().map(move |&m| (c, m)))
        .collect();
    let prepared: Vec<Prepared> = cells
        .par_iter()
        .map(|c| prepare(&c.train, &c.test))
        .collect::<Result<_>>()?;
    let accs: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(c, m)| holdout_runs(&prepared[c], m, cfg, (cells[c].windows, cells[c].smoothings)))
        .collect::<Result<_>>()?;

    let mut results = Vec::new();
    let mut summary = Vec::new();
    for (&(c, m), a) in tasks.iter().zip(&accs) {
        let (w, s) = (cells[c].windows, cells[c].smoothings);
        for (run, &acc) in a.iter().enumerate() {
            results.push(ResultRow {
                model: m.name().into(),
                windows: w,
                smoothings: s,
                run,
                fold: "test".into(),
                accuracy: acc,
            });
        }
        summary.push(summary_row(m.name(), w, s, a)?);
    }
    if cfg.models.contains(&ModelName::Dtw) {
        // deterministic, so a single run
        let acc = dtw_accuracy(&ds, cfg.dtw_window)?;
        results.push(ResultRow {
            model: "dtw".into(),
            windows: 0,
            smoothings: 0,
            run: 0,
            fold: "test".into(),
            accuracy: acc,
        });
        summary.push(summary_row("dtw", 0, 0, &[acc])?);
    }
    write_rows(&out_path(cfg, "results.csv"), &results)?;
    write_rows(&out_path(cfg, "summary.csv"), &summary)
}

/// Encoded and standardized pooled data.
struct PooledData {
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    encoder: LabelEncoder,
}

fn prepare_pooled(fm: &FeatureMatrix, class_map: Option<&ClassMap>) -> Result<PooledData> {
    if fm.n_cols() == 0 {
        return Err(Error::Config("feature matrix has no columns left".into()));
    }
    let labels: Vec<String> = match class_map {
        Some(m) => fm.labels.iter().map(|l| m.apply(l)).collect::<Result<_>>()?,
        None => fm.labels.clone(),
    };
    let encoder = LabelEncoder::fit(&labels)?;
    // standardization uses no labels, so it is fitted on the pooled data
    let rows = ZParams::fit(fm)?.apply(fm)?.rows;
    Ok(PooledData {
        rows,
        labels: encoder.encode(&labels)?,
        encoder,
    })
}

fn nested_runs(d: &PooledData, model: ModelName, cfg: &RunConfig) -> Result<Vec<CvReport>> {
    let grid = cfg.grid.points(model.kind().expect("feature model"))?;
    (0..cfg.repetitions)
        .into_par_iter()
        .map(|run| {
            let seed = mix(cfg.seed, &[model_id(model), run as u64]);
            nested_cv(&d.rows, &d.labels, d.encoder.n_classes(), &grid, cfg.outer_folds, cfg.inner_folds, seed)
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Serialize)]
struct NestedFoldRow {
    model: String,
    task: String,
    run: usize,
    fold: usize,
    accuracy: f64,
    inner_score: f64,
    params: String,
}

#[derive(Debug, Serialize)]
struct NestedSummaryRow {
    model: String,
    task: String,
    runs: usize,
    min: f64,
    max: f64,
    mean: f64,
    std: f64,
}

pub fn nested(cfg: &RunConfig) -> Result<()> {
    let class_map = cfg.class_map.as_deref().map(ClassMap::load).transpose()?;
    let fm = pooled_matrix(cfg)?;
    let windows = fm.n_windows();
    let smoothings = match cfg.format {
        DatasetFormat::Vessel => cfg.vessel.features.smoothing_iterations,
        _ => 0,
    };
    let mut tasks = vec![("multiclass", prepare_pooled(&fm, None)?)];
    if let Some(m) = &class_map {
        tasks.push(("binary", prepare_pooled(&fm, Some(m))?));
    }

    let mut results = Vec::new();
    let mut folds = Vec::new();
    let mut summary = Vec::new();
    for (task, data) in &tasks {
        for m in cfg.feature_models() {
            let reports = nested_runs(data, m, cfg)?;
            let suffix = if *task == "binary" { "_binary" } else { "" };
            let per_run: Vec<f64> = reports.iter().map(|r| mean(&r.fold_accuracies)).collect();
            for (run, r) in reports.iter().enumerate() {
                for (f, &acc) in r.fold_accuracies.iter().enumerate() {
                    results.push(ResultRow {
                        model: format!("{}{suffix}", m.name()),
                        windows,
                        smoothings,
                        run,
                        fold: f.to_string(),
                        accuracy: acc,
                    });
                    folds.push(NestedFoldRow {
                        model: m.name().into(),
                        task: task.to_string(),
                        run,
                        fold: f,
                        accuracy: acc,
                        inner_score: r.inner_scores[f],
                        params: r.chosen[f].to_string(),
                    });
                }
            }
            let s = RunStats::from_values(&per_run)?;
            summary.push(NestedSummaryRow {
                model: m.name().into(),
                task: task.to_string(),
                runs: per_run.len(),
                min: s.min,
                max: s.max,
                mean: s.mean,
                std: s.std,
            });
            let cm_path = out_path(cfg, &format!("confusion_{}{suffix}.csv", m.name()));
            let classes = data.encoder.classes().to_vec();
            write_atomic(&cm_path, |w| reports[0].confusion.write_csv(w, &classes))?;
        }
    }
    write_rows(&out_path(cfg, "results.csv"), &results)?;
    write_rows(&out_path(cfg, "nested_folds.csv"), &folds)?;
    write_rows(&out_path(cfg, "nested_summary.csv"), &summary)
}

#[derive(Debug, Serialize)]
struct AblationRow {
    mask: String,
    model: String,
    windows: usize,
    smoothings: usize,
    base_accuracy: f64,
    masked_accuracy: f64,
    percent_change: f64,
}

fn mask_name(names: &[String]) -> String {
    let n: Vec<&str> = names.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    if n.is_empty() {
        "none".into()
    } else {
        n.join("+")
    }
}

fn masked(fm: &FeatureMatrix, mask: &AblationMask) -> Result<FeatureMatrix> {
    let out = apply_mask(fm, mask)?;
    if out.n_cols() == 0 {
        return Err(Error::Config("mask removes every feature column".into()));
    }
    Ok(out)
}

fn parse_masks(cfg: &RunConfig, vocab: &FeatureMatrix) -> Result<Vec<(String, AblationMask)>> {
    if cfg.masks.is_empty() {
        return Err(Error::Config("no masks given (use --mask)".into()));
    }
    cfg.masks
        .iter()
        .map(|names| {
            let names: Vec<&String> = names.iter().filter(|n| n.trim() != "none").collect();
            let mask = AblationMask::from_names(&names, vocab)?;
            // reject a remove-everything mask before any training happens
            masked(vocab, &mask)?;
            Ok((mask_name(&names.into_iter().cloned().collect::<Vec<_>>()), mask))
        })
        .collect()
}

fn percent_change(base: f64, masked: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else {
        100.0 * (masked - base) / base
    }
}

pub fn ablate(cfg: &RunConfig) -> Result<()> {
    let mut rows = Vec::new();
    match cfg.format {
        DatasetFormat::Ucr => {
            let ds = load_ucr(cfg.dataset()?)?;
            let cells = extract_cells(&ds, cfg)?;
            for c in &cells {
                let masks = parse_masks(cfg, &c.train)?;
                let cell = (c.windows, c.smoothings);
                for m in cfg.feature_models() {
                    let base = mean(&holdout_runs(&prepare(&c.train, &c.test)?, m, cfg, cell)?);
                    let masked_accs: Vec<f64> = masks
                        .par_iter()
                        .map(|(_, mask)| {
                            let p = prepare(&masked(&c.train, mask)?, &masked(&c.test, mask)?)?;
                            Ok(mean(&holdout_runs(&p, m, cfg, cell)?))
                        })
                        .collect::<Result<_>>()?;
                    for ((name, _), acc) in masks.iter().zip(masked_accs) {
                        rows.push(AblationRow {
                            mask: name.clone(),
                            model: m.name().into(),
                            windows: c.windows,
                            smoothings: c.smoothings,
                            base_accuracy: base,
                            masked_accuracy: acc,
                            percent_change: percent_change(base, acc),
                        });
                    }
                }
            }
        }
        _ => {
            let fm = pooled_matrix(cfg)?;
            let masks = parse_masks(cfg, &fm)?;
            for m in cfg.feature_models() {
                let score = |fm: &FeatureMatrix| -> Result<f64> {
                    let reports = nested_runs(&prepare_pooled(fm, None)?, m, cfg)?;
                    Ok(mean(&reports.iter().map(|r| mean(&r.fold_accuracies)).collect::<Vec<_>>()))
                };
                let base = score(&fm)?;
                for (name, mask) in &masks {
                    let acc = score(&masked(&fm, mask)?)?;
                    rows.push(AblationRow {
                        mask: name.clone(),
                        model: m.name().into(),
                        windows: fm.n_windows(),
                        smoothings: 0,
                        base_accuracy: base,
                        masked_accuracy: acc,
                        percent_change: percent_change(base, acc),
                    });
                }
            }
        }
    }
    write_rows(&out_path(cfg, "ablation.csv"), &rows)
}

#[derive(Debug, Serialize)]
struct WindowRow {
    model: String,
    windows: usize,
    smoothings: usize,
    window: usize,
    runs: usize,
    mean: f64,
    min: f64,
    max: f64,
    std: f64,
}

pub fn windows(cfg: &RunConfig) -> Result<()> {
    let ds = need_ucr(cfg, "windows")?;
    let cells = extract_cells(&ds, cfg)?;
    let mut tasks = Vec::new();
    for (ci, c) in cells.iter().enumerate() {
        for m in cfg.feature_models() {
            for w in 0..c.windows {
                tasks.push((ci, m, w));
            }
        }
    }
    let accs: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(ci, m, w)| {
            let c = &cells[ci];
            let p = prepare(&c.train.select_window(w)?, &c.test.select_window(w)?)?;
            // same seeds as `evaluate`, so a single window reproduces the full result
            holdout_runs(&p, m, cfg, (c.windows, c.smoothings))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (&(ci, m, w), a) in tasks.iter().zip(&accs) {
        let s = RunStats::from_values(a)?;
        rows.push(WindowRow {
            model: m.name().into(),
            windows: cells[ci].windows,
            smoothings: cells[ci].smoothings,
            window: w,
            runs: a.len(),
            mean: s.mean,
            min: s.min,
            max: s.max,
            std: s.std,
        });
    }
    write_rows(&out_path(cfg, "windows.csv"), &rows)
}

#[derive(Debug, Serialize)]
struct DtwRow {
    dataset: String,
    window: String,
    accuracy: f64,
}

pub fn dtw(cfg: &RunConfig) -> Result<()> {
    let ds = need_ucr(cfg, "dtw")?;
    let acc = dtw_accuracy(&ds, cfg.dtw_window)?;
    let row = DtwRow {
        dataset: ds.name.clone(),
        window: cfg.dtw_window.map_or_else(|| "none".into(), |w| w.to_string()),
        accuracy: acc,
    };
    write_rows(&out_path(cfg, "dtw.csv"), &[row])
}
