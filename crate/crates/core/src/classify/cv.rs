//! Stratified k-fold splitting, grid search and nested cross-validation.
//!
//! Every random stream is seeded from the master seed and a fixed stream id,
//! so results do not depend on how rayon schedules the work.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classify::report::{ConfusionMatrix, CvReport};
use crate::classify::{accuracy, ModelParams};
use crate::error::{Error, Result};

/// splitmix64 of `master` mixed with `stream`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Test-index sets of `k` folds, each sorted ascending.
///
/// Items of each class are shuffled and dealt round-robin, the deal
/// continuing across classes, so per-class counts and fold sizes both differ
/// by at most one. When some class has fewer than `k` members the split is
/// unstratified.
pub fn kfold_splits(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::Parameter(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::Parameter(format!("{k} folds exceed {n} items")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        groups[c].push(i);
    }
    groups.retain(|g| !g.is_empty());
    if groups.iter().any(|g| g.len() < k) {
        log::warn!("a class has fewer than {k} members; using unstratified folds");
        groups = vec![(0..n).collect()];
    }
    let mut folds = vec![Vec::new(); k];
    let mut slot = 0;
    for g in &mut groups {
        g.shuffle(&mut rng);
        for &i in g.iter() {
            folds[slot % k].push(i);
            slot += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in test {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

fn gather<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

/// Fits on `train_idx`, returns predictions for `test_idx`.
fn fit_predict(
    params: &ModelParams,
    rows: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    train_idx: &[usize],
    test_idx: &[usize],
) -> Result<Vec<usize>> {
    let model = params.fit(&gather(rows, train_idx), &gather(labels, train_idx), n_classes)?;
    model.predict(&gather(rows, test_idx))
}

/// Mean validation accuracy of `params` over the given folds.
pub fn cross_val_score(
    params: &ModelParams,
    rows: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    folds: &[Vec<usize>],
) -> Result<f64> {
    let mut total = 0.0;
    for test in folds {
        let train = complement(rows.len(), test);
        let pred = fit_predict(params, rows, labels, n_classes, &train, test)?;
        total += accuracy(&gather(labels, test), &pred)?;
    }
    Ok(total / folds.len() as f64)
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub best: ModelParams,
    pub score: f64,
    /// Mean validation accuracy per grid point, `None` where fitting failed.
    pub scores: Vec<Option<f64>>,
}

/// Picks the grid point with the highest mean k-fold validation accuracy;
/// ties go to the earliest point in `grid`. Points that cannot be fitted on
/// some fold (e.g. k larger than the fold's training set) are skipped.
pub fn grid_search_cv(
    rows: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    grid: &[ModelParams],
    k: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    if rows.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: rows.len(),
            right: labels.len(),
        });
    }
    let folds = kfold_splits(labels, k, seed)?;
    let results: Vec<Result<f64>> = grid
        .par_iter()
        .map(|p| cross_val_score(p, rows, labels, n_classes, &folds))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    let mut scores = Vec::with_capacity(grid.len());
    let mut last_err = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => {
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((i, s));
                }
                scores.push(Some(s));
            }
            Err(e) => {
                log::debug!("skipping grid point {}: {e}", grid[i]);
                scores.push(None);
                last_err = Some(e);
            }
        }
    }
    match best {
        Some((i, score)) => Ok(GridSearchResult {
            best: grid[i],
            score,
            scores,
        }),
        None => Err(last_err.unwrap_or_else(|| Error::Config("no grid point could be fitted".into()))),
    }
}

/// Outcome of tuning on a training split and scoring a fixed test split.
#[derive(Debug, Clone)]
pub struct HoldoutResult {
    pub search: GridSearchResult,
    pub predictions: Vec<usize>,
    pub accuracy: f64,
}

/// Grid search on the training split, refit with the winner, score the test split.
pub fn tune_and_score(
    train: (&[Vec<f64>], &[usize]),
    test: (&[Vec<f64>], &[usize]),
    n_classes: usize,
    grid: &[ModelParams],
    k: usize,
    seed: u64,
) -> Result<HoldoutResult> {
    let search = grid_search_cv(train.0, train.1, n_classes, grid, k, seed)?;
    let model = search.best.fit(train.0, train.1, n_classes)?;
    let predictions = model.predict(test.0)?;
    let accuracy = accuracy(test.1, &predictions)?;
    Ok(HoldoutResult {
        search,
        predictions,
        accuracy,
    })
}

/// Nested cross-validation: each outer fold is tuned by an inner grid search
/// on the remaining data, refitted, and scored on the holdout.
pub fn nested_cv(
    rows: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    grid: &[ModelParams],
    outer_k: usize,
    inner_k: usize,
    seed: u64,
) -> Result<CvReport> {
    let outer = kfold_splits(labels, outer_k, derive_seed(seed, 0))?;
    let per_fold: Vec<Result<(f64, ModelParams, f64, ConfusionMatrix)>> = outer
        .par_iter()
        .enumerate()
        .map(|(f, test)| {
            let train = complement(rows.len(), test);
            let (tr_rows, tr_labels) = (gather(rows, &train), gather(labels, &train));
            let (te_rows, te_labels) = (gather(rows, test), gather(labels, test));
            let held = tune_and_score(
                (&tr_rows, &tr_labels),
                (&te_rows, &te_labels),
                n_classes,
                grid,
                inner_k,
                derive_seed(seed, f as u64 + 1),
            )?;
            let cm = ConfusionMatrix::from_labels(&te_labels, &held.predictions, n_classes)?;
            Ok((held.accuracy, held.search.best, held.search.score, cm))
        })
        .collect();

    let mut report = CvReport {
        fold_accuracies: Vec::with_capacity(outer_k),
        chosen: Vec::with_capacity(outer_k),
        inner_scores: Vec::with_capacity(outer_k),
        confusion: ConfusionMatrix::zeros(n_classes),
    };
    for r in per_fold {
        let (acc, params, score, cm) = r?;
        report.fold_accuracies.push(acc);
        report.chosen.push(params);
        report.inner_scores.push(score);
        report.confusion.add(&cm)?;
    }
    Ok(report)
}
