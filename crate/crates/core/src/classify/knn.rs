use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub weights: Weighting,
    /// Minkowski exponent, 1 or 2.
    pub p: u8,
}

impl KnnParams {
    pub fn new(k: usize, weights: Weighting, p: u8) -> Result<Self> {
        let params = Self { k, weights, p };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        if !matches!(self.p, 1 | 2) {
            return Err(Error::Parameter(format!("p must be 1 or 2, got {}", self.p)));
        }
        Ok(())
    }
}

/// Minkowski distance of order 1 or 2.
pub fn minkowski(a: &[f64], b: &[f64], p: u8) -> f64 {
    if p == 1 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    } else {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }
}

/// Stores the training set verbatim.
#[derive(Debug, Clone)]
pub struct KnnModel {
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    n_classes: usize,
    params: KnnParams,
}

impl KnnModel {
    pub fn fit(rows: &[Vec<f64>], labels: &[usize], n_classes: usize, params: KnnParams) -> Result<Self> {
        params.validate()?;
        if rows.is_empty() {
            return Err(Error::EmptyInput("training set"));
        }
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: labels.len(),
            });
        }
        if params.k > rows.len() {
            return Err(Error::Parameter(format!(
                "k = {} exceeds training size {}",
                params.k,
                rows.len()
            )));
        }
        let dim = rows[0].len();
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: r.len(),
            });
        }
        Ok(Self {
            rows: rows.to_vec(),
            labels: labels.to_vec(),
            n_classes,
            params,
        })
    }

    pub fn params(&self) -> KnnParams {
        self.params
    }

    pub fn predict_one(&self, query: &[f64]) -> Result<usize> {
        let dim = self.rows[0].len();
        if query.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: query.len(),
            });
        }
        let mut scored: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (minkowski(r, query, self.params.p), i))
            .collect();
        let k = self.params.k;
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, by_dist);
            scored.truncate(k);
        }
        scored.sort_by(by_dist);

        let mut votes = vec![0.0; self.n_classes];
        match self.params.weights {
            Weighting::Uniform => {
                for &(_, i) in &scored {
                    votes[self.labels[i]] += 1.0;
                }
            }
            Weighting::Distance => {
                if scored[0].0 == 0.0 {
                    // exact matches outvote everything else
                    for &(_, i) in scored.iter().take_while(|(d, _)| *d == 0.0) {
                        votes[self.labels[i]] += 1.0;
                    }
                } else {
                    for &(d, i) in &scored {
                        votes[self.labels[i]] += 1.0 / d;
                    }
                }
            }
        }
        Ok(argmax_lowest(&votes))
    }

    pub fn predict(&self, queries: &[Vec<f64>]) -> Result<Vec<usize>> {
        queries.iter().map(|q| self.predict_one(q)).collect()
    }
}

/// Index of the largest vote; ties go to the smallest index.
pub(crate) fn argmax_lowest(votes: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in votes.iter().enumerate().skip(1) {
        if v > votes[best] {
            best = c;
        }
    }
    best
}
