//! Soft-margin SVM trained by sequential minimal optimization, combined
//! one-vs-one for multi-class problems.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classify::knn::argmax_lowest;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    Rbf,
    Poly,
}

/// Kernel with its resolved parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub gamma: f64,
    pub degree: u32,
    pub coef0: f64,
}

impl Kernel {
    pub fn linear() -> Self {
        Self {
            kind: KernelKind::Linear,
            gamma: 1.0,
            degree: 1,
            coef0: 0.0,
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => dot(a, b),
            KernelKind::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-self.gamma * d2).exp()
            }
            KernelKind::Poly => (self.gamma * dot(a, b) + self.coef0).powi(self.degree as i32),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1 / (n_features * mean per-feature variance)`, or 1 for constant data.
pub fn scale_gamma(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len() as f64;
    let dim = rows.first().map_or(0, Vec::len);
    if dim == 0 || rows.is_empty() {
        return 1.0;
    }
    let mut total = 0.0;
    for c in 0..dim {
        let mean = rows.iter().map(|r| r[c]).sum::<f64>() / n;
        total += rows.iter().map(|r| (r[c] - mean) * (r[c] - mean)).sum::<f64>() / n;
    }
    let mean_var = total / dim as f64;
    if mean_var > 0.0 {
        1.0 / (dim as f64 * mean_var)
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: KernelKind,
    pub degree: u32,
    /// Explicit kernel width; `None` uses [`scale_gamma`] on the training data.
    pub gamma: Option<f64>,
    pub tol: f64,
    /// Pair-update cap; `None` means `10 n^2`.
    pub max_iter: Option<usize>,
    /// Kernel row cache budget in bytes.
    pub cache_bytes: usize,
}

impl SvmParams {
    pub fn new(c: f64, kernel: KernelKind) -> Self {
        Self {
            c,
            kernel,
            degree: 2,
            gamma: None,
            tol: 1e-3,
            max_iter: None,
            cache_bytes: 256 << 20,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Parameter(format!("C must be positive, got {}", self.c)));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Parameter("tolerance must be positive".into()));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Parameter(format!("gamma must be positive, got {g}")));
            }
        }
        Ok(())
    }

    pub fn resolve_kernel(&self, rows: &[Vec<f64>]) -> Kernel {
        let gamma = self.gamma.unwrap_or_else(|| scale_gamma(rows));
        match self.kernel {
            KernelKind::Linear => Kernel::linear(),
            KernelKind::Rbf => Kernel {
                kind: KernelKind::Rbf,
                gamma,
                degree: 0,
                coef0: 0.0,
            },
            KernelKind::Poly => Kernel {
                kind: KernelKind::Poly,
                gamma,
                degree: self.degree,
                coef0: 1.0,
            },
        }
    }
}

/// Kernel rows `Q_i = y_i y_j K(x_i, x_j)` kept in a bounded FIFO cache.
struct QCache<'a> {
    rows: &'a [Vec<f64>],
    y: &'a [f64],
    kernel: Kernel,
    cache: HashMap<usize, Arc<[f64]>>,
    order: VecDeque<usize>,
    capacity: usize,
    diag: Vec<f64>,
}

impl<'a> QCache<'a> {
    fn new(rows: &'a [Vec<f64>], y: &'a [f64], kernel: Kernel, cache_bytes: usize) -> Self {
        let n = rows.len();
        let capacity = (cache_bytes / (8 * n.max(1))).max(2);
        let diag = rows.iter().map(|r| kernel.eval(r, r)).collect();
        Self {
            rows,
            y,
            kernel,
            cache: HashMap::new(),
            order: VecDeque::new(),
            capacity,
            diag,
        }
    }

    fn row(&mut self, i: usize) -> Arc<[f64]> {
        if let Some(r) = self.cache.get(&i) {
            return Arc::clone(r);
        }
        let xi = &self.rows[i];
        let yi = self.y[i];
        let row: Arc<[f64]> = self
            .rows
            .iter()
            .zip(self.y)
            .map(|(xj, &yj)| yi * yj * self.kernel.eval(xi, xj))
            .collect();
        if self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.cache.remove(&old);
            }
        }
        self.order.push_back(i);
        self.cache.insert(i, Arc::clone(&row));
        row
    }
}

/// Solution of one binary dual problem.
#[derive(Debug, Clone)]
pub struct BinarySolution {
    pub alpha: Vec<f64>,
    /// Decision function is `sum_i alpha_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    /// Dual objective `1/2 a'Qa - sum(a)` at the solution.
    pub objective: f64,
    /// Maximal KKT violation `m(a) - M(a)` at exit.
    pub kkt_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

const TAU: f64 = 1e-12;

/// Solves `min 1/2 a'Qa - e'a  s.t.  0 <= a <= C, y'a = 0` by SMO with
/// maximal-violating-pair working set selection. Labels must be +1 or -1.
pub fn solve_binary(rows: &[Vec<f64>], y: &[f64], kernel: Kernel, params: &SvmParams) -> Result<BinarySolution> {
    params.validate()?;
    let n = rows.len();
    if n != y.len() {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::Parameter("binary labels must be +1 or -1".into()));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::Parameter("binary problem needs both classes".into()));
    }
    let c = params.c;
    let max_iter = params.max_iter.unwrap_or_else(|| (10 * n * n).max(100));
    let mut q = QCache::new(rows, y, kernel, params.cache_bytes);
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let mut gap;
    loop {
        let mut i = usize::MAX;
        let mut j = usize::MAX;
        let mut m_up = f64::NEG_INFINITY;
        let mut m_low = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > m_up {
                m_up = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < m_low {
                m_low = v;
                j = t;
            }
        }
        gap = m_up - m_low;
        if i == usize::MAX || j == usize::MAX || gap < params.tol {
            gap = gap.max(0.0);
            break;
        }
        if iterations >= max_iter {
            log::warn!("SMO stopped after {iterations} pair updates with KKT gap {gap:.3e}");
            break;
        }
        iterations += 1;

        let qi = q.row(i);
        let qj = q.row(j);
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        // two-variable subproblem, following the standard analytic update
        if y[i] != y[j] {
            let quad = (q.diag[i] + q.diag[j] + 2.0 * qi[j]).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q.diag[i] + q.diag[j] - 2.0 * qi[j]).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_ai, alpha[j] - old_aj);
        for t in 0..n {
            grad[t] += qi[t] * di + qj[t] * dj;
        }
    }

    let rho = compute_rho(&alpha, &grad, y, c);
    let objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
    let converged = gap < params.tol;
    Ok(BinarySolution {
        alpha,
        rho,
        objective,
        kkt_gap: gap,
        iterations,
        converged,
    })
}

fn compute_rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// One trained class pair.
#[derive(Debug, Clone)]
pub struct PairModel {
    /// Class predicted for a positive decision value.
    pub positive: usize,
    pub negative: usize,
    pub support: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
    pub converged: bool,
}

impl PairModel {
    pub fn decision(&self, kernel: &Kernel, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, &c)| c * kernel.eval(s, x))
            .sum::<f64>()
            - self.rho
    }
}

#[derive(Debug, Clone)]
pub struct SvmModel {
    pub params: SvmParams,
    pub kernel: Kernel,
    pub n_classes: usize,
    pub pairs: Vec<PairModel>,
    dim: usize,
}

impl SvmModel {
    pub fn fit(rows: &[Vec<f64>], labels: &[usize], n_classes: usize, params: SvmParams) -> Result<Self> {
        params.validate()?;
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: labels.len(),
            });
        }
        let mut present: Vec<usize> = labels.to_vec();
        present.sort_unstable();
        present.dedup();
        if present.len() < 2 {
            return Err(Error::Parameter("SVM needs at least two classes".into()));
        }
        let dim = rows[0].len();
        let kernel = params.resolve_kernel(rows);
        let mut pairs = Vec::new();
        for (a_idx, &a) in present.iter().enumerate() {
            for &b in &present[a_idx + 1..] {
                let idx: Vec<usize> = (0..rows.len()).filter(|&i| labels[i] == a || labels[i] == b).collect();
                let sub: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
                let y: Vec<f64> = idx.iter().map(|&i| if labels[i] == a { 1.0 } else { -1.0 }).collect();
                let sol = solve_binary(&sub, &y, kernel, &params)?;
                let mut support = Vec::new();
                let mut coef = Vec::new();
                for (t, &al) in sol.alpha.iter().enumerate() {
                    if al > 0.0 {
                        support.push(sub[t].clone());
                        coef.push(al * y[t]);
                    }
                }
                pairs.push(PairModel {
                    positive: a,
                    negative: b,
                    support,
                    coef,
                    rho: sol.rho,
                    converged: sol.converged,
                });
            }
        }
        Ok(Self {
            params,
            kernel,
            n_classes,
            pairs,
            dim,
        })
    }

    /// Whether every pairwise solver met the KKT tolerance.
    pub fn converged(&self) -> bool {
        self.pairs.iter().all(|p| p.converged)
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut votes = vec![0.0; self.n_classes];
        for p in &self.pairs {
            let winner = if p.decision(&self.kernel, x) > 0.0 {
                p.positive
            } else {
                p.negative
            };
            votes[winner] += 1.0;
        }
        Ok(argmax_lowest(&votes))
    }

    pub fn predict(&self, xs: &[Vec<f64>]) -> Result<Vec<usize>> {
        xs.iter().map(|x| self.predict_one(x)).collect()
    }
}
