//! Finite differences and differential-geometric quantities of the
//! time-augmented curve `t -> (t, x_t)`.

use crate::error::{Error, Result};
use crate::series::{laplacian_smooth, smooth_values, UniformSeries, MIN_UNIFORM_SAMPLES};

/// Derivative estimate along each coordinate of a row-major buffer: central
/// differences inside, first-order one-sided differences at both ends.
pub fn finite_difference_values(values: &[f64], dim: usize, step: f64) -> Result<Vec<f64>> {
    let len = values.len() / dim;
    if len < MIN_UNIFORM_SAMPLES {
        return Err(Error::TooShort {
            len,
            min: MIN_UNIFORM_SAMPLES,
        });
    }
    let mut out = vec![0.0; values.len()];
    let at = |k: usize, c: usize| values[k * dim + c];
    for c in 0..dim {
        out[c] = (at(1, c) - at(0, c)) / step;
        for k in 1..len - 1 {
            out[k * dim + c] = (at(k + 1, c) - at(k - 1, c)) / (2.0 * step);
        }
        out[(len - 1) * dim + c] = (at(len - 1, c) - at(len - 2, c)) / step;
    }
    Ok(out)
}

pub fn finite_difference(us: &UniformSeries) -> Result<UniformSeries> {
    let d = finite_difference_values(us.values(), us.dim(), us.step())?;
    Ok(us.with_values(d))
}

/// Speed of the augmented velocity `(1, x')`.
pub fn speed(first_deriv: &[f64]) -> f64 {
    (1.0 + first_deriv.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// Curvature magnitude of the augmented curve.
///
/// For one dimension this is the closed form `|x''| / (1 + x'^2)^{3/2}`.
/// Otherwise the augmented velocity is normalized pointwise, the unit
/// tangent is differentiated numerically and its rate of turn is divided by
/// the speed, which reduces to the same closed form when `d = 1`.
pub fn curvature_magnitude(first: &UniformSeries, second: &UniformSeries) -> Result<Vec<f64>> {
    check_aligned(first, second)?;
    if first.dim() == 1 {
        return Ok(first
            .values()
            .iter()
            .zip(second.values())
            .map(|(&v, &a)| a.abs() / (1.0 + v * v).powf(1.5))
            .collect());
    }
    let turn = tangent_turn_rate(first, 0)?;
    Ok(turn
        .iter()
        .enumerate()
        .map(|(k, &w)| w / speed(first.point(k)))
        .collect())
}

/// `|| d/dt (v / ||v||) ||` for `v = (1, x')`, with the derivative of the unit
/// tangent smoothed `smoothing` times before taking its norm.
fn tangent_turn_rate(first: &UniformSeries, smoothing: usize) -> Result<Vec<f64>> {
    let dim = first.dim() + 1;
    let mut tangent = Vec::with_capacity(first.len() * dim);
    for k in 0..first.len() {
        let p = first.point(k);
        let s = speed(p);
        tangent.push(1.0 / s);
        tangent.extend(p.iter().map(|v| v / s));
    }
    let dt = finite_difference_values(&tangent, dim, first.step())?;
    let dt = smooth_values(&dt, dim, smoothing);
    Ok(dt
        .chunks_exact(dim)
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect())
}

/// Signed curvature `x'' / (1 + x'^2)^{3/2}`; univariate only.
pub fn signed_curvature(first: &UniformSeries, second: &UniformSeries) -> Result<Vec<f64>> {
    if first.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: first.dim(),
        });
    }
    check_aligned(first, second)?;
    Ok(first
        .values()
        .iter()
        .zip(second.values())
        .map(|(&v, &a)| a / (1.0 + v * v).powf(1.5))
        .collect())
}

fn check_aligned(a: &UniformSeries, b: &UniformSeries) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// How many smoothing passes to apply at each stage of [`build_stack_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmoothingPlan {
    /// Passes applied to the raw positions.
    pub position: usize,
    /// Passes applied to each derived quantity after differentiating.
    pub derivatives: usize,
}

impl SmoothingPlan {
    pub fn uniform(iterations: usize) -> Self {
        Self {
            position: iterations,
            derivatives: iterations,
        }
    }
}

/// Per-sample geometric signals derived from one series.
#[derive(Debug, Clone)]
pub struct GeometricStack {
    pub base: UniformSeries,
    pub first_deriv: UniformSeries,
    pub second_deriv: UniformSeries,
    pub speed: Vec<f64>,
    pub speed_deriv: Vec<f64>,
    pub curvature: Vec<f64>,
    /// Present only for univariate input.
    pub signed_curvature: Option<Vec<f64>>,
}

impl GeometricStack {
    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }
}

/// Smooth, differentiate, smooth, differentiate again and derive the
/// speed and curvature signals, using the same pass count throughout.
pub fn build_stack(us: &UniformSeries, smoothing_iterations: usize) -> Result<GeometricStack> {
    build_stack_with(us, SmoothingPlan::uniform(smoothing_iterations))
}

pub fn build_stack_with(us: &UniformSeries, plan: SmoothingPlan) -> Result<GeometricStack> {
    let base = laplacian_smooth(us, plan.position);
    let first = laplacian_smooth(&finite_difference(&base)?, plan.derivatives);
    let second = laplacian_smooth(&finite_difference(&first)?, plan.derivatives);

    let speed: Vec<f64> = (0..first.len()).map(|k| speed(first.point(k))).collect();
    let speed_deriv = smooth_values(
        &finite_difference_values(&speed, 1, us.step())?,
        1,
        plan.derivatives,
    );

    let (curvature, signed) = if us.dim() == 1 {
        // built from the already smoothed derivatives so |signed| == curvature
        (
            curvature_magnitude(&first, &second)?,
            Some(signed_curvature(&first, &second)?),
        )
    } else {
        let turn = tangent_turn_rate(&first, plan.derivatives)?;
        let curv = turn.iter().zip(&speed).map(|(w, s)| w / s).collect();
        (curv, None)
    };

    Ok(GeometricStack {
        base,
        first_deriv: first,
        second_deriv: second,
        speed,
        speed_deriv,
        curvature,
        signed_curvature: signed,
    })
}
