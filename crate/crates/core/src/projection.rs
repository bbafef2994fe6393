//! Draw-wise projections of weight vectors onto the probability simplex,
//! the resulting discrepancy, and temperature selection.

use crate::mixing::WeightDraws;
use crate::sampler::DrawValues;
use crate::stats::Summary;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("temperature {0} is outside the allowed range for {1}")]
    Temperature(f64, &'static str),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("weight vector is empty or not finite")]
    BadWeights,
    #[error("candidate temperature grid is empty")]
    EmptyGrid,
}

type Result<T> = std::result::Result<T, ProjectionError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionKind {
    /// `exp(w / t)` normalised; `t > 0`.
    Softmax,
    /// Penalised-L2 projection with exact zeros; `T < 1`, `T = 0` is sparsemax.
    Sparsegen,
}

impl ProjectionKind {
    pub fn name(self) -> &'static str {
        match self {
            ProjectionKind::Softmax => "softmax",
            ProjectionKind::Sparsegen => "sparsegen",
        }
    }

    pub fn check_temperature(self, t: f64) -> Result<()> {
        let ok = match self {
            ProjectionKind::Softmax => t > 0.0 && t.is_finite(),
            ProjectionKind::Sparsegen => t < 1.0 && t.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(ProjectionError::Temperature(t, self.name()))
        }
    }
}

fn check_weights(w: &[f64]) -> Result<()> {
    if w.is_empty() || w.iter().any(|v| !v.is_finite()) {
        return Err(ProjectionError::BadWeights);
    }
    Ok(())
}

pub fn softmax_project(w: &[f64], t: f64) -> Result<Vec<f64>> {
    ProjectionKind::Softmax.check_temperature(t)?;
    check_weights(w)?;
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = w.iter().map(|v| ((v - max) / t).exp()).collect();
    let total: f64 = e.iter().sum();
    Ok(e.into_iter().map(|v| v / total).collect())
}

/// `u_l = [(w_l - lambda_Q) / (1 - T)]_+`, with `Q` the number of
/// coordinates left in the support.
pub fn sparsegen_project(w: &[f64], t: f64) -> Result<Vec<f64>> {
    ProjectionKind::Sparsegen.check_temperature(t)?;
    check_weights(w)?;
    let mut sorted = w.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    let mut q = 1;
    let mut top = sorted[0];
    for (i, &v) in sorted.iter().enumerate() {
        prefix += v;
        if 1.0 - t + (i + 1) as f64 * v > prefix {
            q = i + 1;
            top = prefix;
        }
    }
    let lambda = (top - 1.0 + t) / q as f64;
    Ok(w.iter().map(|v| ((v - lambda) / (1.0 - t)).max(0.0)).collect())
}

pub fn project(kind: ProjectionKind, w: &[f64], t: f64) -> Result<Vec<f64>> {
    match kind {
        ProjectionKind::Softmax => softmax_project(w, t),
        ProjectionKind::Sparsegen => sparsegen_project(w, t),
    }
}

/// Simplex-valued draws `u(x)` aligned with the weight draws they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedWeights {
    pub kind: ProjectionKind,
    pub temperature: f64,
    pub draws: DrawValues,
}

/// Project every draw at every point.
pub fn project_draws(weights: &WeightDraws, kind: ProjectionKind, t: f64) -> Result<ProjectedWeights> {
    kind.check_temperature(t)?;
    let k = weights.k();
    let values: Vec<Vec<f64>> = weights
        .draws
        .values
        .par_chunks(k)
        .map(|w| project(kind, w, t))
        .collect::<Result<_>>()?;
    Ok(ProjectedWeights {
        kind,
        temperature: t,
        draws: DrawValues {
            values: values.concat(),
            ..weights.draws.clone()
        },
    })
}

/// `delta(x) = sum_l (w_l(x) - u_l(x)) fhat_l(x)` per draw and point.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrepancy {
    pub draws: DrawValues,
    pub summaries: Vec<Summary>,
}

impl Discrepancy {
    pub fn posterior_mean(&self) -> Vec<f64> {
        self.summaries.iter().map(|s| s.mean).collect()
    }
}

pub fn discrepancy(weights: &WeightDraws, projected: &ProjectedWeights, fhat: &[Vec<f64>]) -> Result<Discrepancy> {
    let (w, u) = (&weights.draws, &projected.draws);
    if (w.points, w.draws, w.dim) != (u.points, u.draws, u.dim) {
        return Err(ProjectionError::Dimension {
            expected: w.values.len(),
            got: u.values.len(),
        });
    }
    if fhat.len() != w.points {
        return Err(ProjectionError::Dimension {
            expected: w.points,
            got: fhat.len(),
        });
    }
    if let Some(row) = fhat.iter().find(|r| r.len() != w.dim) {
        return Err(ProjectionError::Dimension {
            expected: w.dim,
            got: row.len(),
        });
    }
    let mut values = Vec::with_capacity(w.points * w.draws);
    for (i, f) in fhat.iter().enumerate() {
        for d in 0..w.draws {
            let wd = w.at(i, d);
            let ud = u.at(i, d);
            values.push((0..w.dim).map(|l| (wd[l] - ud[l]) * f[l]).sum());
        }
    }
    let draws = DrawValues {
        points: w.points,
        draws: w.draws,
        dim: 1,
        values,
    };
    let summaries = draws.summaries(0);
    Ok(Discrepancy { draws, summaries })
}

/// 50 equally spaced sparsegen temperatures in `[0, 0.9]`.
pub fn default_sparsegen_grid() -> Vec<f64> {
    (0..50).map(|i| 0.9 * i as f64 / 49.0).collect()
}

/// Sum over validation points of the squared posterior-mean discrepancy.
pub fn temperature_objective(weights: &WeightDraws, fhat: &[Vec<f64>], kind: ProjectionKind, t: f64) -> Result<f64> {
    let projected = project_draws(weights, kind, t)?;
    let delta = discrepancy(weights, &projected, fhat)?;
    Ok(delta.posterior_mean().iter().map(|d| d * d).sum())
}

/// Grid minimiser of [`temperature_objective`], ties to the smaller
/// temperature. Returns the chosen temperature and every objective value.
pub fn select_temperature(
    candidates: &[f64],
    weights: &WeightDraws,
    fhat: &[Vec<f64>],
    kind: ProjectionKind,
) -> Result<(f64, Vec<f64>)> {
    if candidates.is_empty() {
        return Err(ProjectionError::EmptyGrid);
    }
    let objectives: Vec<f64> = candidates
        .iter()
        .map(|&t| temperature_objective(weights, fhat, kind, t))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for i in 1..candidates.len() {
        let (a, b) = (objectives[i], objectives[best]);
        if a < b || (a == b && candidates[i] < candidates[best]) {
            best = i;
        }
    }
    Ok((candidates[best], objectives))
}
