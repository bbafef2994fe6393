//! Model-output grids, bilinear regridding, and the model-mixing wrappers
//! around the sampler: fitting, weight functions, mixed predictions.

use crate::data::{DataError, Scaling, TrainingData};
use crate::sampler::{run_mcmc_with, DrawValues, Hyperparameters, Mode, Posterior, Prediction, SamplerError, UpdateFlags};
use crate::stats::{summarize, Summary};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MixingError {
    #[error("grid {id}: {reason}")]
    Grid { id: String, reason: String },
    #[error("grid {id}: point ({x}, {y}) lies outside the grid")]
    OutOfDomain { id: String, x: f64, y: f64 },
    #[error("expected {expected} model columns, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("posterior is not a mixing fit")]
    NotMixing,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

type Result<T> = std::result::Result<T, MixingError>;

/// Output of one simulator on a rectilinear 2-D grid, `values[i][j]` at
/// `(axes[0][i], axes[1][j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutputGrid {
    id: String,
    axes: [Vec<f64>; 2],
    values: Vec<f64>,
    period: [Option<f64>; 2],
}

fn monotone(axis: &[f64]) -> Option<bool> {
    if axis.len() < 2 || axis.iter().any(|v| !v.is_finite()) {
        return None;
    }
    if axis.windows(2).all(|w| w[1] > w[0]) {
        Some(true)
    } else if axis.windows(2).all(|w| w[1] < w[0]) {
        Some(false)
    } else {
        None
    }
}

impl ModelOutputGrid {
    /// `values` is row-major over `(axis0, axis1)`. Decreasing axes are
    /// accepted and stored in increasing order.
    pub fn new(id: &str, axis0: Vec<f64>, axis1: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let err = |reason: String| MixingError::Grid { id: id.to_string(), reason };
        let inc0 = monotone(&axis0).ok_or_else(|| err("axis 0 must be strictly monotone with 2+ nodes".into()))?;
        let inc1 = monotone(&axis1).ok_or_else(|| err("axis 1 must be strictly monotone with 2+ nodes".into()))?;
        let (n0, n1) = (axis0.len(), axis1.len());
        if values.len() != n0 * n1 {
            return Err(err(format!("{} values for a {n0} x {n1} grid", values.len())));
        }
        let mut grid = ModelOutputGrid {
            id: id.to_string(),
            axes: [axis0, axis1],
            values,
            period: [None, None],
        };
        if !inc0 {
            grid.axes[0].reverse();
            let rows: Vec<&[f64]> = grid.values.chunks(n1).rev().collect();
            grid.values = rows.concat();
        }
        if !inc1 {
            grid.axes[1].reverse();
            for row in grid.values.chunks_mut(n1) {
                row.reverse();
            }
        }
        Ok(grid)
    }

    /// Build from `(axis0, axis1, value)` triples covering every node once.
    pub fn from_triples(id: &str, triples: &[(f64, f64, f64)]) -> Result<Self> {
        let err = |reason: String| MixingError::Grid { id: id.to_string(), reason };
        let unique = |pick: fn(&(f64, f64, f64)) -> f64| {
            let mut v: Vec<f64> = triples.iter().map(pick).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let a0 = unique(|t| t.0);
        let a1 = unique(|t| t.1);
        if a0.len() * a1.len() != triples.len() {
            return Err(err(format!(
                "{} rows do not form a complete {} x {} grid",
                triples.len(),
                a0.len(),
                a1.len()
            )));
        }
        let mut values = vec![f64::NAN; a0.len() * a1.len()];
        for &(u, v, value) in triples {
            let i = a0.partition_point(|&a| a < u);
            let j = a1.partition_point(|&a| a < v);
            let slot = &mut values[i * a1.len() + j];
            if !slot.is_nan() {
                return Err(err(format!("duplicate node ({u}, {v})")));
            }
            *slot = value;
        }
        Self::new(id, a0, a1, values)
    }

    /// Treat `axis` as periodic with the given period (e.g. 360 for
    /// longitude), adding a wrap-around cell between the last and first node.
    pub fn with_period(mut self, axis: usize, period: f64) -> Result<Self> {
        let a = &self.axes[axis];
        if !(period > a[a.len() - 1] - a[0]) {
            return Err(MixingError::Grid {
                id: self.id.clone(),
                reason: format!("period {period} must exceed the span of axis {axis}"),
            });
        }
        self.period[axis] = Some(period);
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn axis(&self, a: usize) -> &[f64] {
        &self.axes[a]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.axes[1].len() + j]
    }

    /// Enclosing node indices and fraction along `axis`.
    fn locate(&self, axis: usize, v: f64) -> Option<(usize, usize, f64)> {
        let a = &self.axes[axis];
        let n = a.len();
        let (first, last) = (a[0], a[n - 1]);
        let v = match self.period[axis] {
            Some(p) if v < first || v > last => first + (v - first).rem_euclid(p),
            _ => v,
        };
        if (first..=last).contains(&v) {
            let i = a.partition_point(|&x| x <= v).clamp(1, n - 1) - 1;
            return Some((i, i + 1, (v - a[i]) / (a[i + 1] - a[i])));
        }
        let p = self.period[axis]?;
        // wrap cell from the last node to the first node shifted by a period
        Some((n - 1, 0, (v - last) / (first + p - last)))
    }

    /// Bilinear interpolation at `(u, v)`; exact at nodes, no extrapolation.
    pub fn interpolate(&self, u: f64, v: f64) -> Result<f64> {
        let out = || MixingError::OutOfDomain { id: self.id.clone(), x: u, y: v };
        if !u.is_finite() || !v.is_finite() {
            return Err(out());
        }
        let (i0, i1, s) = self.locate(0, u).ok_or_else(out)?;
        let (j0, j1, t) = self.locate(1, v).ok_or_else(out)?;
        Ok((1.0 - s) * (1.0 - t) * self.value(i0, j0)
            + s * (1.0 - t) * self.value(i1, j0)
            + (1.0 - s) * t * self.value(i0, j1)
            + s * t * self.value(i1, j1))
    }
}

/// Interpolate every grid at every `(u, v)` point: one row of `K` values per
/// point, in grid order.
pub fn bilinear_regrid(grids: &[ModelOutputGrid], points: &[[f64; 2]]) -> Result<Vec<Vec<f64>>> {
    points
        .par_iter()
        .map(|p| grids.iter().map(|g| g.interpolate(p[0], p[1])).collect())
        .collect()
}

/// Fit the mixing model: `y ~ N(fhat(x)' w(x), sigma^2)`. `fhat` holds one
/// row of `K` model outputs per observation; a non-finite entry counts as
/// missing.
pub fn fit_mix(
    x_rows: &[Vec<f64>],
    y: Vec<f64>,
    fhat: &[Vec<f64>],
    model_ids: &[String],
    hyper: &Hyperparameters,
    scaling: Option<Scaling>,
    seed: u64,
) -> Result<Posterior> {
    fit_mix_with(x_rows, y, fhat, model_ids, hyper, scaling, seed, UpdateFlags::default())
}

/// As [`fit_mix`] with selected updates disabled.
#[allow(clippy::too_many_arguments)]
pub fn fit_mix_with(
    x_rows: &[Vec<f64>],
    y: Vec<f64>,
    fhat: &[Vec<f64>],
    model_ids: &[String],
    hyper: &Hyperparameters,
    scaling: Option<Scaling>,
    seed: u64,
    flags: UpdateFlags,
) -> Result<Posterior> {
    let data = TrainingData::new(x_rows, y, Some(fhat), scaling)?;
    if model_ids.len() != data.k() {
        return Err(MixingError::Dimension {
            expected: data.k(),
            got: model_ids.len(),
        });
    }
    let mut post = run_mcmc_with(&data, hyper, seed, flags)?;
    post.labels.models = model_ids.to_vec();
    Ok(post)
}

/// Posterior draws of `w(x)` at a set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightDraws {
    pub model_ids: Vec<String>,
    pub draws: DrawValues,
}

impl WeightDraws {
    pub fn k(&self) -> usize {
        self.draws.dim
    }

    pub fn points(&self) -> usize {
        self.draws.points
    }
}

/// Smooth weight functions at raw input points, per draw.
pub fn weights_at(post: &Posterior, points: &[Vec<f64>]) -> Result<WeightDraws> {
    if !matches!(post.mode, Mode::Mixing { .. }) {
        return Err(MixingError::NotMixing);
    }
    Ok(WeightDraws {
        model_ids: post.labels.models.clone(),
        draws: post.evaluate(points)?,
    })
}

/// Per-draw `fhat' w` at each point, with summaries.
pub fn mixed_prediction(weights: &WeightDraws, fhat: &[Vec<f64>]) -> Result<Prediction> {
    if fhat.len() != weights.points() {
        return Err(MixingError::Dimension {
            expected: weights.points(),
            got: fhat.len(),
        });
    }
    if let Some(row) = fhat.iter().find(|r| r.len() != weights.k()) {
        return Err(MixingError::Dimension {
            expected: weights.k(),
            got: row.len(),
        });
    }
    let w = &weights.draws;
    let mut values = Vec::with_capacity(w.points * w.draws);
    for (i, f) in fhat.iter().enumerate() {
        for d in 0..w.draws {
            values.push(w.at(i, d).iter().zip(f).map(|(a, b)| a * b).sum());
        }
    }
    let draws = DrawValues {
        points: w.points,
        draws: w.draws,
        dim: 1,
        values,
    };
    let summaries = draws.summaries(0);
    Ok(Prediction { draws, summaries })
}

/// Posterior summaries of `sum_l w_l(x)` per point.
pub fn sum_of_weights(weights: &WeightDraws) -> Vec<Summary> {
    let w = &weights.draws;
    (0..w.points)
        .map(|i| {
            let sums: Vec<f64> = (0..w.draws).map(|d| w.at(i, d).iter().sum()).collect();
            summarize(&sums)
        })
        .collect()
}
