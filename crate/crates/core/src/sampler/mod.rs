//! Backfitting MCMC over `(T_j, M_j, Z_j, gamma_j)` and `sigma^2`, for both
//! scalar regression and `K`-model mixing, plus posterior prediction.

pub mod conjugate;
mod state;

pub use state::{EnsembleState, MoveStats, TreeState, UpdateFlags};

use crate::data::{DataError, Scaling, TrainingData};
use crate::path::{BandwidthPrior, CompiledTree, PathError, PathKernel};
use crate::stats::{summarize, Summary};
use crate::tree::{CutpointGrid, Tree, TreeError, TreePrior};
use conjugate::LeafPrior;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid hyperparameter {name}: {reason}")]
    Invalid { name: &'static str, reason: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

fn invalid(name: &'static str, reason: impl Into<String>) -> SamplerError {
    SamplerError::Invalid { name, reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub burn_in: usize,
    pub draws: usize,
    pub thin: usize,
    /// Sweeps during which the bandwidth proposal scale adapts.
    pub adaptation: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            burn_in: 1000,
            draws: 1000,
            thin: 1,
            adaptation: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    pub m: usize,
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub q: f64,
    pub nu: f64,
    /// Scale of the error-variance prior; calibrated from `sigma2_hat` when absent.
    pub lambda: Option<f64>,
    /// Prior guess for the error variance; a least-squares fit when absent.
    pub sigma2_hat: Option<f64>,
    pub n_cut: usize,
    pub schedule: Schedule,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            m: 20,
            k: 1.0,
            alpha: 0.95,
            beta: 2.0,
            alpha1: 2.0,
            alpha2: 20.0,
            q: 1.0,
            nu: 10.0,
            lambda: None,
            sigma2_hat: None,
            n_cut: 100,
            schedule: Schedule::default(),
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let positive = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be positive, got {v}")))
            }
        };
        if self.m == 0 {
            return Err(invalid("m", "must be at least 1"));
        }
        positive("k", self.k)?;
        TreePrior::new(self.alpha, self.beta).map_err(|e| invalid("alpha/beta", e.to_string()))?;
        positive("alpha1", self.alpha1)?;
        positive("alpha2", self.alpha2)?;
        positive("q", self.q)?;
        positive("nu", self.nu)?;
        if let Some(l) = self.lambda {
            positive("lambda", l)?;
        }
        if let Some(s) = self.sigma2_hat {
            positive("sigma2_hat", s)?;
        }
        if self.n_cut == 0 {
            return Err(invalid("n_cut", "must be at least 1"));
        }
        if self.schedule.thin == 0 {
            return Err(invalid("thin", "must be at least 1"));
        }
        if self.schedule.adaptation > self.schedule.burn_in {
            return Err(invalid("adaptation", "step-size adaptation must end by the end of burn-in"));
        }
        Ok(())
    }

    pub fn tree_prior(&self) -> Result<TreePrior, SamplerError> {
        Ok(TreePrior::new(self.alpha, self.beta)?)
    }

    pub fn bandwidth_prior(&self) -> Result<BandwidthPrior, SamplerError> {
        Ok(BandwidthPrior::new(self.alpha1, self.alpha2)?)
    }
}

/// Regression (`K = 1`, model vector fixed at 1) or mixing of `K` models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Regression,
    Mixing { models: usize },
}

impl Mode {
    pub fn dim(&self) -> usize {
        match *self {
            Mode::Regression => 1,
            Mode::Mixing { models } => models,
        }
    }
}

/// Leaf prior scale `tau` and mean vector.
///
/// Regression: `tau = (y_max - y_min) / (2 k sqrt(m))`, mean 0.
/// Mixing: `tau = 1 / (2 k sqrt(m))`, mean `1 / (m K)` per coordinate.
pub fn tau_and_prior_mean(
    hyper: &Hyperparameters,
    mode: Mode,
    y_range: Option<(f64, f64)>,
) -> Result<(f64, Vec<f64>), SamplerError> {
    let scale = 2.0 * hyper.k * (hyper.m as f64).sqrt();
    match mode {
        Mode::Regression => {
            let (lo, hi) = y_range.ok_or_else(|| invalid("y_range", "regression needs the response range"))?;
            if !(hi > lo) {
                return Err(invalid("y_range", format!("y_max {hi} must exceed y_min {lo}")));
            }
            Ok(((hi - lo) / scale, vec![0.0]))
        }
        Mode::Mixing { models } => {
            if models == 0 {
                return Err(invalid("K", "must be at least 1"));
            }
            let mean = 1.0 / (hyper.m * models) as f64;
            Ok((1.0 / scale, vec![mean; models]))
        }
    }
}

/// `lambda` placing the mode of `nu lambda / chi^2_nu` at `sigma2_hat`.
pub fn calibrate_lambda(sigma2_hat: f64, nu: f64) -> f64 {
    sigma2_hat * (nu + 2.0) / nu
}

/// Residual variance of a least-squares fit: `y` on `[1, X]` for regression,
/// on the model outputs for mixing. Falls back to the sample variance when
/// the design has too few rows. Floored at `1e-6` times the sample variance,
/// or times the mean square of `y` (or 1) for a constant response.
pub fn estimate_sigma2(data: &TrainingData) -> f64 {
    let n = data.n();
    let cols = if data.is_mixing() { data.k() } else { data.p() + 1 };
    let y = DVector::from_row_slice(data.y());
    let sample_var = {
        let mean = y.mean();
        y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64
    };
    // an exact fit would put the whole prior on sigma^2 = 0
    let scale = if sample_var > 0.0 { sample_var } else { y.norm_squared() / n as f64 };
    let floor = 1e-6 * if scale > 0.0 { scale } else { 1.0 };
    if n <= cols + 1 {
        return sample_var.max(floor);
    }
    let design = DMatrix::from_fn(n, cols, |i, c| match data.fhat(i) {
        Some(f) => f[c],
        None if c == 0 => 1.0,
        None => data.x(i)[c - 1],
    });
    let svd = design.clone().svd(true, true);
    let rank = svd.rank(1e-10);
    let sse = match svd.solve(&y, 1e-10) {
        Ok(coef) => (&y - &design * coef).norm_squared(),
        Err(_) => return sample_var.max(floor),
    };
    (sse / (n - rank) as f64).max(floor)
}

/// Resolved prior used by the sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPrior {
    pub tree: TreePrior,
    pub bandwidth: BandwidthPrior,
    pub leaf: LeafPrior,
    pub q: f64,
    pub nu: f64,
    pub lambda: f64,
}

/// One tree of a retained draw, compacted, with leaf values in depth-first
/// leaf order (`B x K` row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct DrawTree {
    pub tree: Tree,
    pub gamma: f64,
    pub leaf_values: Vec<f64>,
}

impl DrawTree {
    /// Add this tree's smooth output at scaled `x` to `out`.
    pub fn accumulate(&self, grid: &CutpointGrid, q: f64, x: &[f64], out: &mut [f64]) {
        let mut phi = Vec::new();
        CompiledDrawTree::new(self, grid, q).accumulate(x, &mut phi, out);
    }
}

/// A [`DrawTree`] prepared for repeated evaluation.
#[derive(Debug, Clone)]
pub struct CompiledDrawTree<'a> {
    compiled: CompiledTree,
    kernel: PathKernel,
    leaf_values: &'a [f64],
}

impl<'a> CompiledDrawTree<'a> {
    pub fn new(tree: &'a DrawTree, grid: &CutpointGrid, q: f64) -> Self {
        CompiledDrawTree {
            compiled: CompiledTree::new(&tree.tree, grid),
            kernel: PathKernel::new(tree.gamma, q).expect("stored bandwidth is valid"),
            leaf_values: &tree.leaf_values,
        }
    }

    pub fn accumulate(&self, x: &[f64], phi: &mut Vec<f64>, out: &mut [f64]) {
        let k = out.len();
        self.compiled.probs_into(&self.kernel, x, phi);
        for (b, &p) in phi.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (o, &mu) in out.iter_mut().zip(&self.leaf_values[b * k..(b + 1) * k]) {
                *o += p * mu;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraw {
    pub index: usize,
    pub sigma2: f64,
    pub trees: Vec<DrawTree>,
}

/// Acceptance counts and timing of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub moves: MoveStats,
    pub sigma2_trace: Vec<f64>,
    pub seconds: f64,
}

/// Retained draws with everything needed to predict on the original scale.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub mode: Mode,
    pub scaling: Scaling,
    pub grid: CutpointGrid,
    pub hyper: Hyperparameters,
    pub tau: f64,
    pub prior_mean: Vec<f64>,
    /// Added back to regression predictions (the response is centred for
    /// fitting).
    pub response_shift: f64,
    pub seed: u64,
    pub labels: Labels,
    pub draws: Vec<PosteriorDraw>,
    pub diagnostics: Diagnostics,
}

/// Column names carried with a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub covariates: Vec<String>,
    /// Mixed model identifiers; empty for regression.
    pub models: Vec<String>,
}

impl Labels {
    /// `x1..xp` and, for mixing, `f1..fK`.
    pub fn generic(p: usize, mode: Mode) -> Self {
        Labels {
            covariates: (1..=p).map(|i| format!("x{i}")).collect(),
            models: match mode {
                Mode::Regression => Vec::new(),
                Mode::Mixing { models } => (1..=models).map(|i| format!("f{i}")).collect(),
            },
        }
    }
}

/// Per-draw evaluations at a set of points, laid out `[point][draw][K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawValues {
    pub points: usize,
    pub draws: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl DrawValues {
    pub fn at(&self, point: usize, draw: usize) -> &[f64] {
        let start = (point * self.draws + draw) * self.dim;
        &self.values[start..start + self.dim]
    }

    /// Draws of coordinate `l` at `point`.
    pub fn coordinate(&self, point: usize, l: usize) -> Vec<f64> {
        (0..self.draws).map(|d| self.at(point, d)[l]).collect()
    }

    pub fn summaries(&self, l: usize) -> Vec<Summary> {
        (0..self.points).map(|i| summarize(&self.coordinate(i, l))).collect()
    }
}

/// Regression predictions: per-draw values and pointwise summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub draws: DrawValues,
    pub summaries: Vec<Summary>,
}

impl Posterior {
    pub fn p(&self) -> usize {
        self.scaling.dims()
    }

    pub fn dim(&self) -> usize {
        self.mode.dim()
    }

    /// Sum-of-trees output at raw inputs for every draw (no response shift).
    pub fn evaluate(&self, points: &[Vec<f64>]) -> Result<DrawValues, SamplerError> {
        let scaled = points
            .iter()
            .map(|x| self.scaling.apply(x))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.evaluate_scaled(&scaled))
    }

    /// As [`Posterior::evaluate`] for inputs already in `[0, 1]^p`.
    pub fn evaluate_scaled(&self, scaled: &[Vec<f64>]) -> DrawValues {
        let k = self.dim();
        let compiled: Vec<Vec<CompiledDrawTree>> = self
            .draws
            .par_iter()
            .map(|d| d.trees.iter().map(|t| CompiledDrawTree::new(t, &self.grid, self.hyper.q)).collect())
            .collect();
        let per_point: Vec<Vec<f64>> = scaled
            .par_iter()
            .map(|x| {
                let mut phi = Vec::new();
                let mut out = vec![0.0; self.draws.len() * k];
                for (d, trees) in compiled.iter().enumerate() {
                    let slot = &mut out[d * k..(d + 1) * k];
                    for t in trees {
                        t.accumulate(x, &mut phi, slot);
                    }
                }
                out
            })
            .collect();
        DrawValues {
            points: scaled.len(),
            draws: self.draws.len(),
            dim: k,
            values: per_point.concat(),
        }
    }

    /// Smooth mean predictions with 95% intervals (regression).
    pub fn predict(&self, points: &[Vec<f64>]) -> Result<Prediction, SamplerError> {
        if self.mode != Mode::Regression {
            return Err(invalid("mode", "predict needs a regression fit; use mixed_prediction"));
        }
        let mut draws = self.evaluate(points)?;
        for v in draws.values.iter_mut() {
            *v += self.response_shift;
        }
        let summaries = draws.summaries(0);
        Ok(Prediction { draws, summaries })
    }
}

/// Fit by MCMC. Inputs must already be validated in `data`.
pub fn run_mcmc(data: &TrainingData, hyper: &Hyperparameters, seed: u64) -> Result<Posterior, SamplerError> {
    run_mcmc_with(data, hyper, seed, UpdateFlags::default())
}

/// As [`run_mcmc`] with selected updates disabled; `use_likelihood = false`
/// samples the prior.
pub fn run_mcmc_with(
    data: &TrainingData,
    hyper: &Hyperparameters,
    seed: u64,
    flags: UpdateFlags,
) -> Result<Posterior, SamplerError> {
    hyper.validate()?;
    let started = Instant::now();
    let mode = if data.is_mixing() {
        Mode::Mixing { models: data.k() }
    } else {
        Mode::Regression
    };
    let y = data.y();
    let y_min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let y_max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (tau, prior_mean, shift) = match mode {
        Mode::Regression => {
            // a constant response still gets a usable leaf scale
            let (lo, hi) = if y_max > y_min { (y_min, y_max) } else { (y_min - 0.5, y_min + 0.5) };
            let (tau, mean) = tau_and_prior_mean(hyper, mode, Some((lo, hi)))?;
            (tau, mean, 0.5 * (y_min + y_max))
        }
        Mode::Mixing { .. } => {
            let (tau, mean) = tau_and_prior_mean(hyper, mode, None)?;
            (tau, mean, 0.0)
        }
    };
    let mut centered = data.clone();
    for v in centered.y_mut().iter_mut() {
        *v -= shift;
    }
    let sigma2_hat = hyper.sigma2_hat.unwrap_or_else(|| estimate_sigma2(&centered));
    let lambda = hyper.lambda.unwrap_or_else(|| calibrate_lambda(sigma2_hat, hyper.nu));
    let prior = ModelPrior {
        tree: hyper.tree_prior()?,
        bandwidth: hyper.bandwidth_prior()?,
        leaf: LeafPrior { tau2: tau * tau, mu0: prior_mean.clone() },
        q: hyper.q,
        nu: hyper.nu,
        lambda,
    };
    let grid = CutpointGrid::uniform(data.p(), hyper.n_cut)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = EnsembleState::new(centered, prior, grid.clone(), hyper.m, sigma2_hat)?;
    state.set_flags(flags);

    let sched = hyper.schedule;
    let total = sched.burn_in + sched.draws * sched.thin;
    let mut draws = Vec::with_capacity(sched.draws);
    let mut trace = Vec::with_capacity(total);
    for sweep in 0..total {
        state.set_adapting(sweep < sched.adaptation);
        state.sweep(&mut rng)?;
        trace.push(state.sigma2());
        if sweep >= sched.burn_in && (sweep - sched.burn_in + 1).is_multiple_of(sched.thin) {
            draws.push(state.snapshot(draws.len()));
        }
    }
    let mut resolved = hyper.clone();
    resolved.lambda = Some(lambda);
    resolved.sigma2_hat = Some(sigma2_hat);
    Ok(Posterior {
        mode,
        scaling: data.scaling().clone(),
        grid,
        hyper: resolved,
        tau,
        prior_mean,
        response_shift: shift,
        seed,
        labels: Labels::generic(data.p(), mode),
        draws,
        diagnostics: Diagnostics {
            moves: state.move_stats().clone(),
            sigma2_trace: trace,
            seconds: started.elapsed().as_secs_f64(),
        },
    })
}
