//! Prior semivariograms of the sum-of-trees process (regression and mixing),
//! the conditional prior covariance, and the classical empirical estimator.

use crate::data::Scaling;
use crate::path::{path_probs, BandwidthPrior, CompiledTree, PathKernel};
use crate::sampler::{tau_and_prior_mean, Hyperparameters, Mode, SamplerError};
use crate::tree::{sample_prior_tree, CutpointGrid, Tree, TreePrior};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SemivariogramError {
    #[error(transparent)]
    Prior(#[from] SamplerError),
    #[error("point {0:?} lies outside the unit hypercube")]
    OutsideDomain(Vec<f64>),
    #[error("no admissible (x, x + h) pair for distance {0}")]
    NoAdmissiblePairs(f64),
    #[error("distances must be positive and strictly increasing")]
    Distances,
    #[error("need at least two distinct points")]
    TooFewPoints,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("kernel error: {0}")]
    Kernel(String),
    #[error("at least one draw is required")]
    NoDraws,
}

type Result<T> = std::result::Result<T, SemivariogramError>;

/// Binned semivariances. `uncertainty` holds Monte-Carlo standard errors for
/// theoretical curves and pair counts for empirical ones.
#[derive(Debug, Clone, PartialEq)]
pub struct SemivariogramCurve {
    pub distances: Vec<f64>,
    pub values: Vec<f64>,
    pub uncertainty: Vec<f64>,
}

/// Prior quantities a theoretical semivariogram depends on.
#[derive(Debug, Clone)]
pub struct PriorProcess {
    tree: TreePrior,
    bandwidth: BandwidthPrior,
    q: f64,
    grid: CutpointGrid,
    m: usize,
    tau: f64,
    k: f64,
    models: usize,
}

impl PriorProcess {
    /// Regression prior on `[0, 1]^p` with leaf scale from the response range.
    pub fn regression(hyper: &Hyperparameters, p: usize, y_range: (f64, f64)) -> Result<Self> {
        Self::build(hyper, p, Mode::Regression, Some(y_range))
    }

    /// Mixing prior for `models` weight functions.
    pub fn mixing(hyper: &Hyperparameters, p: usize, models: usize) -> Result<Self> {
        Self::build(hyper, p, Mode::Mixing { models }, None)
    }

    fn build(hyper: &Hyperparameters, p: usize, mode: Mode, y_range: Option<(f64, f64)>) -> Result<Self> {
        hyper.validate()?;
        let (tau, _) = tau_and_prior_mean(hyper, mode, y_range)?;
        Ok(PriorProcess {
            tree: hyper.tree_prior()?,
            bandwidth: hyper.bandwidth_prior()?,
            q: hyper.q,
            grid: CutpointGrid::uniform(p, hyper.n_cut).map_err(SamplerError::from)?,
            m: hyper.m,
            tau,
            k: hyper.k,
            models: mode.dim(),
        })
    }

    pub fn dims(&self) -> usize {
        self.grid.dims()
    }

    /// Variance of the sum of trees, `m tau^2`.
    pub fn m_tau2(&self) -> f64 {
        self.m as f64 * self.tau * self.tau
    }

    fn draw_tree<R: Rng + ?Sized>(&self, rng: &mut R) -> (CompiledTree, PathKernel) {
        let tree = sample_prior_tree(&self.tree, &self.grid, rng);
        let gamma = self.bandwidth.sample(rng);
        let kernel = PathKernel::new(gamma, self.q).expect("beta draws lie in (0, 1)");
        (CompiledTree::new(&tree, &self.grid), kernel)
    }

    /// Independent prior draws of `(T, gamma)`, draw `t` seeded from stream `t`.
    fn tree_pool(&self, n_draws: usize, seed: u64) -> Vec<(CompiledTree, PathKernel)> {
        (0..n_draws)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                self.draw_tree(&mut rng)
            })
            .collect()
    }
}

fn in_unit_cube(x: &[f64]) -> bool {
    x.iter().all(|v| (0.0..=1.0).contains(v))
}

fn shifted(x: &[f64], h: &[f64]) -> Vec<f64> {
    x.iter().zip(h).map(|(a, b)| a + b).collect()
}

fn phi_overlap(tree: &CompiledTree, kernel: &PathKernel, x: &[f64], y: &[f64], a: &mut Vec<f64>, b: &mut Vec<f64>) -> f64 {
    tree.probs_into(kernel, x, a);
    tree.probs_into(kernel, y, b);
    a.iter().zip(b.iter()).map(|(u, v)| u * v).sum()
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte-Carlo estimate (and standard error) of the prior probability that
/// `x` and `x + h` share a leaf, `E[sum_b phi_b(x + h) phi_b(x)]`.
pub fn phibar_mc<R: Rng + ?Sized>(
    prior: &PriorProcess,
    x: &[f64],
    h: &[f64],
    n_draws: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let y = check_pair(prior, x, h)?;
    if n_draws == 0 {
        return Err(SemivariogramError::NoDraws);
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    let values: Vec<f64> = (0..n_draws)
        .map(|_| {
            let (tree, kernel) = prior.draw_tree(rng);
            phi_overlap(&tree, &kernel, x, &y, &mut a, &mut b)
        })
        .collect();
    Ok(mean_and_se(&values))
}

fn check_pair(prior: &PriorProcess, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    for v in [x, h] {
        if v.len() != prior.dims() {
            return Err(SemivariogramError::Dimension {
                expected: prior.dims(),
                got: v.len(),
            });
        }
    }
    let y = shifted(x, h);
    if !in_unit_cube(x) {
        return Err(SemivariogramError::OutsideDomain(x.to_vec()));
    }
    if !in_unit_cube(&y) {
        return Err(SemivariogramError::OutsideDomain(y));
    }
    Ok(y)
}

/// `sigma^2 + m tau^2 (1 - Phi(x, h))` with the Monte-Carlo standard error.
pub fn nu_xh<R: Rng + ?Sized>(
    prior: &PriorProcess,
    sigma2: f64,
    x: &[f64],
    h: &[f64],
    n_draws: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let (phi, se) = phibar_mc(prior, x, h, n_draws, rng)?;
    Ok((sigma2 + prior.m_tau2() * (1.0 - phi), prior.m_tau2() * se))
}

/// A covariance function for a simulator emulator.
pub trait CovarianceKernel: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;
    fn params(&self) -> Vec<f64>;
    fn covariance(&self, a: &[f64], b: &[f64]) -> std::result::Result<f64, String>;
}

fn same_length(a: &[f64], b: &[f64]) -> std::result::Result<(), String> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(format!("points of dimension {} and {}", a.len(), b.len()))
    }
}

/// `R(x, x') = c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantKernel {
    pub variance: f64,
}

impl CovarianceKernel for ConstantKernel {
    fn name(&self) -> &str {
        "constant"
    }

    fn params(&self) -> Vec<f64> {
        vec![self.variance]
    }

    fn covariance(&self, a: &[f64], b: &[f64]) -> std::result::Result<f64, String> {
        same_length(a, b)?;
        Ok(self.variance)
    }
}

/// `R(x, x') = v 1{x = x'}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhiteNoiseKernel {
    pub variance: f64,
}

impl CovarianceKernel for WhiteNoiseKernel {
    fn name(&self) -> &str {
        "white"
    }

    fn params(&self) -> Vec<f64> {
        vec![self.variance]
    }

    fn covariance(&self, a: &[f64], b: &[f64]) -> std::result::Result<f64, String> {
        same_length(a, b)?;
        Ok(if a == b { self.variance } else { 0.0 })
    }
}

/// `R(x, x') = s^2 exp(-|x - x'|^2 / (2 l^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquaredExponentialKernel {
    pub scale: f64,
    pub length: f64,
}

impl CovarianceKernel for SquaredExponentialKernel {
    fn name(&self) -> &str {
        "sqexp"
    }

    fn params(&self) -> Vec<f64> {
        vec![self.scale, self.length]
    }

    fn covariance(&self, a: &[f64], b: &[f64]) -> std::result::Result<f64, String> {
        same_length(a, b)?;
        let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum();
        Ok(self.scale * (-d2 / (2.0 * self.length * self.length)).exp())
    }
}

type KernelBuilder = fn(&[f64]) -> std::result::Result<Arc<dyn CovarianceKernel>, String>;

/// Named kernel constructors; new families can be registered at runtime.
#[derive(Clone)]
pub struct KernelRegistry {
    builders: BTreeMap<String, KernelBuilder>,
}

fn nonneg(name: &str, v: f64) -> std::result::Result<f64, String> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{name} must be a nonnegative number, got {v}"))
    }
}

fn arity(params: &[f64], n: usize, family: &str) -> std::result::Result<(), String> {
    if params.len() == n {
        Ok(())
    } else {
        Err(format!("{family} takes {n} parameter(s), got {}", params.len()))
    }
}

impl KernelRegistry {
    pub fn empty() -> Self {
        KernelRegistry { builders: BTreeMap::new() }
    }

    /// Constant (`variance`), white noise (`variance`), and squared
    /// exponential (`scale length`).
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("constant", |p| {
            arity(p, 1, "constant")?;
            Ok(Arc::new(ConstantKernel { variance: nonneg("variance", p[0])? }))
        });
        r.register("white", |p| {
            arity(p, 1, "white")?;
            Ok(Arc::new(WhiteNoiseKernel { variance: nonneg("variance", p[0])? }))
        });
        r.register("sqexp", |p| {
            arity(p, 2, "sqexp")?;
            let length = p[1];
            if !(length > 0.0 && length.is_finite()) {
                return Err(format!("length must be positive, got {length}"));
            }
            Ok(Arc::new(SquaredExponentialKernel { scale: nonneg("scale", p[0])?, length }))
        });
        r
    }

    pub fn register(&mut self, name: &str, builder: KernelBuilder) {
        self.builders.insert(name.to_string(), builder);
    }

    pub fn names(&self) -> Vec<&str> {
        self.builders.keys().map(String::as_str).collect()
    }

    pub fn build(&self, name: &str, params: &[f64]) -> Result<Arc<dyn CovarianceKernel>> {
        let builder = self
            .builders
            .get(name)
            .ok_or_else(|| SemivariogramError::Kernel(format!("unknown kernel family {name:?}")))?;
        builder(params).map_err(SemivariogramError::Kernel)
    }
}

/// Stochastic emulator of one simulator: constant mean and covariance.
#[derive(Debug, Clone)]
pub struct EmulatorKernelSpec {
    pub mean: f64,
    pub kernel: Arc<dyn CovarianceKernel>,
}

fn kernel_cov(spec: &EmulatorKernelSpec, a: &[f64], b: &[f64]) -> Result<f64> {
    spec.kernel.covariance(a, b).map_err(SemivariogramError::Kernel)
}

/// Mixing semivariogram at `(x, x + h)` for a given same-leaf probability.
/// Kernels are evaluated at the raw inputs `x_raw`, `y_raw`.
fn mixing_value(
    prior: &PriorProcess,
    sigma2: f64,
    kernels: &[EmulatorKernelSpec],
    x_raw: &[f64],
    y_raw: &[f64],
    phibar: f64,
) -> Result<f64> {
    let kk = prior.models as f64;
    let weight_var = 1.0 / (4.0 * prior.k * prior.k);
    let mut own = 0.0;
    let mut cross = 0.0;
    for spec in kernels {
        let r0 = kernel_cov(spec, x_raw, x_raw)?;
        let rh = kernel_cov(spec, y_raw, x_raw)?;
        own += r0 - rh;
        cross += rh + spec.mean * spec.mean;
    }
    Ok(sigma2 + (weight_var + 1.0 / (kk * kk)) * own + weight_var * (1.0 - phibar) * cross)
}

fn check_kernels(prior: &PriorProcess, kernels: &[EmulatorKernelSpec]) -> Result<()> {
    if kernels.len() != prior.models {
        return Err(SemivariogramError::Dimension {
            expected: prior.models,
            got: kernels.len(),
        });
    }
    Ok(())
}

/// Mixing-model semivariogram at `(x, x + h)` on the unit cube; kernels
/// see the same coordinates.
pub fn mixing_nu_xh<R: Rng + ?Sized>(
    prior: &PriorProcess,
    sigma2: f64,
    kernels: &[EmulatorKernelSpec],
    x: &[f64],
    h: &[f64],
    n_draws: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    check_kernels(prior, kernels)?;
    let y = check_pair(prior, x, h)?;
    let (phi, se) = phibar_mc(prior, x, h, n_draws, rng)?;
    let value = mixing_value(prior, sigma2, kernels, x, &y, phi)?;
    let slope = mixing_value(prior, 0.0, kernels, x, &y, 0.0)? - mixing_value(prior, 0.0, kernels, x, &y, 1.0)?;
    Ok((value, slope.abs() * se))
}

/// Prior covariance of `Y(x)` and `Y(x')` given the topologies and
/// bandwidths: `tau^2 sum_j sum_b phi_bj(x) phi_bj(x')`, or
/// `m tau^2 + sigma^2` when `x = x'`.
pub fn cov_y(
    trees: &[(Tree, f64)],
    grid: &CutpointGrid,
    q: f64,
    tau2: f64,
    sigma2: f64,
    x: &[f64],
    x2: &[f64],
) -> Result<f64> {
    if x == x2 {
        return Ok(trees.len() as f64 * tau2 + sigma2);
    }
    let mut total = 0.0;
    for (tree, gamma) in trees {
        let kernel = PathKernel::new(*gamma, q).map_err(|e| SemivariogramError::Kernel(e.to_string()))?;
        let a = path_probs(tree, grid, &kernel, x);
        let b = path_probs(tree, grid, &kernel, x2);
        total += a.iter().zip(&b).map(|(u, v)| u * v).sum::<f64>();
    }
    Ok(tau2 * total)
}

/// Monte-Carlo settings for domain-averaged curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Integration {
    /// Randomly shifted Halton points in the unit cube.
    pub points: usize,
    /// Uniform random directions per point.
    pub directions: usize,
    /// Prior `(T, gamma)` draws shared across pairs.
    pub draws: usize,
}

impl Default for Integration {
    fn default() -> Self {
        Integration {
            points: 256,
            directions: 64,
            draws: 1000,
        }
    }
}

const PRIMES: [u64; 20] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Halton points with a random Cranley-Patterson shift.
pub fn shifted_halton<R: Rng + ?Sized>(n: usize, dims: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let shift: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
    (0..n)
        .map(|i| {
            (0..dims)
                .map(|d| {
                    let base = PRIMES[d % PRIMES.len()];
                    (radical_inverse(i as u64 + 1, base) + shift[d]).fract()
                })
                .collect()
        })
        .collect()
}

fn random_direction<R: Rng + ?Sized>(dims: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dims).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}

/// Per-distance admissible `(x, h)` pairs in unit-cube coordinates. Directions
/// are uniform in the input space described by `domain`.
fn admissible_pairs(
    domain: &Scaling,
    points: &[Vec<f64>],
    directions: &[Vec<f64>],
    distance: f64,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let widths: Vec<f64> = domain.lower().iter().zip(domain.upper()).map(|(l, u)| u - l).collect();
    let mut out = Vec::new();
    for (i, x) in points.iter().enumerate() {
        for dir in &directions[i * directions.len() / points.len()..(i + 1) * directions.len() / points.len()] {
            let h: Vec<f64> = dir.iter().zip(&widths).map(|(d, w)| distance * d / w).collect();
            if in_unit_cube(&shifted(x, &h)) {
                out.push((x.clone(), h));
            }
        }
    }
    out
}

fn check_distances(distances: &[f64]) -> Result<()> {
    if distances.is_empty()
        || distances[0] <= 0.0
        || distances.windows(2).any(|w| !(w[1] > w[0]))
        || distances.iter().any(|d| !d.is_finite())
    {
        return Err(SemivariogramError::Distances);
    }
    Ok(())
}

/// Domain-averaged curve: for each distance, every admissible pair is
/// evaluated against the same number of pooled prior trees.
fn averaged_curve(
    prior: &PriorProcess,
    domain: &Scaling,
    distances: &[f64],
    settings: Integration,
    seed: u64,
    value: impl Fn(&[f64], &[f64], f64) -> Result<f64> + Sync,
) -> Result<SemivariogramCurve> {
    check_distances(distances)?;
    if domain.dims() != prior.dims() {
        return Err(SemivariogramError::Dimension {
            expected: prior.dims(),
            got: domain.dims(),
        });
    }
    if settings.draws == 0 || settings.points == 0 || settings.directions == 0 {
        return Err(SemivariogramError::NoDraws);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = shifted_halton(settings.points, prior.dims(), &mut rng);
    let directions: Vec<Vec<f64>> = (0..settings.points * settings.directions)
        .map(|_| random_direction(prior.dims(), &mut rng))
        .collect();
    let pool = prior.tree_pool(settings.draws, rng.random());

    let mut curve = SemivariogramCurve {
        distances: distances.to_vec(),
        values: Vec::with_capacity(distances.len()),
        uncertainty: Vec::with_capacity(distances.len()),
    };
    for &d in distances {
        let pairs = admissible_pairs(domain, &points, &directions, d);
        if pairs.is_empty() {
            return Err(SemivariogramError::NoAdmissiblePairs(d));
        }
        let per_pair = settings.draws.div_ceil(pairs.len());
        let evaluations = pairs.len() * per_pair;
        let values: Vec<f64> = (0..evaluations)
            .into_par_iter()
            .map_init(
                || (Vec::new(), Vec::new()),
                |(a, b), e| {
                    let (x, h) = &pairs[e % pairs.len()];
                    let (tree, kernel) = &pool[e % pool.len()];
                    let y = shifted(x, h);
                    let overlap = phi_overlap(tree, kernel, x, &y, a, b);
                    value(x, &y, overlap)
                },
            )
            .collect::<Result<Vec<f64>>>()?;
        let (mean, se) = mean_and_se(&values);
        curve.values.push(mean.max(0.0));
        curve.uncertainty.push(se);
    }
    Ok(curve)
}

/// Prior semivariogram averaged over the domain at each distance (given in
/// the input units of `domain`).
pub fn nu_bar(
    prior: &PriorProcess,
    sigma2: f64,
    domain: &Scaling,
    distances: &[f64],
    settings: Integration,
    seed: u64,
) -> Result<SemivariogramCurve> {
    let scale = prior.m_tau2();
    averaged_curve(prior, domain, distances, settings, seed, |_, _, phi| Ok(sigma2 + scale * (1.0 - phi)))
}

/// Mixing-model analogue of [`nu_bar`]; kernels see input-space coordinates.
pub fn mixing_nu_bar(
    prior: &PriorProcess,
    sigma2: f64,
    kernels: &[EmulatorKernelSpec],
    domain: &Scaling,
    distances: &[f64],
    settings: Integration,
    seed: u64,
) -> Result<SemivariogramCurve> {
    check_kernels(prior, kernels)?;
    averaged_curve(prior, domain, distances, settings, seed, |x, y, phi| {
        mixing_value(prior, sigma2, kernels, &domain.invert(x), &domain.invert(y), phi)
    })
}

/// `n` equal-width bins on `(0, max_distance]`.
pub fn equal_width_bins(max_distance: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| max_distance * i as f64 / n as f64).collect()
}

/// Matheron estimator. Returns the curve over nonempty bins (distance is the
/// mean pair distance in the bin) and the pair count of every bin.
pub fn empirical_semivariogram(
    points: &[Vec<f64>],
    values: &[f64],
    bin_edges: &[f64],
) -> Result<(SemivariogramCurve, Vec<usize>)> {
    if points.len() != values.len() {
        return Err(SemivariogramError::Dimension {
            expected: points.len(),
            got: values.len(),
        });
    }
    if points.len() < 2 || points.iter().all(|p| p == &points[0]) {
        return Err(SemivariogramError::TooFewPoints);
    }
    if bin_edges.len() < 2 || bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SemivariogramError::Distances);
    }
    let bins = bin_edges.len() - 1;
    let mut sums = vec![0.0; bins];
    let mut dist_sums = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            if d < bin_edges[0] || d > bin_edges[bins] {
                continue;
            }
            // bins are (lo, hi], the first also closed on the left
            let bin = bin_edges[1..].partition_point(|&e| e < d).min(bins - 1);
            sums[bin] += (values[i] - values[j]).powi(2);
            dist_sums[bin] += d;
            counts[bin] += 1;
        }
    }
    let mut curve = SemivariogramCurve {
        distances: Vec::new(),
        values: Vec::new(),
        uncertainty: Vec::new(),
    };
    for b in 0..bins {
        if counts[b] > 0 {
            curve.distances.push(dist_sums[b] / counts[b] as f64);
            curve.values.push(sums[b] / (2.0 * counts[b] as f64));
            curve.uncertainty.push(counts[b] as f64);
        }
    }
    Ok((curve, counts))
}

/// Fit a squared-exponential emulator to one simulator's output by matching
/// its empirical semivariogram `s^2 (1 - exp(-d^2 / (2 l^2)))`: length
/// scale by grid search, scale in closed form (pair-count weighted).
pub fn fit_squared_exponential(points: &[Vec<f64>], values: &[f64], bin_edges: &[f64]) -> Result<EmulatorKernelSpec> {
    let (curve, _) = empirical_semivariogram(points, values, bin_edges)?;
    let max_d = bin_edges[bin_edges.len() - 1];
    let mut best = (f64::INFINITY, 1.0, 1.0);
    for i in 1..=200 {
        let length = max_d * i as f64 / 100.0;
        let shape: Vec<f64> = curve
            .distances
            .iter()
            .map(|d| 1.0 - (-d * d / (2.0 * length * length)).exp())
            .collect();
        let (mut num, mut den) = (0.0, 0.0);
        for ((g, v), w) in shape.iter().zip(&curve.values).zip(&curve.uncertainty) {
            num += w * g * v;
            den += w * g * g;
        }
        if den <= 0.0 {
            continue;
        }
        let scale = (num / den).max(0.0);
        let loss: f64 = shape
            .iter()
            .zip(&curve.values)
            .zip(&curve.uncertainty)
            .map(|((g, v), w)| w * (scale * g - v).powi(2))
            .sum();
        if loss < best.0 {
            best = (loss, scale, length);
        }
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(EmulatorKernelSpec {
        mean,
        kernel: Arc::new(SquaredExponentialKernel {
            scale: best.1.max(f64::MIN_POSITIVE),
            length: best.2,
        }),
    })
}
