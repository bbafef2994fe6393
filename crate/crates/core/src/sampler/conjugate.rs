//! Normal-normal conjugacy for `K`-vector leaf parameters and the scaled
//! inverse chi-square variance update.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

/// Sufficient statistics of the residuals routed to one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStats {
    pub n: usize,
    /// `sum f f'`, `K x K` row-major.
    pub sff: Vec<f64>,
    /// `sum f r`.
    pub sfr: Vec<f64>,
}

impl NodeStats {
    pub fn new(k: usize) -> Self {
        NodeStats {
            n: 0,
            sff: vec![0.0; k * k],
            sfr: vec![0.0; k],
        }
    }

    pub fn k(&self) -> usize {
        self.sfr.len()
    }

    /// Add one observation with model vector `f` (`None` means `f = 1`).
    pub fn push(&mut self, f: Option<&[f64]>, r: f64) {
        self.n += 1;
        match f {
            None => {
                self.sff[0] += 1.0;
                self.sfr[0] += r;
            }
            Some(f) => {
                let k = f.len();
                for a in 0..k {
                    self.sfr[a] += f[a] * r;
                    for b in 0..k {
                        self.sff[a * k + b] += f[a] * f[b];
                    }
                }
            }
        }
    }

    pub fn merged(&self, other: &NodeStats) -> NodeStats {
        NodeStats {
            n: self.n + other.n,
            sff: self.sff.iter().zip(&other.sff).map(|(a, b)| a + b).collect(),
            sfr: self.sfr.iter().zip(&other.sfr).map(|(a, b)| a + b).collect(),
        }
    }
}

/// Gaussian prior `N(mu0, tau^2 I)` on each leaf vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafPrior {
    pub tau2: f64,
    pub mu0: Vec<f64>,
}

struct Posterior {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    mean: DVector<f64>,
    rhs: DVector<f64>,
}

fn posterior(stats: &NodeStats, prior: &LeafPrior, sigma2: f64) -> Posterior {
    let k = stats.k();
    let mut precision = DMatrix::from_row_slice(k, k, &stats.sff) / sigma2;
    for a in 0..k {
        precision[(a, a)] += 1.0 / prior.tau2;
    }
    let rhs = DVector::from_iterator(
        k,
        prior.mu0.iter().zip(&stats.sfr).map(|(m, s)| m / prior.tau2 + s / sigma2),
    );
    // the ridge I / tau^2 keeps the precision positive definite
    let chol = precision.cholesky().expect("leaf precision is positive definite");
    let mean = chol.solve(&rhs);
    Posterior { chol, mean, rhs }
}

/// Log marginal likelihood of a node's residuals with the leaf parameter
/// integrated out, dropping factors shared by every partition of the same
/// observations. An empty node contributes exactly zero.
pub fn log_evidence(stats: &NodeStats, prior: &LeafPrior, sigma2: f64) -> f64 {
    if stats.n == 0 {
        return 0.0;
    }
    let k = stats.k() as f64;
    let post = posterior(stats, prior, sigma2);
    let log_det: f64 = post.chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let prior_quad: f64 = prior.mu0.iter().map(|m| m * m).sum::<f64>() / prior.tau2;
    -0.5 * k * prior.tau2.ln() - 0.5 * log_det - 0.5 * prior_quad + 0.5 * post.rhs.dot(&post.mean)
}

/// Posterior mean and covariance of the leaf parameter.
pub fn leaf_posterior_moments(stats: &NodeStats, prior: &LeafPrior, sigma2: f64) -> (Vec<f64>, Vec<f64>) {
    let post = posterior(stats, prior, sigma2);
    let cov = post.chol.inverse();
    (post.mean.iter().copied().collect(), cov.transpose().iter().copied().collect())
}

/// Draw a leaf parameter from its conditional posterior.
pub fn draw_leaf<R: Rng + ?Sized>(stats: &NodeStats, prior: &LeafPrior, sigma2: f64, rng: &mut R) -> Vec<f64> {
    let k = stats.k();
    if k == 1 {
        let precision = stats.sff[0] / sigma2 + 1.0 / prior.tau2;
        let mean = (prior.mu0[0] / prior.tau2 + stats.sfr[0] / sigma2) / precision;
        let z: f64 = StandardNormal.sample(rng);
        return vec![mean + z / precision.sqrt()];
    }
    let post = posterior(stats, prior, sigma2);
    let z = DVector::from_iterator(k, (0..k).map(|_| StandardNormal.sample(rng)));
    // L L' = precision, so L'^{-1} z has covariance precision^{-1}
    let noise = post
        .chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .expect("triangular factor is nonsingular");
    (post.mean + noise).iter().copied().collect()
}

/// Draw from `(nu lambda + sse) / chi^2_{nu + n}`.
pub fn draw_sigma2<R: Rng + ?Sized>(nu: f64, lambda: f64, sse: f64, n: usize, rng: &mut R) -> f64 {
    let chi = ChiSquared::new(nu + n as f64).expect("positive degrees of freedom");
    (nu * lambda + sse) / chi.sample(rng)
}
