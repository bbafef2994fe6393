//! Direct simulation of the generative prior: draw trees, bandwidths, leaf
//! values, paths and noise, then form the response. Used to check closed
//! forms for covariances and semivariograms.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rpbart::path::{path_probs, BandwidthPrior, PathKernel};
use rpbart::tree::{sample_prior_tree, CutpointGrid, Tree, TreePrior};

#[derive(Clone)]
pub struct Generative {
    pub tree: TreePrior,
    pub bandwidth: BandwidthPrior,
    pub grid: CutpointGrid,
    pub q: f64,
    pub m: usize,
    pub tau: f64,
    /// Leaf prior mean per coordinate.
    pub mu0: Vec<f64>,
    pub sigma: f64,
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Inverse-CDF draw of a leaf position.
pub fn categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (b, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return b;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap()
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl Generative {
    pub fn k(&self) -> usize {
        self.mu0.len()
    }

    pub fn draw_ensemble<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<(Tree, f64)> {
        (0..self.m)
            .map(|_| {
                let t = sample_prior_tree(&self.tree, &self.grid, rng);
                (t, self.bandwidth.sample(rng))
            })
            .collect()
    }

    /// Sum-of-trees output (K-vector) at `x` and `y` for one draw of leaf
    /// values and independent paths, given the ensemble.
    fn outputs<R: Rng + ?Sized>(&self, ensemble: &[(Tree, f64)], x: &[f64], y: &[f64], rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let k = self.k();
        let mut gx = vec![0.0; k];
        let mut gy = vec![0.0; k];
        for (tree, gamma) in ensemble {
            let kernel = PathKernel::new(*gamma, self.q).unwrap();
            let leaves = tree.num_leaves();
            let mu: Vec<f64> = (0..leaves * k).map(|i| self.mu0[i % k] + self.tau * normal(rng)).collect();
            let bx = categorical(&path_probs(tree, &self.grid, &kernel, x), rng);
            let by = categorical(&path_probs(tree, &self.grid, &kernel, y), rng);
            for l in 0..k {
                gx[l] += mu[bx * k + l];
                gy[l] += mu[by * k + l];
            }
        }
        (gx, gy)
    }

    /// Regression responses at `x` and `y` (the same point gets one path draw).
    pub fn responses<R: Rng + ?Sized>(&self, ensemble: &[(Tree, f64)], x: &[f64], y: &[f64], rng: &mut R) -> (f64, f64) {
        if x == y {
            let (g, _) = self.outputs(ensemble, x, x, rng);
            let v = g[0] + self.sigma * normal(rng);
            return (v, v);
        }
        let (gx, gy) = self.outputs(ensemble, x, y, rng);
        (gx[0] + self.sigma * normal(rng), gy[0] + self.sigma * normal(rng))
    }

    /// Monte-Carlo `1/2 E[(Y(x + h) - Y(x))^2]` with trees redrawn each time.
    pub fn regression_semivariance<R: Rng + ?Sized>(&self, x: &[f64], y: &[f64], n: usize, rng: &mut R) -> (f64, f64) {
        let v: Vec<f64> = (0..n)
            .map(|_| {
                let ens = self.draw_ensemble(rng);
                let (a, b) = self.responses(&ens, x, y, rng);
                0.5 * (a - b).powi(2)
            })
            .collect();
        mean_se(&v)
    }

    /// As [`Generative::regression_semivariance`] for the mixing model with
    /// independent Gaussian-process simulators `(mean, scale, length)` under
    /// a squared-exponential covariance.
    pub fn mixing_semivariance<R: Rng + ?Sized>(
        &self,
        emulators: &[(f64, f64, f64)],
        x: &[f64],
        y: &[f64],
        n: usize,
        rng: &mut R,
    ) -> (f64, f64) {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
        let v: Vec<f64> = (0..n)
            .map(|_| {
                let ens = self.draw_ensemble(rng);
                let (wx, wy) = self.outputs(&ens, x, y, rng);
                let (mut yx, mut yy) = (self.sigma * normal(rng), self.sigma * normal(rng));
                for (l, &(mean, scale, length)) in emulators.iter().enumerate() {
                    let rh = scale * (-d2 / (2.0 * length * length)).exp();
                    let rho = rh / scale;
                    let z1 = normal(rng);
                    let z2 = rho * z1 + (1.0 - rho * rho).max(0.0).sqrt() * normal(rng);
                    yx += (mean + scale.sqrt() * z1) * wx[l];
                    yy += (mean + scale.sqrt() * z2) * wy[l];
                }
                0.5 * (yx - yy).powi(2)
            })
            .collect();
        mean_se(&v)
    }
}

/// Sample covariance of `(Y(x), Y(x'))` over `n` prior draws of leaf values,
/// paths and noise with the ensemble held fixed, with its standard error.
pub fn fixed_ensemble_covariance<R: Rng + ?Sized>(
    gen: &Generative,
    ensemble: &[(Tree, f64)],
    x: &[f64],
    y: &[f64],
    n: usize,
    rng: &mut R,
) -> (f64, f64) {
    let pairs: Vec<(f64, f64)> = (0..n).map(|_| gen.responses(ensemble, x, y, rng)).collect();
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let products: Vec<f64> = pairs.iter().map(|(a, b)| (a - ma) * (b - mb)).collect();
    mean_se(&products)
}
