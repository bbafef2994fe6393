//! Synthetic data sets and independent reference computations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

pub fn truth(x: &[f64]) -> f64 {
    x[0].sin() + x[1].cos()
}

/// `side x side` grid over `[lo, hi]^2`, first coordinate varying slowest.
pub fn square_grid(side: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let at = |i: usize| lo + (hi - lo) * i as f64 / (side - 1) as f64;
    (0..side).flat_map(|i| (0..side).map(move |j| vec![at(i), at(j)])).collect()
}

pub fn uniform_inputs(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| vec![rng.random_range(-PI..PI), rng.random_range(-PI..PI)])
        .collect()
}

/// `n` noisy observations of the smooth surface on `[-pi, pi]^2`.
pub fn regression_data(n: usize, sigma: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = uniform_inputs(n, &mut rng);
    let noise = Normal::new(0.0, sigma).unwrap();
    let y = x.iter().map(|r| truth(r) + noise.sample(&mut rng)).collect();
    (x, y)
}

/// Two simulators bracketing the truth: `truth +/- 0.5 s(x)` with `s = 1`.
pub fn bracketing_models(x: &[f64]) -> Vec<f64> {
    let t = truth(x);
    vec![t + 0.5, t - 0.5]
}

pub struct MixingData {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub fhat: Vec<Vec<f64>>,
}

pub fn mixing_data(n: usize, sigma: f64, seed: u64) -> MixingData {
    let (x, y) = regression_data(n, sigma, seed);
    let fhat = x.iter().map(|r| bracketing_models(r)).collect();
    MixingData { x, y, fhat }
}

/// Sparsegen projection by bisection on the threshold `lambda` solving
/// `sum_l [(w_l - lambda) / (1 - t)]_+ = 1`.
pub fn sparsegen_bisection(w: &[f64], t: f64) -> Vec<f64> {
    let mass = |lambda: f64| w.iter().map(|v| ((v - lambda) / (1.0 - t)).max(0.0)).sum::<f64>();
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // at lambda = max - (1 - t) the largest entry alone has mass 1
    let (mut lo, mut hi) = (max - (1.0 - t) - 1.0, max);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    w.iter().map(|v| ((v - lambda) / (1.0 - t)).max(0.0)).collect()
}

/// Sum over points of the squared posterior-mean discrepancy, from raw
/// `[point][draw][K]` weights.
pub fn discrepancy_objective(weights: &[f64], points: usize, draws: usize, fhat: &[Vec<f64>], t: f64) -> f64 {
    let k = fhat[0].len();
    (0..points)
        .map(|i| {
            let mut total = 0.0;
            for d in 0..draws {
                let w = &weights[(i * draws + d) * k..(i * draws + d + 1) * k];
                let u = sparsegen_bisection(w, t);
                total += (0..k).map(|l| (w[l] - u[l]) * fhat[i][l]).sum::<f64>();
            }
            (total / draws as f64).powi(2)
        })
        .sum()
}
