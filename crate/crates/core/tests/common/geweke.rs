//! Joint-distribution test: marginal-conditional prior simulation against a
//! successive-conditional chain that alternates one sweep with a fresh
//! response draw.

use super::{batch_means_se, mean, normal_two_sided, variance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpbart::data::{Scaling, TrainingData};
use rpbart::path::BandwidthPrior;
use rpbart::sampler::conjugate::LeafPrior;
use rpbart::sampler::{EnsembleState, ModelPrior};
use rpbart::tree::{CutpointGrid, TreePrior};

pub struct Outcome {
    pub name: String,
    pub prior_mean: f64,
    pub chain_mean: f64,
    pub z: f64,
    pub p_value: f64,
}

pub struct Config {
    pub n: usize,
    pub m: usize,
    pub samples: usize,
    pub thin: usize,
    pub seed: u64,
}

const PROBES: [[f64; 2]; 3] = [[0.2, 0.3], [0.5, 0.5], [0.85, 0.6]];

fn statistics(state: &EnsembleState) -> Vec<f64> {
    let m = state.m() as f64;
    let depth = state.trees().iter().map(|t| t.tree().depth() as f64).sum::<f64>() / m;
    let leaves = state.trees().iter().map(|t| t.tree().num_leaves() as f64).sum::<f64>() / m;
    let gamma = state.trees().iter().map(|t| t.gamma()).sum::<f64>() / m;
    let draw = state.snapshot(0);
    let mut out = vec![depth, leaves, gamma, state.sigma2()];
    for probe in PROBES {
        let mut v = [0.0];
        for t in &draw.trees {
            t.accumulate(state.grid(), state.prior().q, &probe, &mut v);
        }
        out.push(v[0]);
    }
    out.push(out[5] * out[5]);
    out
}

pub const NAMES: [&str; 8] = [
    "depth",
    "leaves",
    "gamma",
    "sigma2",
    "fit@probe1",
    "fit@probe2",
    "fit@probe3",
    "fit^2@probe2",
];

pub fn run(cfg: &Config) -> Vec<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rows: Vec<Vec<f64>> = (0..cfg.n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let scaling = Scaling::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let data = TrainingData::new(&rows, vec![0.0; cfg.n], None, Some(scaling)).unwrap();
    let prior = ModelPrior {
        tree: TreePrior::new(0.95, 1.0).unwrap(),
        bandwidth: BandwidthPrior::new(2.0, 5.0).unwrap(),
        leaf: LeafPrior { tau2: 0.25, mu0: vec![0.0] },
        q: 1.0,
        nu: 5.0,
        lambda: 0.1,
    };
    // a coarse grid so that unsplittable leaves occur
    let grid = CutpointGrid::uniform(2, 5).unwrap();

    let mut forward: Vec<Vec<f64>> = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        let state = EnsembleState::sample_prior(data.clone(), prior.clone(), grid.clone(), cfg.m, &mut rng).unwrap();
        forward.push(statistics(&state));
    }

    let mut state = EnsembleState::sample_prior(data.clone(), prior.clone(), grid.clone(), cfg.m, &mut rng).unwrap();
    let y = state.simulate_response(&mut rng);
    state.set_response(&y);
    let mut chain: Vec<Vec<f64>> = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        for _ in 0..cfg.thin {
            state.sweep(&mut rng).unwrap();
            let y = state.simulate_response(&mut rng);
            state.set_response(&y);
        }
        chain.push(statistics(&state));
    }

    NAMES
        .iter()
        .enumerate()
        .map(|(s, name)| {
            let a: Vec<f64> = forward.iter().map(|v| v[s]).collect();
            let b: Vec<f64> = chain.iter().map(|v| v[s]).collect();
            let se = (variance(&a) / a.len() as f64 + batch_means_se(&b, 50).powi(2)).sqrt();
            let z = (mean(&a) - mean(&b)) / se;
            Outcome {
                name: name.to_string(),
                prior_mean: mean(&a),
                chain_mean: mean(&b),
                z,
                p_value: normal_two_sided(z),
            }
        })
        .collect()
}
