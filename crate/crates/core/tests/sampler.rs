mod common;

use common::{batch_means_se, ks_one_sample, mean};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpbart::data::{Scaling, TrainingData};
use rpbart::mixing::{fit_mix, fit_mix_with, weights_at};
use rpbart::path::{path_probs, BandwidthPrior, PathKernel};
use rpbart::sampler::conjugate::LeafPrior;
use rpbart::sampler::{
    run_mcmc, EnsembleState, Hyperparameters, ModelPrior, SamplerError, Schedule, UpdateFlags,
};
use rpbart::tree::{sample_prior_tree, CutpointGrid, SplitRule, Tree, TreePrior};
use statrs::distribution::{Beta, ContinuousCDF};

fn short(m: usize, sweeps: usize) -> Hyperparameters {
    Hyperparameters {
        m,
        schedule: Schedule { burn_in: sweeps, draws: sweeps, thin: 1, adaptation: sweeps },
        ..Default::default()
    }
}

fn sine_data(n: usize, seed: u64) -> TrainingData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let y = x.iter().map(|r| (5.0 * r[0]).sin() + 0.1 * rng.random::<f64>()).collect();
    TrainingData::new(&x, y, None, None).unwrap()
}

fn none() -> UpdateFlags {
    UpdateFlags {
        topology: false,
        assignments: false,
        leaf_values: false,
        bandwidth: false,
        sigma2: false,
        use_likelihood: true,
    }
}

fn prior(tree: TreePrior, bandwidth: BandwidthPrior) -> ModelPrior {
    ModelPrior {
        tree,
        bandwidth,
        leaf: LeafPrior { tau2: 0.1, mu0: vec![0.0] },
        q: 1.0,
        nu: 3.0,
        lambda: 0.1,
    }
}

#[test]
fn same_seed_same_draws() {
    let data = sine_data(40, 1);
    let a = run_mcmc(&data, &short(5, 50), 9).unwrap();
    let b = run_mcmc(&data, &short(5, 50), 9).unwrap();
    let c = run_mcmc(&data, &short(5, 50), 10).unwrap();
    assert_eq!(a.draws, b.draws);
    assert_ne!(a.draws, c.draws);
    assert_eq!(a.draws.len(), 50);
}

#[test]
fn invalid_hyperparameter_names_key() {
    let data = sine_data(10, 1);
    let hyper = Hyperparameters { k: -1.0, ..short(2, 5) };
    match run_mcmc(&data, &hyper, 1) {
        Err(SamplerError::Invalid { name, .. }) => assert_eq!(name, "k"),
        other => panic!("expected validation error, got {other:?}"),
    }
    let hyper = Hyperparameters {
        schedule: Schedule { burn_in: 5, draws: 5, thin: 1, adaptation: 6 },
        ..short(2, 5)
    };
    assert!(run_mcmc(&data, &hyper, 1).is_err());
}

#[test]
fn residual_cache_stays_coherent() {
    let data = sine_data(60, 2);
    let p = prior(TreePrior::new(0.95, 1.0).unwrap(), BandwidthPrior::new(2.0, 10.0).unwrap());
    let mut state = EnsembleState::new(data, p, CutpointGrid::uniform(2, 20).unwrap(), 6, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        state.sweep(&mut rng).unwrap();
        assert!(state.residual_drift() <= 1e-8);
    }
}

/// With the tree prior forcing root-only trees, the bandwidth leaves the
/// likelihood and its chain must reproduce the Beta prior.
#[test]
fn bandwidth_chain_recovers_beta_prior_for_root_only_trees() {
    let data = sine_data(5, 3);
    let p = prior(TreePrior::new(1e-12, 1.0).unwrap(), BandwidthPrior::new(2.0, 5.0).unwrap());
    let mut state = EnsembleState::new(data, p, CutpointGrid::uniform(2, 10).unwrap(), 1, 0.5).unwrap();
    state.set_flags(UpdateFlags { bandwidth: true, ..none() });
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    state.set_adapting(true);
    for _ in 0..2000 {
        state.sweep(&mut rng).unwrap();
    }
    state.set_adapting(false);
    let mut sample = Vec::new();
    for i in 0..200_000 {
        state.sweep(&mut rng).unwrap();
        if i % 20 == 0 {
            sample.push(state.trees()[0].gamma());
        }
    }
    let beta = Beta::new(2.0, 5.0).unwrap();
    let p = ks_one_sample(&sample, |g| beta.cdf(g));
    assert!(p > 0.01, "KS p = {p}");
}

fn split_tree_bandwidth(y_of: impl Fn(f64) -> f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random::<f64>()]).collect();
    let y: Vec<f64> = x.iter().map(|r| y_of(r[0]) + 0.05 * (rng.random::<f64>() - 0.5)).collect();
    let data = TrainingData::new(&x, y, None, None).unwrap();
    let hyper = Hyperparameters { alpha1: 2.0, alpha2: 2.0, ..short(1, 1000) };
    let post = run_mcmc(&data, &hyper, 4).unwrap();
    let gammas: Vec<f64> = post
        .draws
        .iter()
        .flat_map(|d| d.trees.iter().filter(|t| t.tree.num_leaves() > 1).map(|t| t.gamma))
        .collect();
    mean(&gammas)
}

/// A sharp step pulls the bandwidth of split trees well below its prior
/// mean of 1/2.
#[test]
fn step_function_shrinks_bandwidth() {
    let step = split_tree_bandwidth(|x| if x < 0.5 { -1.0 } else { 1.0 });
    assert!(step < 0.15, "posterior mean bandwidth {step}");
}

/// Assignment frequencies for one observation match the hand-computed full
/// conditional `phi_b exp(-(r - mu_b)^2 / (2 sigma^2))`.
#[test]
fn assignment_frequencies_match_full_conditional() {
    let x = vec![vec![0.45], vec![0.9]];
    let data = TrainingData::new(&x, vec![0.3, 1.0], None, Some(Scaling::new(vec![0.0], vec![1.0]).unwrap())).unwrap();
    let p = prior(TreePrior::new(0.95, 1.0).unwrap(), BandwidthPrior::new(2.0, 5.0).unwrap());
    let grid = CutpointGrid::uniform(1, 9).unwrap();
    let mut state = EnsembleState::new(data, p, grid.clone(), 1, 0.2).unwrap();
    let mut tree = Tree::new();
    tree.grow(Tree::ROOT, SplitRule { var: 0, cut: 4 }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    state.set_tree(0, tree.clone(), 0.4, &[0.0, 0.5], &mut rng).unwrap();
    state.set_flags(UpdateFlags { assignments: true, ..none() });

    let phi = path_probs(&tree, &grid, &PathKernel::new(0.4, 1.0).unwrap(), &[0.45]);
    let w: Vec<f64> = phi
        .iter()
        .zip([0.0, 0.5])
        .map(|(f, mu)| f * (-(0.3f64 - mu).powi(2) / 0.4).exp())
        .collect();
    let expected = w[1] / (w[0] + w[1]);
    let n = 50_000;
    let mut right = 0usize;
    for _ in 0..n {
        state.sweep(&mut rng).unwrap();
        right += state.trees()[0].assignments()[0];
    }
    let freq = right as f64 / n as f64;
    let se = (expected * (1.0 - expected) / n as f64).sqrt();
    assert!((freq - expected).abs() < 3.0 * se, "{freq} vs {expected}");
}

/// Without the likelihood, the topology chain samples the tree prior.
#[test]
fn topology_chain_without_likelihood_matches_prior_tree_size() {
    let data = sine_data(10, 6);
    let tp = TreePrior::new(0.95, 1.0).unwrap();
    let grid = CutpointGrid::uniform(2, 5).unwrap();
    let p = prior(tp, BandwidthPrior::new(2.0, 5.0).unwrap());
    let mut state = EnsembleState::new(data, p, grid.clone(), 1, 0.5).unwrap();
    state.set_flags(UpdateFlags {
        topology: true,
        assignments: true,
        leaf_values: true,
        use_likelihood: false,
        ..none()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut chain = Vec::new();
    for _ in 0..100_000 {
        state.sweep(&mut rng).unwrap();
        chain.push(state.trees()[0].tree().num_leaves() as f64);
    }
    let forward: Vec<f64> = (0..50_000)
        .map(|_| sample_prior_tree(&tp, &grid, &mut rng).num_leaves() as f64)
        .collect();
    let se = (common::variance(&forward) / forward.len() as f64 + batch_means_se(&chain, 50).powi(2)).sqrt();
    let z = (mean(&chain) - mean(&forward)) / se;
    assert!(z.abs() < 3.0, "chain {} vs prior {} (z = {z})", mean(&chain), mean(&forward));
}

/// Mixing with `K = 1` and `fhat = 1` is the regression model: identical
/// priors and seeds give identical chains.
#[test]
fn single_unit_model_reduces_to_regression() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.random::<f64>()]).collect();
    let y: Vec<f64> = x.iter().map(|r| 2.0 + r[0]).collect();
    let ones = vec![vec![1.0]; 30];
    let reg = TrainingData::new(&x, y.clone(), None, None).unwrap();
    let mix = TrainingData::new(&x, y, Some(&ones), None).unwrap();
    let p = prior(TreePrior::new(0.95, 2.0).unwrap(), BandwidthPrior::new(2.0, 10.0).unwrap());
    let grid = CutpointGrid::uniform(1, 20).unwrap();
    let mut a = EnsembleState::new(reg, p.clone(), grid.clone(), 3, 0.3).unwrap();
    let mut b = EnsembleState::new(mix, p, grid, 3, 0.3).unwrap();
    let mut ra = ChaCha8Rng::seed_from_u64(8);
    let mut rb = ra.clone();
    for i in 0..100 {
        a.sweep(&mut ra).unwrap();
        b.sweep(&mut rb).unwrap();
        assert_eq!(a.snapshot(i), b.snapshot(i));
    }
}

#[test]
fn single_unit_model_weight_tracks_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Vec<Vec<f64>> = (0..80).map(|_| vec![rng.random::<f64>()]).collect();
    let y: Vec<f64> = (0..80).map(|_| 0.7 + 0.1 * (rng.random::<f64>() - 0.5)).collect();
    let ones = vec![vec![1.0]; 80];
    let post = fit_mix(&x, y, &ones, &["one".to_string()], &short(10, 300), None, 9).unwrap();
    let w = weights_at(&post, &[vec![0.2], vec![0.8]]).unwrap();
    for s in w.draws.summaries(0) {
        assert!((s.mean - 0.7).abs() < 0.05, "{s:?}");
    }
}

#[test]
fn prior_weights_average_one_over_k() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let f: Vec<Vec<f64>> = (0..20).map(|_| vec![1.0, 2.0, 3.0]).collect();
    let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let flags = UpdateFlags { use_likelihood: false, ..UpdateFlags::default() };
    let post = fit_mix_with(&x, vec![0.0; 20], &f, &ids, &short(10, 2000), None, 10, flags).unwrap();
    let w = weights_at(&post, &[vec![0.5, 0.5]]).unwrap();
    for l in 0..3 {
        let series = w.draws.coordinate(0, l);
        let se = batch_means_se(&series, 40);
        let m = mean(&series);
        assert!((m - 1.0 / 3.0).abs() < 4.0 * se, "w_{l} mean {m} (se {se})");
    }
}

#[test]
fn predictions_are_continuous_across_cutpoints() {
    let data = sine_data(50, 11);
    let post = run_mcmc(&data, &short(8, 100), 11).unwrap();
    let lo = data.scaling().lower().to_vec();
    let hi = data.scaling().upper().to_vec();
    let base: Vec<Vec<f64>> = (0..=100)
        .map(|i| vec![lo[0] + (hi[0] - lo[0]) * i as f64 / 100.0, 0.5 * (lo[1] + hi[1])])
        .collect();
    let bumped: Vec<Vec<f64>> = base.iter().map(|p| vec![p[0] + 1e-9, p[1]]).collect();
    let a = post.predict(&base).unwrap();
    let b = post.predict(&bumped).unwrap();
    for (s, t) in a.summaries.iter().zip(&b.summaries) {
        assert!((s.mean - t.mean).abs() < 1e-4);
    }
}
