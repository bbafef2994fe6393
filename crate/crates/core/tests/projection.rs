mod common;

use common::fixtures::{discrepancy_objective, sparsegen_bisection};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpbart::mixing::WeightDraws;
use rpbart::projection::{
    default_sparsegen_grid, discrepancy, project_draws, select_temperature, sparsegen_project,
    temperature_objective, ProjectionError, ProjectionKind,
};
use rpbart::sampler::DrawValues;

fn random_weights(points: usize, draws: usize, k: usize, seed: u64) -> (WeightDraws, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..points * draws * k).map(|_| rng.random_range(-0.3..0.9)).collect();
    let fhat = (0..points).map(|_| (0..k).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let w = WeightDraws {
        model_ids: (0..k).map(|l| format!("m{l}")).collect(),
        draws: DrawValues { points, draws, dim: k, values },
    };
    (w, fhat)
}

#[test]
fn sparsegen_matches_bisection() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..500 {
        let k = rng.random_range(1..8);
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        let t = rng.random_range(-2.0..0.95);
        let got = sparsegen_project(&w, t).unwrap();
        let want = sparsegen_bisection(&w, t);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9, "w {w:?} t {t}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn softmax_objective_matches_direct_computation() {
    let (w, fhat) = random_weights(6, 40, 3, 2);
    let t = 0.3;
    let mut expected = 0.0;
    for (i, f) in fhat.iter().enumerate() {
        let mut mean = 0.0;
        for d in 0..40 {
            let wd = w.draws.at(i, d);
            let z: f64 = wd.iter().map(|v| (v / t).exp()).sum();
            mean += wd.iter().zip(f).map(|(v, fl)| (v - (v / t).exp() / z) * fl).sum::<f64>() / 40.0;
        }
        expected += mean * mean;
    }
    let got = temperature_objective(&w, &fhat, ProjectionKind::Softmax, t).unwrap();
    assert!((got - expected).abs() < 1e-10 * expected.max(1.0));
}

#[test]
fn selected_sparsegen_temperature_minimizes_reference_objective() {
    let (w, fhat) = random_weights(8, 30, 3, 3);
    let grid = default_sparsegen_grid();
    let (t, objectives) = select_temperature(&grid, &w, &fhat, ProjectionKind::Sparsegen).unwrap();
    let reference: Vec<f64> = grid
        .iter()
        .map(|&t| discrepancy_objective(&w.draws.values, 8, 30, &fhat, t))
        .collect();
    for (a, b) in objectives.iter().zip(&reference) {
        assert!((a - b).abs() < 1e-8 * b.max(1.0));
    }
    let best = reference.iter().copied().fold(f64::INFINITY, f64::min);
    let first = grid[reference.iter().position(|&v| v <= best + 1e-12).unwrap()];
    assert_eq!(t, first);
}

#[test]
fn weights_already_on_the_simplex_have_no_sparsemax_discrepancy() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut values = Vec::new();
    for _ in 0..5 * 20 {
        let raw: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        values.extend(raw.iter().map(|v| v / s));
    }
    let w = WeightDraws {
        model_ids: (0..4).map(|l| l.to_string()).collect(),
        draws: DrawValues { points: 5, draws: 20, dim: 4, values },
    };
    let fhat = vec![vec![1.0, -1.0, 2.0, 0.5]; 5];
    let projected = project_draws(&w, ProjectionKind::Sparsegen, 0.0).unwrap();
    let delta = discrepancy(&w, &projected, &fhat).unwrap();
    assert!(delta.draws.values.iter().all(|d| d.abs() < 1e-12));
}

#[test]
fn invalid_temperatures_and_shapes_are_rejected() {
    let (w, fhat) = random_weights(2, 3, 2, 5);
    assert!(matches!(project_draws(&w, ProjectionKind::Sparsegen, 1.0), Err(ProjectionError::Temperature(..))));
    assert!(matches!(project_draws(&w, ProjectionKind::Softmax, 0.0), Err(ProjectionError::Temperature(..))));
    assert!(matches!(select_temperature(&[], &w, &fhat, ProjectionKind::Softmax), Err(ProjectionError::EmptyGrid)));
    let projected = project_draws(&w, ProjectionKind::Softmax, 1.0).unwrap();
    assert!(matches!(discrepancy(&w, &projected, &fhat[..1]), Err(ProjectionError::Dimension { .. })));
}
