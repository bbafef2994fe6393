mod common;

use common::fixtures::{square_grid, truth, uniform_inputs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpbart::data::Scaling;
use rpbart::mixing::{
    bilinear_regrid, fit_mix, mixed_prediction, sum_of_weights, weights_at, MixingError, ModelOutputGrid,
};
use rpbart::sampler::{DrawTree, Hyperparameters, PosteriorDraw, Schedule};
use rpbart::tree::{SplitRule, Tree};

fn short(m: usize, sweeps: usize) -> Hyperparameters {
    Hyperparameters {
        m,
        schedule: Schedule { burn_in: sweeps, draws: sweeps, thin: 1, adaptation: sweeps },
        ..Default::default()
    }
}

fn ids(k: usize) -> Vec<String> {
    (1..=k).map(|l| format!("model{l}")).collect()
}

/// Replacing a fitted posterior's draws by one hand-built split tree makes
/// `w(x) = (1 - s(x)) mu_left + s(x) mu_right` with the ramp `s`.
#[test]
fn weights_from_one_split_tree_match_hand_values() {
    let x = vec![vec![0.0, 0.0], vec![4.0, 2.0], vec![1.0, 1.0]];
    let f = vec![vec![1.0, 2.0]; 3];
    let scaling = Scaling::new(vec![0.0, 0.0], vec![4.0, 2.0]).unwrap();
    let mut post = fit_mix(&x, vec![1.0; 3], &f, &ids(2), &short(1, 5), Some(scaling), 1).unwrap();

    // split on the first input at the cutpoint with index 49, 50 / 101 in scaled units
    let mut tree = Tree::new();
    tree.grow(Tree::ROOT, SplitRule { var: 0, cut: 49 }).unwrap();
    let (gamma, c) = (0.5, 50.0 / 101.0);
    post.draws = vec![PosteriorDraw {
        index: 0,
        sigma2: 1.0,
        trees: vec![DrawTree { tree, gamma, leaf_values: vec![0.2, 0.8, 0.6, 0.4] }],
    }];

    let points = vec![vec![1.5, 0.3], vec![2.2, 1.9], vec![3.9, 1.0]];
    let w = weights_at(&post, &points).unwrap();
    for (i, p) in points.iter().enumerate() {
        let u = p[0] / 4.0;
        let s = if u >= c {
            1.0 - 0.5 * (1.0 - (u - c) / (gamma * (1.0 - c))).max(0.0)
        } else {
            0.5 * (1.0 - (c - u) / (gamma * c)).max(0.0)
        };
        let expected = [(1.0 - s) * 0.2 + s * 0.6, (1.0 - s) * 0.8 + s * 0.4];
        let got = w.draws.at(i, 0);
        for l in 0..2 {
            assert!((got[l] - expected[l]).abs() < 1e-12, "point {i} model {l}: {} vs {}", got[l], expected[l]);
        }
    }
}

/// Models that both overshoot by a factor (`2 f` and `3 f`) force the
/// weights to sum well below one wherever the signal is clear.
#[test]
fn scaled_model_set_pulls_weight_sum_below_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = uniform_inputs(150, &mut rng);
    let y: Vec<f64> = x.iter().map(|r| truth(r) + 0.05 * (rng.random::<f64>() - 0.5)).collect();
    let f: Vec<Vec<f64>> = x.iter().map(|r| vec![2.0 * truth(r), 3.0 * truth(r)]).collect();
    let post = fit_mix(&x, y, &f, &ids(2), &short(10, 500), None, 2).unwrap();
    let grid: Vec<Vec<f64>> = square_grid(12, -2.8, 2.8).into_iter().filter(|p| truth(p).abs() > 0.8).collect();
    let w = weights_at(&post, &grid).unwrap();
    let mut sums: Vec<f64> = sum_of_weights(&w).iter().map(|s| s.mean).collect();
    sums.sort_by(f64::total_cmp);
    let median = sums[sums.len() / 2];
    assert!((0.25..0.65).contains(&median), "median weight sum {median}");
}

#[test]
fn mixed_prediction_checks_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = uniform_inputs(20, &mut rng);
    let f: Vec<Vec<f64>> = x.iter().map(|r| vec![truth(r), 0.0]).collect();
    let y: Vec<f64> = x.iter().map(|r| truth(r)).collect();
    let post = fit_mix(&x, y, &f, &ids(2), &short(3, 20), None, 3).unwrap();
    let w = weights_at(&post, &x[..4]).unwrap();
    assert!(matches!(mixed_prediction(&w, &f[..3]), Err(MixingError::Dimension { .. })));
    let bad: Vec<Vec<f64>> = vec![vec![1.0]; 4];
    assert!(matches!(mixed_prediction(&w, &bad), Err(MixingError::Dimension { .. })));
    let pred = mixed_prediction(&w, &f[..4]).unwrap();
    assert_eq!(pred.summaries.len(), 4);
    assert!(fit_mix(&x, vec![0.0; 20], &f, &ids(3), &short(3, 20), None, 3).is_err());
}

/// Bilinear interpolation reproduces any bilinear surface exactly.
#[test]
fn regrid_reproduces_bilinear_surfaces() {
    let surface = |u: f64, v: f64| 1.0 + 2.0 * u - 0.5 * v + 0.25 * u * v;
    let a0 = vec![0.0, 0.5, 1.5, 3.0];
    let a1 = vec![-1.0, 0.0, 2.0];
    let make = |id: &str, scale: f64| {
        let values = a0.iter().flat_map(|&u| a1.iter().map(move |&v| scale * surface(u, v))).collect();
        ModelOutputGrid::new(id, a0.clone(), a1.clone(), values).unwrap()
    };
    let grids = vec![make("a", 1.0), make("b", -2.0)];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let points: Vec<[f64; 2]> = (0..200).map(|_| [rng.random_range(0.0..3.0), rng.random_range(-1.0..2.0)]).collect();
    let out = bilinear_regrid(&grids, &points).unwrap();
    for (p, row) in points.iter().zip(&out) {
        let t = surface(p[0], p[1]);
        assert!((row[0] - t).abs() < 1e-12);
        assert!((row[1] + 2.0 * t).abs() < 1e-12);
    }
    assert!(bilinear_regrid(&grids, &[[3.5, 0.0]]).is_err());
}

/// Longitude-like periodic axis: the wrap cell joins the last node to the
/// first one a period later.
#[test]
fn regrid_wraps_periodic_axis() {
    let lon = vec![0.0, 90.0, 180.0, 270.0];
    let lat = vec![-10.0, 10.0];
    let values: Vec<f64> = lon.iter().flat_map(|&u| lat.iter().map(move |_| u)).collect();
    let grid = ModelOutputGrid::new("t", lon, lat, values).unwrap().with_period(0, 360.0).unwrap();
    let v = grid.interpolate(315.0, 0.0).unwrap();
    assert!((v - 135.0).abs() < 1e-12, "{v}");
    let w = grid.interpolate(360.0 + 45.0, 0.0).unwrap();
    assert!((w - 45.0).abs() < 1e-12, "{w}");
}
