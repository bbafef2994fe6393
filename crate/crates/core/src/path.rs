//! Stochastic routing through a tree: split probabilities, path
//! probabilities, and latent path assignments.

use crate::tree::{CutpointGrid, NodeId, NodeKind, Tree};
use rand::Rng;
use thiserror::Error;

/// Trees deeper than this evaluate path probabilities in log space.
const LOG_SPACE_DEPTH: usize = 20;

/// Tolerance for "sums to one" contract checks.
const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("bandwidth must lie in (0, 1), got {0}")]
    Bandwidth(f64),
    #[error("shape parameter q must be positive, got {0}")]
    Shape(f64),
    #[error("probability vector is not normalized (sum = {0})")]
    NotNormalized(f64),
    #[error("every prior path probability is zero")]
    Degenerate,
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
}

/// Bandwidth `gamma` and ramp shape `q` of the split kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathKernel {
    gamma: f64,
    q: f64,
}

impl PathKernel {
    pub fn new(gamma: f64, q: f64) -> Result<Self, PathError> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(PathError::Bandwidth(gamma));
        }
        if !(q > 0.0) || !q.is_finite() {
            return Err(PathError::Shape(q));
        }
        Ok(PathKernel { gamma, q })
    }

    /// Hard routing (`gamma = 0`): `x < c` goes left, everything else right.
    pub fn deterministic() -> Self {
        PathKernel { gamma: 0.0, q: 1.0 }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

/// Beta prior on the per-tree bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthPrior {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl BandwidthPrior {
    pub fn new(alpha1: f64, alpha2: f64) -> Result<Self, PathError> {
        if !(alpha1 > 0.0 && alpha2 > 0.0) || !alpha1.is_finite() || !alpha2.is_finite() {
            return Err(PathError::Bandwidth(f64::NAN));
        }
        Ok(BandwidthPrior { alpha1, alpha2 })
    }

    /// Log density up to the normalising constant.
    pub fn log_density_unnormalized(&self, gamma: f64) -> f64 {
        (self.alpha1 - 1.0) * gamma.ln() + (self.alpha2 - 1.0) * (1.0 - gamma).ln()
    }

    pub fn mean(&self) -> f64 {
        self.alpha1 / (self.alpha1 + self.alpha2)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        use rand_distr::{Beta, Distribution};
        let beta = Beta::new(self.alpha1, self.alpha2).expect("validated parameters");
        // keep draws strictly inside (0, 1) for the logit walk
        beta.sample(rng).clamp(1e-12, 1.0 - 1e-12)
    }
}

/// Probability of moving to the right child at a split on cutpoint `cut`
/// for a node whose interval on the split dimension is `[lower, upper]`.
///
/// Outside `(c - gamma (c - L), c + gamma (U - c))` routing is hard. A
/// side with zero width (`c == L` or `c == U`) is routed hard as well.
pub fn split_prob(x: f64, cut: f64, lower: f64, upper: f64, kernel: &PathKernel) -> f64 {
    let gamma = kernel.gamma;
    if x >= cut {
        let width = gamma * (upper - cut);
        if width <= 0.0 {
            return 1.0;
        }
        let ramp = (1.0 - (x - cut) / width).max(0.0);
        1.0 - 0.5 * ramp.powf(kernel.q)
    } else {
        let width = gamma * (cut - lower);
        if width <= 0.0 {
            return 0.0;
        }
        let ramp = (1.0 - (cut - x) / width).max(0.0);
        0.5 * ramp.powf(kernel.q)
    }
}

/// Leaf probabilities `phi_b(x)` in depth-first leaf order.
pub fn path_probs(tree: &Tree, grid: &CutpointGrid, kernel: &PathKernel, x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(8);
    path_probs_into(tree, grid, kernel, x, &mut out);
    out
}

/// As [`path_probs`], reusing `out`.
pub fn path_probs_into(tree: &Tree, grid: &CutpointGrid, kernel: &PathKernel, x: &[f64], out: &mut Vec<f64>) {
    CompiledTree::new(tree, grid).probs_into(kernel, x, out);
}

#[derive(Debug, Clone, Copy)]
enum Compiled {
    Leaf(usize),
    /// The left child is the next entry; `right` is an index.
    Split {
        var: usize,
        cut: f64,
        lower: f64,
        upper: f64,
        right: usize,
    },
}

/// A tree flattened in preorder with each split's bounds resolved, for
/// repeated path-probability evaluation.
#[derive(Debug, Clone)]
pub struct CompiledTree {
    nodes: Vec<Compiled>,
    leaves: usize,
    log_space: bool,
}

impl CompiledTree {
    pub fn new(tree: &Tree, grid: &CutpointGrid) -> Self {
        let mut nodes = Vec::with_capacity(tree.arena_len());
        let mut leaves = 0;
        let mut lower = vec![0.0; grid.dims()];
        let mut upper = vec![1.0; grid.dims()];
        flatten(tree, grid, Tree::ROOT, &mut lower, &mut upper, &mut nodes, &mut leaves);
        CompiledTree {
            nodes,
            leaves,
            log_space: tree.depth() > LOG_SPACE_DEPTH,
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves
    }

    /// Leaf probabilities in depth-first leaf order.
    pub fn probs_into(&self, kernel: &PathKernel, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.leaves, 0.0);
        if self.log_space {
            self.walk(0.0, out, |acc, p| acc + p.ln(), |acc| acc > f64::NEG_INFINITY, kernel, x);
            for v in out.iter_mut() {
                *v = v.exp();
            }
        } else {
            self.walk(1.0, out, |acc, p| acc * p, |acc| acc > 0.0, kernel, x);
        }
    }

    fn walk(
        &self,
        init: f64,
        out: &mut [f64],
        combine: impl Fn(f64, f64) -> f64,
        live: impl Fn(f64) -> bool,
        kernel: &PathKernel,
        x: &[f64],
    ) {
        if !live(init) {
            return;
        }
        let mut stack: Vec<(usize, f64)> = Vec::with_capacity(16);
        stack.push((0, init));
        let dead = combine(init, 0.0);
        while let Some((idx, acc)) = stack.pop() {
            match self.nodes[idx] {
                Compiled::Leaf(b) => out[b] = acc,
                Compiled::Split { var, cut, lower, upper, right } => {
                    if !live(acc) {
                        // zero mass propagates to every leaf below
                        stack.push((idx + 1, dead));
                        stack.push((right, dead));
                        continue;
                    }
                    let psi = split_prob(x[var], cut, lower, upper, kernel);
                    stack.push((right, combine(acc, psi)));
                    stack.push((idx + 1, combine(acc, 1.0 - psi)));
                }
            }
        }
    }
}

fn flatten(
    tree: &Tree,
    grid: &CutpointGrid,
    id: NodeId,
    lower: &mut [f64],
    upper: &mut [f64],
    nodes: &mut Vec<Compiled>,
    leaves: &mut usize,
) {
    match *tree.node(id).expect("reachable node").kind() {
        NodeKind::Leaf => {
            nodes.push(Compiled::Leaf(*leaves));
            *leaves += 1;
        }
        NodeKind::Split { rule, left, right } => {
            let v = rule.var;
            let cut = grid.value(rule);
            let (lo, hi) = (lower[v], upper[v]);
            let slot = nodes.len();
            nodes.push(Compiled::Leaf(usize::MAX));
            upper[v] = cut;
            flatten(tree, grid, left, lower, upper, nodes, leaves);
            upper[v] = hi;
            lower[v] = cut;
            let right_idx = nodes.len();
            flatten(tree, grid, right, lower, upper, nodes, leaves);
            lower[v] = lo;
            nodes[slot] = Compiled::Split {
                var: v,
                cut,
                lower: lo,
                upper: hi,
                right: right_idx,
            };
        }
    }
}

/// Log path probability of a single node (leaf or internal) at `x`.
pub fn log_node_path_prob(
    tree: &Tree,
    grid: &CutpointGrid,
    kernel: &PathKernel,
    node: NodeId,
    x: &[f64],
) -> f64 {
    let dims = grid.dims();
    let mut lower = vec![0.0; dims];
    let mut upper = vec![1.0; dims];
    let mut total = 0.0;
    for (ancestor, went_right) in tree.ancestry(node) {
        let rule = tree.rule(ancestor).expect("ancestor is internal");
        let v = rule.var;
        let c = grid.value(rule);
        let psi = split_prob(x[v], c, lower[v], upper[v], kernel);
        if went_right {
            total += psi.ln();
            lower[v] = c;
        } else {
            total += (1.0 - psi).ln();
            upper[v] = c;
        }
    }
    total
}

fn check_normalized(phi: &[f64]) -> Result<(), PathError> {
    let sum: f64 = phi.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL || phi.iter().any(|&p| p < 0.0) {
        return Err(PathError::NotNormalized(sum));
    }
    Ok(())
}

/// Draw a leaf index from `phi`.
pub fn sample_assignment<R: Rng + ?Sized>(phi: &[f64], rng: &mut R) -> Result<usize, PathError> {
    check_normalized(phi)?;
    Ok(draw_categorical(phi, rng))
}

/// One-hot encoding of a leaf index.
pub fn one_hot(len: usize, index: usize) -> Vec<u8> {
    let mut v = vec![0; len];
    v[index] = 1;
    v
}

/// Inverse-CDF draw from nonnegative weights that need not sum to one.
pub(crate) fn draw_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Full conditional of one observation's path assignment:
/// `p_b ∝ phi_b exp(-(r - f'mu_b)^2 / (2 sigma2))`.
///
/// `node_means` is `B x K` row-major; `fhat` is the length-`K` model vector
/// (absent means `K = 1` with `f = 1`).
pub fn assignment_full_conditional(
    phi: &[f64],
    residual: f64,
    node_means: &[f64],
    fhat: Option<&[f64]>,
    sigma2: f64,
) -> Result<Vec<f64>, PathError> {
    let k = fhat.map_or(1, |f| f.len());
    if node_means.len() != phi.len() * k {
        return Err(PathError::Length {
            expected: phi.len() * k,
            got: node_means.len(),
        });
    }
    let mut out = vec![0.0; phi.len()];
    full_conditional_into(phi, residual, node_means, fhat, sigma2, &mut out)?;
    Ok(out)
}

pub(crate) fn full_conditional_into(
    phi: &[f64],
    residual: f64,
    node_means: &[f64],
    fhat: Option<&[f64]>,
    sigma2: f64,
    out: &mut [f64],
) -> Result<(), PathError> {
    let k = fhat.map_or(1, |f| f.len());
    let mut max_log = f64::NEG_INFINITY;
    for (b, slot) in out.iter_mut().enumerate() {
        if phi[b] <= 0.0 {
            *slot = f64::NEG_INFINITY;
            continue;
        }
        let mu = &node_means[b * k..(b + 1) * k];
        let mean = match fhat {
            Some(f) => f.iter().zip(mu).map(|(a, b)| a * b).sum::<f64>(),
            None => mu[0],
        };
        let e = residual - mean;
        let lp = phi[b].ln() - e * e / (2.0 * sigma2);
        *slot = lp;
        max_log = max_log.max(lp);
    }
    if max_log == f64::NEG_INFINITY {
        return Err(PathError::Degenerate);
    }
    let mut total = 0.0;
    for slot in out.iter_mut() {
        *slot = if *slot == f64::NEG_INFINITY {
            0.0
        } else {
            (*slot - max_log).exp()
        };
        total += *slot;
    }
    for slot in out.iter_mut() {
        *slot /= total;
    }
    Ok(())
}

/// Smooth tree output `sum_b mu_b phi_b(x)`; `leaf_values` is `B x K`.
pub fn marginal_tree_mean(
    tree: &Tree,
    grid: &CutpointGrid,
    kernel: &PathKernel,
    leaf_values: &[f64],
    k: usize,
    x: &[f64],
) -> Result<Vec<f64>, PathError> {
    let phi = path_probs(tree, grid, kernel, x);
    if leaf_values.len() != phi.len() * k {
        return Err(PathError::Length {
            expected: phi.len() * k,
            got: leaf_values.len(),
        });
    }
    let mut out = vec![0.0; k];
    for (b, &p) in phi.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (o, &mu) in out.iter_mut().zip(&leaf_values[b * k..(b + 1) * k]) {
            *o += p * mu;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{sample_prior_tree, SplitRule, TreePrior};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kernel(gamma: f64) -> PathKernel {
        PathKernel::new(gamma, 1.0).unwrap()
    }

    /// Grid with 0.5 at index 4 and 0.7 at index 6.
    fn grid1() -> CutpointGrid {
        CutpointGrid::uniform(1, 9).unwrap()
    }

    #[test]
    fn split_prob_at_cutpoint_is_half() {
        for &g in &[0.1, 0.5, 0.9] {
            assert_eq!(split_prob(0.3, 0.3, 0.0, 1.0, &kernel(g)), 0.5);
        }
    }

    #[test]
    fn split_prob_outside_window_is_hard() {
        let k = kernel(0.5);
        // window is (0.25, 0.75)
        assert_eq!(split_prob(0.75, 0.5, 0.0, 1.0, &k), 1.0);
        assert_eq!(split_prob(0.9, 0.5, 0.0, 1.0, &k), 1.0);
        assert_eq!(split_prob(0.25, 0.5, 0.0, 1.0, &k), 0.0);
        assert_eq!(split_prob(0.1, 0.5, 0.0, 1.0, &k), 0.0);
    }

    #[test]
    fn split_prob_hand_value() {
        let v = split_prob(0.625, 0.5, 0.0, 1.0, &kernel(0.5));
        assert!((v - 0.75).abs() <= 1e-12);
    }

    #[test]
    fn split_prob_degenerate_sides() {
        let k = kernel(0.5);
        assert_eq!(split_prob(0.6, 0.6, 0.2, 0.6, &k), 1.0);
        assert_eq!(split_prob(0.1, 0.2, 0.2, 0.6, &k), 0.0);
        let hard = PathKernel::deterministic();
        assert_eq!(split_prob(0.5, 0.5, 0.0, 1.0, &hard), 1.0);
        assert_eq!(split_prob(0.4999, 0.5, 0.0, 1.0, &hard), 0.0);
    }

    #[test]
    fn kernel_validation() {
        assert!(PathKernel::new(0.0, 1.0).is_err());
        assert!(PathKernel::new(1.0, 1.0).is_err());
        assert!(PathKernel::new(0.5, 0.0).is_err());
    }

    #[test]
    fn root_only_tree_has_unit_mass() {
        let grid = grid1();
        assert_eq!(path_probs(&Tree::new(), &grid, &kernel(0.3), &[0.2]), vec![1.0]);
    }

    #[test]
    fn three_leaf_anchor() {
        // splits x < 0 then x < 0.4 on [-1, 1], i.e. 0.5 and 0.7 on [0, 1]
        let grid = grid1();
        let mut tree = Tree::new();
        let (_, right) = tree.grow(Tree::ROOT, SplitRule { var: 0, cut: 4 }).unwrap();
        tree.grow(right, SplitRule { var: 0, cut: 6 }).unwrap();
        let phi = path_probs(&tree, &grid, &kernel(0.5), &[0.5]);
        assert_eq!(phi.len(), 3);
        assert!((phi[0] - 0.5).abs() <= 1e-12);
        assert!((phi[1] - 0.5).abs() <= 1e-12);
        assert!(phi[2].abs() <= 1e-12);
    }

    #[test]
    fn single_split_hand_value() {
        let grid = grid1();
        let mut tree = Tree::new();
        tree.grow(Tree::ROOT, SplitRule { var: 0, cut: 4 }).unwrap();
        let phi = path_probs(&tree, &grid, &kernel(0.5), &[0.375]);
        assert!((phi[0] - 0.75).abs() <= 1e-12);
        assert!((phi[1] - 0.25).abs() <= 1e-12);
        let mean = marginal_tree_mean(&tree, &grid, &kernel(0.5), &[0.0, 1.0], 1, &[0.375]).unwrap();
        assert!((mean[0] - 0.25).abs() <= 1e-12);
    }

    #[test]
    fn marginal_mean_checks_lengths() {
        let grid = grid1();
        assert!(marginal_tree_mean(&Tree::new(), &grid, &kernel(0.5), &[1.0, 2.0], 1, &[0.1]).is_err());
        let m = marginal_tree_mean(&Tree::new(), &grid, &kernel(0.5), &[3.0], 1, &[0.1]).unwrap();
        assert_eq!(m, vec![3.0]);
    }

    #[test]
    fn assignment_draws_respect_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert_eq!(sample_assignment(&[1.0, 0.0, 0.0], &mut rng).unwrap(), 0);
        }
        assert!(sample_assignment(&[0.5, 0.4], &mut rng).is_err());
        let hot = one_hot(4, 2);
        assert_eq!(hot.iter().map(|&v| v as u32).sum::<u32>(), 1);
    }

    #[test]
    fn assignment_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[sample_assignment(&[0.5, 0.5, 0.0], &mut rng).unwrap()] += 1;
        }
        assert_eq!(counts[2], 0);
        let chi2: f64 = counts[..2]
            .iter()
            .map(|&c| (c as f64 - n as f64 / 2.0).powi(2) / (n as f64 / 2.0))
            .sum();
        // chi-square(1) upper 1% point
        assert!(chi2 < 6.635, "chi2 = {chi2}");
    }

    #[test]
    fn full_conditional_cases() {
        let p = assignment_full_conditional(&[0.5, 0.5], 1.0, &[0.0, 1.0], None, 1.0).unwrap();
        let e = (-0.5f64).exp();
        assert!((p[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((p[0] - 0.3775).abs() < 1e-4 && (p[1] - 0.6225).abs() < 1e-4);

        let phi = [0.2, 0.3, 0.5];
        let flat = assignment_full_conditional(&phi, 0.7, &[1.5, 1.5, 1.5], None, 0.3).unwrap();
        for (a, b) in flat.iter().zip(&phi) {
            assert!((a - b).abs() < 1e-15);
        }
        let wide = assignment_full_conditional(&phi, 0.7, &[0.0, 1.0, 2.0], None, 1e30).unwrap();
        for (a, b) in wide.iter().zip(&phi) {
            assert!((a - b).abs() < 1e-12);
        }
        let mixed = assignment_full_conditional(&[0.5, 0.5], 1.0, &[0.0, 0.0, 0.5, 0.5], Some(&[1.0, 1.0]), 1.0).unwrap();
        assert!((mixed[0] - p[0]).abs() < 1e-12);
        assert_eq!(
            assignment_full_conditional(&[0.0, 0.0], 1.0, &[0.0, 1.0], None, 1.0).unwrap_err(),
            PathError::Degenerate
        );
    }

    #[test]
    fn small_bandwidth_recovers_hard_routing() {
        let grid = CutpointGrid::uniform(2, 20).unwrap();
        let prior = TreePrior::new(0.95, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tiny = kernel(1e-9);
        for _ in 0..30 {
            let tree = sample_prior_tree(&prior, &grid, &mut rng);
            let leaves = tree.leaves();
            for _ in 0..30 {
                let x = [rng.random::<f64>(), rng.random::<f64>()];
                let phi = path_probs(&tree, &grid, &tiny, &x);
                let hard = leaves.iter().position(|&l| l == tree.route(&grid, &x)).unwrap();
                for (b, &p) in phi.iter().enumerate() {
                    assert_eq!(p, if b == hard { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn log_space_matches_direct() {
        // a right-leaning chain deeper than the log-space threshold
        let grid = CutpointGrid::uniform(1, 60).unwrap();
        let mut tree = Tree::new();
        let mut leaf = Tree::ROOT;
        for cut in 0..25 {
            leaf = tree.grow(leaf, SplitRule { var: 0, cut: cut * 2 }).unwrap().1;
        }
        assert!(tree.depth() > LOG_SPACE_DEPTH);
        let k = kernel(0.7);
        let x = [0.41];
        let phi = path_probs(&tree, &grid, &k, &x);
        let leaves = tree.leaves();
        for (b, &leaf) in leaves.iter().enumerate() {
            let direct = log_node_path_prob(&tree, &grid, &k, leaf, &x).exp();
            assert!((phi[b] - direct).abs() < 1e-12);
        }
        assert!((phi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    fn arb_tree() -> impl Strategy<Value = (u64, f64, f64)> {
        (any::<u64>(), 0.01f64..0.99, 1.0f64..3.0)
    }

    proptest! {
        #[test]
        fn phi_is_a_probability_vector((seed, gamma, q) in arb_tree(), x0 in 0.0f64..=1.0, x1 in 0.0f64..=1.0) {
            let grid = CutpointGrid::uniform(2, 30).unwrap();
            let prior = TreePrior::new(0.95, 0.5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tree = sample_prior_tree(&prior, &grid, &mut rng);
            let k = PathKernel::new(gamma, q).unwrap();
            let phi = path_probs(&tree, &grid, &k, &[x0, x1]);
            prop_assert_eq!(phi.len(), tree.num_leaves());
            prop_assert!(phi.iter().all(|&p| p >= 0.0));
            prop_assert!((phi.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn phi_is_lipschitz_for_linear_ramp(seed in any::<u64>(), gamma in 0.05f64..0.95, x0 in 0.0f64..0.99) {
            let grid = CutpointGrid::uniform(1, 30).unwrap();
            let prior = TreePrior::new(0.95, 0.5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tree = sample_prior_tree(&prior, &grid, &mut rng);
            let k = PathKernel::new(gamma, 1.0).unwrap();
            let delta = 1e-6;
            let a = path_probs(&tree, &grid, &k, &[x0]);
            let b = path_probs(&tree, &grid, &k, &[x0 + delta]);
            // each ramp has slope at most 1 / (2 gamma w) with w >= 1/31
            let bound = tree.depth().max(1) as f64 * 31.0 / (2.0 * gamma) * delta * 1.0001;
            for (pa, pb) in a.iter().zip(&b) {
                prop_assert!((pa - pb).abs() <= bound);
            }
        }
    }
}
