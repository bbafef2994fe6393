use super::conjugate::{draw_leaf, draw_sigma2, log_evidence, NodeStats};
use super::{DrawTree, ModelPrior, PosteriorDraw, SamplerError};
use crate::data::TrainingData;
use crate::path::{draw_categorical, full_conditional_into, split_prob, CompiledTree, PathKernel};
use crate::tree::{propose_move, sample_prior_tree, CutpointGrid, MoveKind, NodeId, Tree};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Tolerance for the residual cache against a full recomputation.
const RESIDUAL_TOL: f64 = 1e-8;

/// Target acceptance rate of the bandwidth random walk.
const GAMMA_TARGET_ACCEPT: f64 = 0.44;

/// Which updates a sweep performs. `use_likelihood = false` replaces every
/// data-dependent conditional by its prior counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateFlags {
    pub topology: bool,
    pub assignments: bool,
    pub leaf_values: bool,
    pub bandwidth: bool,
    pub sigma2: bool,
    pub use_likelihood: bool,
}

impl Default for UpdateFlags {
    fn default() -> Self {
        UpdateFlags {
            topology: true,
            assignments: true,
            leaf_values: true,
            bandwidth: true,
            sigma2: true,
            use_likelihood: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MoveStats {
    pub birth_proposed: u64,
    pub birth_accepted: u64,
    pub death_proposed: u64,
    pub death_accepted: u64,
    /// Births that found no admissible split rule.
    pub no_valid_move: u64,
    pub gamma_proposed: u64,
    pub gamma_accepted: u64,
}

impl MoveStats {
    fn rate(acc: u64, prop: u64) -> f64 {
        if prop == 0 {
            0.0
        } else {
            acc as f64 / prop as f64
        }
    }

    pub fn birth_rate(&self) -> f64 {
        Self::rate(self.birth_accepted, self.birth_proposed)
    }

    pub fn death_rate(&self) -> f64 {
        Self::rate(self.death_accepted, self.death_proposed)
    }

    pub fn gamma_rate(&self) -> f64 {
        Self::rate(self.gamma_accepted, self.gamma_proposed)
    }
}

/// One tree's unknowns. Leaf values and assignments are keyed by arena id.
#[derive(Debug, Clone)]
pub struct TreeState {
    tree: Tree,
    gamma: f64,
    log_step: f64,
    /// `arena_len x K`; entries of internal or orphaned nodes are unused.
    mu: Vec<f64>,
    z: Vec<NodeId>,
    fit: Vec<f64>,
}

impl TreeState {
    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Leaf values in depth-first leaf order, `B x K`.
    pub fn leaf_values(&self, k: usize) -> Vec<f64> {
        self.tree
            .leaves()
            .iter()
            .flat_map(|&b| self.mu[b * k..(b + 1) * k].iter().copied())
            .collect()
    }

    /// Each observation's leaf as a position in depth-first leaf order.
    pub fn assignments(&self) -> Vec<usize> {
        let leaves = self.tree.leaves();
        self.z
            .iter()
            .map(|id| leaves.iter().position(|l| l == id).expect("assigned to a leaf"))
            .collect()
    }

    /// This tree's contribution `f_i' mu_{z_i}` at each observation.
    pub fn fit(&self) -> &[f64] {
        &self.fit
    }

    fn kernel(&self, q: f64) -> PathKernel {
        PathKernel::new(self.gamma, q).expect("bandwidth stays in (0, 1)")
    }
}

/// One step on the root-to-leaf path: split variable, cut value, bounds of
/// the parent on that variable, and direction.
#[derive(Debug, Clone, Copy)]
struct Step {
    var: usize,
    cut: f64,
    lower: f64,
    upper: f64,
    right: bool,
}

/// All MCMC unknowns plus the residual cache `r_i = y_i - sum_j fit_j(x_i)`.
#[derive(Debug, Clone)]
pub struct EnsembleState {
    data: TrainingData,
    prior: ModelPrior,
    grid: CutpointGrid,
    trees: Vec<TreeState>,
    sigma2: f64,
    residual: Vec<f64>,
    flags: UpdateFlags,
    adapting: bool,
    sweeps: u64,
    excluded: Option<usize>,
    stats: MoveStats,
    phi_buf: Vec<f64>,
    prob_buf: Vec<f64>,
}

impl EnsembleState {
    /// `m` root-only trees at the prior mean, bandwidths at their prior
    /// mean, and the given error variance.
    pub fn new(
        data: TrainingData,
        prior: ModelPrior,
        grid: CutpointGrid,
        m: usize,
        sigma2: f64,
    ) -> Result<Self, SamplerError> {
        if grid.dims() != data.p() {
            return Err(SamplerError::Numerical(format!(
                "grid has {} dimensions, data {}",
                grid.dims(),
                data.p()
            )));
        }
        if prior.leaf.mu0.len() != data.k() {
            return Err(SamplerError::Numerical(format!(
                "leaf prior has dimension {}, data {}",
                prior.leaf.mu0.len(),
                data.k()
            )));
        }
        if !(sigma2 > 0.0) {
            return Err(SamplerError::Numerical(format!("initial sigma2 {sigma2} is not positive")));
        }
        let n = data.n();
        let gamma = prior.bandwidth.mean();
        let trees = (0..m)
            .map(|_| TreeState {
                tree: Tree::new(),
                gamma,
                log_step: 0.0,
                mu: prior.leaf.mu0.clone(),
                z: vec![Tree::ROOT; n],
                fit: vec![0.0; n],
            })
            .collect();
        let mut state = EnsembleState {
            residual: data.y().to_vec(),
            data,
            prior,
            grid,
            trees,
            sigma2,
            flags: UpdateFlags::default(),
            adapting: false,
            sweeps: 0,
            excluded: None,
            stats: MoveStats::default(),
            phi_buf: Vec::new(),
            prob_buf: Vec::new(),
        };
        for j in 0..m {
            state.refresh_fit(j);
        }
        state.recompute_residuals();
        Ok(state)
    }

    /// Every unknown drawn from the prior: topology, bandwidth, leaf
    /// values, assignments, and the error variance.
    pub fn sample_prior<R: Rng + ?Sized>(
        data: TrainingData,
        prior: ModelPrior,
        grid: CutpointGrid,
        m: usize,
        rng: &mut R,
    ) -> Result<Self, SamplerError> {
        let sigma2 = draw_sigma2(prior.nu, prior.lambda, 0.0, 0, rng);
        let mut state = EnsembleState::new(data, prior, grid, m, sigma2)?;
        for j in 0..m {
            let tree = sample_prior_tree(&state.prior.tree, &state.grid, rng);
            let gamma = state.prior.bandwidth.sample(rng);
            let k = state.k();
            let values: Vec<f64> = (0..tree.num_leaves())
                .flat_map(|_| state.draw_prior_leaf(rng))
                .collect();
            debug_assert_eq!(values.len(), tree.num_leaves() * k);
            state.set_tree(j, tree, gamma, &values, rng)?;
        }
        Ok(state)
    }

    fn draw_prior_leaf<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let sd = self.prior.leaf.tau2.sqrt();
        self.prior
            .leaf
            .mu0
            .iter()
            .map(|m| m + sd * normal(rng))
            .collect::<Vec<f64>>()
    }

    pub fn data(&self) -> &TrainingData {
        &self.data
    }

    pub fn prior(&self) -> &ModelPrior {
        &self.prior
    }

    pub fn grid(&self) -> &CutpointGrid {
        &self.grid
    }

    pub fn k(&self) -> usize {
        self.data.k()
    }

    pub fn m(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[TreeState] {
        &self.trees
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn set_sigma2(&mut self, sigma2: f64) {
        assert!(sigma2 > 0.0, "sigma2 must be positive");
        self.sigma2 = sigma2;
    }

    pub fn set_flags(&mut self, flags: UpdateFlags) {
        self.flags = flags;
    }

    pub fn set_adapting(&mut self, adapting: bool) {
        self.adapting = adapting;
    }

    pub fn move_stats(&self) -> &MoveStats {
        &self.stats
    }

    /// Current residual cache.
    pub fn residuals(&self) -> &[f64] {
        &self.residual
    }

    /// Sum-of-trees mean `sum_j f_i' mu_{z_ij}` at observation `i`.
    pub fn total_fit(&self, i: usize) -> f64 {
        self.trees.iter().map(|t| t.fit[i]).sum()
    }

    /// Replace tree `j` (leaf values in depth-first leaf order) and redraw
    /// its assignments from the prior path probabilities.
    pub fn set_tree<R: Rng + ?Sized>(
        &mut self,
        j: usize,
        tree: Tree,
        gamma: f64,
        leaf_values: &[f64],
        rng: &mut R,
    ) -> Result<(), SamplerError> {
        tree.validate(&self.grid)?;
        let k = self.k();
        let leaves = tree.leaves();
        if leaf_values.len() != leaves.len() * k {
            return Err(SamplerError::Numerical(format!(
                "expected {} leaf values, got {}",
                leaves.len() * k,
                leaf_values.len()
            )));
        }
        PathKernel::new(gamma, self.prior.q)?;
        let mut mu = vec![0.0; tree.arena_len() * k];
        for (b, &leaf) in leaves.iter().enumerate() {
            mu[leaf * k..(leaf + 1) * k].copy_from_slice(&leaf_values[b * k..(b + 1) * k]);
        }
        let ts = &mut self.trees[j];
        ts.tree = tree;
        ts.gamma = gamma;
        ts.mu = mu;
        let kernel = ts.kernel(self.prior.q);
        let compiled = CompiledTree::new(&ts.tree, &self.grid);
        for i in 0..self.data.n() {
            compiled.probs_into(&kernel, self.data.x(i), &mut self.phi_buf);
            ts.z[i] = leaves[draw_categorical(&self.phi_buf, rng)];
        }
        self.refresh_fit(j);
        self.recompute_residuals();
        Ok(())
    }

    /// Set tree `j`'s assignments (positions in depth-first leaf order).
    pub fn set_assignments(&mut self, j: usize, positions: &[usize]) {
        let leaves = self.trees[j].tree.leaves();
        for (z, &b) in self.trees[j].z.iter_mut().zip(positions) {
            *z = leaves[b];
        }
        self.refresh_fit(j);
        self.recompute_residuals();
    }

    /// Replace the response (e.g. a fresh simulation) and rebuild residuals.
    pub fn set_response(&mut self, y: &[f64]) {
        self.data.y_mut().copy_from_slice(y);
        self.recompute_residuals();
    }

    /// `y` drawn from the likelihood at the current state.
    pub fn simulate_response<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let sd = self.sigma2.sqrt();
        (0..self.data.n())
            .map(|i| self.total_fit(i) + sd * normal(rng))
            .collect()
    }

    fn refresh_fit(&mut self, j: usize) {
        let k = self.k();
        let ts = &mut self.trees[j];
        for i in 0..self.data.n() {
            let mu = &ts.mu[ts.z[i] * k..(ts.z[i] + 1) * k];
            ts.fit[i] = match self.data.fhat(i) {
                Some(f) => f.iter().zip(mu).map(|(a, b)| a * b).sum(),
                None => mu[0],
            };
        }
    }

    fn recompute_residuals(&mut self) {
        for i in 0..self.data.n() {
            self.residual[i] = self.data.y()[i] - self.total_fit(i);
        }
        if let Some(j) = self.excluded {
            for i in 0..self.data.n() {
                self.residual[i] += self.trees[j].fit[i];
            }
        }
    }

    /// Largest gap between the cache and a fresh recomputation.
    pub fn residual_drift(&self) -> f64 {
        (0..self.data.n())
            .map(|i| {
                let mut fresh = self.data.y()[i] - self.total_fit(i);
                if let Some(j) = self.excluded {
                    fresh += self.trees[j].fit[i];
                }
                (fresh - self.residual[i]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Remove tree `j`'s fit from the residuals.
    pub fn exclude(&mut self, j: usize) {
        assert!(self.excluded.is_none(), "a tree is already excluded");
        for (r, f) in self.residual.iter_mut().zip(&self.trees[j].fit) {
            *r += f;
        }
        self.excluded = Some(j);
    }

    /// Restore tree `j`'s (refreshed) fit to the residuals.
    pub fn include(&mut self, j: usize) {
        assert_eq!(self.excluded, Some(j), "tree {j} is not excluded");
        self.refresh_fit(j);
        for (r, f) in self.residual.iter_mut().zip(&self.trees[j].fit) {
            *r -= f;
        }
        self.excluded = None;
    }

    fn assert_excluded(&self, j: usize) {
        debug_assert_eq!(self.excluded, Some(j), "tree {j} must be excluded first");
    }

    /// One backfitting sweep over all trees followed by the variance update.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), SamplerError> {
        for j in 0..self.m() {
            self.exclude(j);
            if self.flags.topology {
                self.update_tree_topology(j, rng);
                // new leaves need values before assignments can be redrawn
                if self.flags.leaf_values {
                    self.update_terminal_params(j, rng);
                }
            }
            if self.flags.assignments {
                self.update_assignments(j, rng)?;
            }
            if self.flags.leaf_values {
                self.update_terminal_params(j, rng);
            }
            if self.flags.bandwidth {
                self.update_bandwidth(j, rng);
            }
            self.include(j);
        }
        if self.flags.sigma2 {
            self.update_sigma2(rng);
        }
        self.sweeps += 1;
        let drift = self.residual_drift();
        if !(drift <= RESIDUAL_TOL) {
            return Err(SamplerError::Numerical(format!("residual cache drifted by {drift}")));
        }
        self.recompute_residuals();
        Ok(())
    }

    fn node_stats(&self, j: usize, nodes: &[NodeId]) -> Vec<NodeStats> {
        let k = self.k();
        let mut stats = vec![NodeStats::new(k); nodes.len()];
        for (i, z) in self.trees[j].z.iter().enumerate() {
            if let Some(pos) = nodes.iter().position(|n| n == z) {
                stats[pos].push(self.data.fhat(i), self.residual[i]);
            }
        }
        stats
    }

    fn evidence(&self, stats: &NodeStats) -> f64 {
        if self.flags.use_likelihood {
            log_evidence(stats, &self.prior.leaf, self.sigma2)
        } else {
            0.0
        }
    }

    /// Conjugate draw of every leaf value of tree `j` given its assignments.
    pub fn update_terminal_params<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) {
        self.assert_excluded(j);
        let k = self.k();
        let leaves = self.trees[j].tree.leaves();
        let stats = if self.flags.use_likelihood {
            self.node_stats(j, &leaves)
        } else {
            vec![NodeStats::new(k); leaves.len()]
        };
        let ts = &mut self.trees[j];
        ts.mu.resize(ts.tree.arena_len() * k, 0.0);
        for (leaf, s) in leaves.iter().zip(&stats) {
            let value = draw_leaf(s, &self.prior.leaf, self.sigma2, rng);
            ts.mu[leaf * k..(leaf + 1) * k].copy_from_slice(&value);
        }
        self.refresh_fit(j);
    }

    /// Redraw each observation's leaf in tree `j` from its full conditional.
    pub fn update_assignments<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) -> Result<(), SamplerError> {
        self.assert_excluded(j);
        let k = self.k();
        let q = self.prior.q;
        let ts = &mut self.trees[j];
        let leaves = ts.tree.leaves();
        if leaves.len() == 1 {
            ts.z.iter_mut().for_each(|z| *z = leaves[0]);
            return Ok(());
        }
        let means: Vec<f64> = leaves
            .iter()
            .flat_map(|&b| ts.mu[b * k..(b + 1) * k].iter().copied())
            .collect();
        let kernel = ts.kernel(q);
        let compiled = CompiledTree::new(&ts.tree, &self.grid);
        self.prob_buf.resize(leaves.len(), 0.0);
        for i in 0..self.data.n() {
            compiled.probs_into(&kernel, self.data.x(i), &mut self.phi_buf);
            let weights = if self.flags.use_likelihood {
                full_conditional_into(
                    &self.phi_buf,
                    self.residual[i],
                    &means,
                    self.data.fhat(i),
                    self.sigma2,
                    &mut self.prob_buf,
                )?;
                &self.prob_buf
            } else {
                &self.phi_buf
            };
            ts.z[i] = leaves[draw_categorical(weights, rng)];
        }
        self.refresh_fit(j);
        Ok(())
    }

    /// Birth/death Metropolis-Hastings on `(T_j, Z_j)` with leaf values
    /// integrated out. Returns whether the proposal was accepted.
    pub fn update_tree_topology<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) -> bool {
        self.assert_excluded(j);
        let ts = &self.trees[j];
        let proposal = match propose_move(&ts.tree, &self.prior.tree, &self.grid, rng) {
            Ok(p) => p,
            Err(_) => {
                self.stats.no_valid_move += 1;
                return false;
            }
        };
        let kernel = ts.kernel(self.prior.q);
        let (left, right) = proposal.children;
        match proposal.kind {
            MoveKind::Birth => {
                self.stats.birth_proposed += 1;
                let leaf = proposal.node;
                let rule = proposal.rule;
                let (lower, upper) = ts
                    .tree
                    .index_bounds(leaf, &self.grid)
                    .expect("proposed leaf exists")
                    .interval(rule.var, &self.grid);
                let cut = self.grid.value(rule);
                let k = self.k();
                let mut moves = Vec::new();
                let mut parent = NodeStats::new(k);
                let mut l_stats = NodeStats::new(k);
                let mut r_stats = NodeStats::new(k);
                for (i, &z) in ts.z.iter().enumerate() {
                    if z != leaf {
                        continue;
                    }
                    let psi = split_prob(self.data.x(i)[rule.var], cut, lower, upper, &kernel);
                    let go_right = rng.random::<f64>() < psi;
                    let (f, r) = (self.data.fhat(i), self.residual[i]);
                    parent.push(f, r);
                    if go_right {
                        r_stats.push(f, r);
                    } else {
                        l_stats.push(f, r);
                    }
                    moves.push((i, if go_right { right } else { left }));
                }
                let log_ratio = self.evidence(&l_stats) + self.evidence(&r_stats) - self.evidence(&parent)
                    + proposal.log_prior_ratio
                    + proposal.log_reverse
                    - proposal.log_forward;
                if rng.random::<f64>().ln() < log_ratio {
                    self.stats.birth_accepted += 1;
                    let ts = &mut self.trees[j];
                    ts.tree = proposal.tree;
                    let parent_mu = ts.mu[leaf * k..(leaf + 1) * k].to_vec();
                    ts.mu.resize(ts.tree.arena_len() * k, 0.0);
                    for child in [left, right] {
                        ts.mu[child * k..(child + 1) * k].copy_from_slice(&parent_mu);
                    }
                    for (i, node) in moves {
                        ts.z[i] = node;
                    }
                    self.refresh_fit(j);
                    return true;
                }
                false
            }
            MoveKind::Death => {
                self.stats.death_proposed += 1;
                let stats = self.node_stats(j, &[left, right]);
                let merged = stats[0].merged(&stats[1]);
                let log_ratio = self.evidence(&merged) - self.evidence(&stats[0]) - self.evidence(&stats[1])
                    + proposal.log_prior_ratio
                    + proposal.log_reverse
                    - proposal.log_forward;
                if rng.random::<f64>().ln() < log_ratio {
                    self.stats.death_accepted += 1;
                    let node = proposal.node;
                    let k = self.k();
                    let ts = &mut self.trees[j];
                    ts.tree = proposal.tree;
                    let child_mu = ts.mu[left * k..(left + 1) * k].to_vec();
                    ts.mu[node * k..(node + 1) * k].copy_from_slice(&child_mu);
                    for z in ts.z.iter_mut() {
                        if *z == left || *z == right {
                            *z = node;
                        }
                    }
                    self.compact(j);
                    self.refresh_fit(j);
                    return true;
                }
                false
            }
        }
    }

    /// Drop orphaned arena slots once they dominate.
    fn compact(&mut self, j: usize) {
        let k = self.k();
        let ts = &mut self.trees[j];
        let live = 2 * ts.tree.num_leaves() - 1;
        if ts.tree.arena_len() <= 2 * live + 16 {
            return;
        }
        let (tree, map) = ts.tree.compacted();
        let mut mu = vec![0.0; tree.arena_len() * k];
        for (old, new) in map.iter().enumerate() {
            if let Some(new) = *new {
                mu[new * k..(new + 1) * k].copy_from_slice(&ts.mu[old * k..(old + 1) * k]);
            }
        }
        for z in ts.z.iter_mut() {
            *z = map[*z].expect("assigned leaves are reachable");
        }
        ts.tree = tree;
        ts.mu = mu;
    }

    fn leaf_paths(&self, j: usize) -> Vec<Vec<Step>> {
        let tree = &self.trees[j].tree;
        let mut paths = vec![Vec::new(); tree.arena_len()];
        for leaf in tree.leaves() {
            let mut lower = vec![0.0; self.grid.dims()];
            let mut upper = vec![1.0; self.grid.dims()];
            let mut steps = Vec::new();
            for (ancestor, right) in tree.ancestry(leaf) {
                let rule = tree.rule(ancestor).expect("ancestor is internal");
                let cut = self.grid.value(rule);
                let v = rule.var;
                steps.push(Step { var: v, cut, lower: lower[v], upper: upper[v], right });
                if right {
                    lower[v] = cut;
                } else {
                    upper[v] = cut;
                }
            }
            paths[leaf] = steps;
        }
        paths
    }

    /// `sum_i log phi_{z_i}(x_i)` under bandwidth `gamma`.
    fn log_path_likelihood(&self, j: usize, paths: &[Vec<Step>], gamma: f64) -> f64 {
        let kernel = PathKernel::new(gamma, self.prior.q).expect("bandwidth in (0, 1)");
        let mut total = 0.0;
        for (i, &z) in self.trees[j].z.iter().enumerate() {
            let x = self.data.x(i);
            for s in &paths[z] {
                let psi = split_prob(x[s.var], s.cut, s.lower, s.upper, &kernel);
                total += if s.right { psi.ln() } else { (1.0 - psi).ln() };
            }
            if total == f64::NEG_INFINITY {
                break;
            }
        }
        total
    }

    /// Logit-scale random-walk Metropolis step for tree `j`'s bandwidth,
    /// conditional on its assignments. Returns whether it moved.
    pub fn update_bandwidth<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) -> bool {
        let gamma = self.trees[j].gamma;
        let step = self.trees[j].log_step.exp();
        let logit = (gamma / (1.0 - gamma)).ln();
        let proposed_logit = logit + step * normal(rng);
        let proposed = 1.0 / (1.0 + (-proposed_logit).exp());
        self.stats.gamma_proposed += 1;
        if !(proposed > 0.0 && proposed < 1.0) {
            self.adapt(j, 0.0);
            return false;
        }
        // target on the logit scale: prior density times Jacobian gamma (1 - gamma)
        let log_target = |g: f64, lik: f64| {
            self.prior.bandwidth.log_density_unnormalized(g) + g.ln() + (1.0 - g).ln() + lik
        };
        let (current_lik, proposed_lik) = if self.trees[j].tree.is_root_only() {
            (0.0, 0.0)
        } else {
            let paths = self.leaf_paths(j);
            (
                self.log_path_likelihood(j, &paths, gamma),
                self.log_path_likelihood(j, &paths, proposed),
            )
        };
        let log_ratio = log_target(proposed, proposed_lik) - log_target(gamma, current_lik);
        let accept_prob = if log_ratio >= 0.0 { 1.0 } else { log_ratio.exp() };
        self.adapt(j, accept_prob);
        if rng.random::<f64>() < accept_prob {
            self.stats.gamma_accepted += 1;
            self.trees[j].gamma = proposed;
            return true;
        }
        false
    }

    fn adapt(&mut self, j: usize, accept_prob: f64) {
        if self.adapting {
            let rate = (1.0 + self.sweeps as f64).powf(-0.6);
            self.trees[j].log_step += rate * (accept_prob - GAMMA_TARGET_ACCEPT);
        }
    }

    /// Scaled inverse chi-square draw given the full residuals.
    pub fn update_sigma2<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        debug_assert!(self.excluded.is_none());
        let (sse, n) = if self.flags.use_likelihood {
            (self.residual.iter().map(|r| r * r).sum(), self.data.n())
        } else {
            (0.0, 0)
        };
        self.sigma2 = draw_sigma2(self.prior.nu, self.prior.lambda, sse, n, rng);
    }

    /// Self-contained copy of the current trees for prediction.
    pub fn snapshot(&self, index: usize) -> PosteriorDraw {
        let k = self.k();
        let trees = self
            .trees
            .iter()
            .map(|ts| {
                let (tree, _) = ts.tree.compacted();
                DrawTree {
                    tree,
                    gamma: ts.gamma,
                    leaf_values: ts.leaf_values(k),
                }
            })
            .collect();
        PosteriorDraw {
            index,
            sigma2: self.sigma2,
            trees,
        }
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
