//! Binary regression-tree topologies over the unit hypercube.
//!
//! Trees live in a small arena. Node ids stay stable while a move is being
//! evaluated; [`Tree::compacted`] rebuilds the arena in preorder and returns
//! the id remapping so callers can carry per-node data across.

use rand::Rng;
use std::fmt;
use thiserror::Error;

/// Index of a node inside a [`Tree`] arena.
pub type NodeId = usize;

/// Hard cap on node depth. Leaves at this depth are never split.
pub const MAX_DEPTH: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("node {0} does not belong to the tree")]
    UnknownNode(NodeId),
    #[error("node {0} is not a leaf")]
    NotALeaf(NodeId),
    #[error("node {0} is not an internal node with two leaf children")]
    NotPrunable(NodeId),
    #[error("invalid tree: {0}")]
    Invalid(String),
    #[error("invalid cutpoint grid: {0}")]
    InvalidGrid(String),
    #[error("invalid tree prior: {0}")]
    InvalidPrior(String),
}

/// Candidate cutpoints per input dimension, all strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct CutpointGrid {
    cuts: Vec<Vec<f64>>,
}

impl CutpointGrid {
    /// `n_cut` equally spaced interior points `i / (n_cut + 1)` per dimension.
    pub fn uniform(dims: usize, n_cut: usize) -> Result<Self, TreeError> {
        if dims == 0 || n_cut == 0 {
            return Err(TreeError::InvalidGrid(
                "need at least one dimension and one cutpoint".into(),
            ));
        }
        let step = 1.0 / (n_cut as f64 + 1.0);
        let axis: Vec<f64> = (1..=n_cut).map(|i| i as f64 * step).collect();
        Ok(CutpointGrid {
            cuts: vec![axis; dims],
        })
    }

    pub fn from_cutpoints(cuts: Vec<Vec<f64>>) -> Result<Self, TreeError> {
        if cuts.is_empty() {
            return Err(TreeError::InvalidGrid("no dimensions".into()));
        }
        for (v, axis) in cuts.iter().enumerate() {
            if axis.is_empty() {
                return Err(TreeError::InvalidGrid(format!("dimension {v} has no cutpoints")));
            }
            if axis.iter().any(|&c| !(c > 0.0 && c < 1.0)) {
                return Err(TreeError::InvalidGrid(format!(
                    "dimension {v} has a cutpoint outside (0, 1)"
                )));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(TreeError::InvalidGrid(format!(
                    "dimension {v} is not strictly increasing"
                )));
            }
        }
        Ok(CutpointGrid { cuts })
    }

    pub fn dims(&self) -> usize {
        self.cuts.len()
    }

    pub fn len(&self, var: usize) -> usize {
        self.cuts[var].len()
    }

    pub fn cutpoints(&self, var: usize) -> &[f64] {
        &self.cuts[var]
    }

    pub fn value(&self, rule: SplitRule) -> f64 {
        self.cuts[rule.var][rule.cut]
    }
}

/// Split `x[var] < cutpoints(var)[cut]` goes left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SplitRule {
    pub var: usize,
    pub cut: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Leaf,
    Split {
        rule: SplitRule,
        left: NodeId,
        right: NodeId,
    },
}

#[derive(Debug, Clone)]
pub struct Node {
    parent: Option<NodeId>,
    depth: usize,
    kind: NodeKind,
}

impl Node {
    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn kind(&self) -> &NodeKind {
        &self.kind
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf)
    }
}

/// Available cutpoint indices per dimension for one node, as half-open
/// ranges into the grid axis. The node's real interval on dimension `v` is
/// `[L, U]` with `L` the cutpoint just below the range (or 0) and `U` the
/// cutpoint just above it (or 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexBounds {
    ranges: Vec<(usize, usize)>,
}

impl IndexBounds {
    pub fn full(grid: &CutpointGrid) -> Self {
        IndexBounds {
            ranges: (0..grid.dims()).map(|v| (0, grid.len(v))).collect(),
        }
    }

    pub fn available(&self, var: usize) -> std::ops::Range<usize> {
        let (lo, hi) = self.ranges[var];
        lo..hi
    }

    pub fn count(&self, var: usize) -> usize {
        let (lo, hi) = self.ranges[var];
        hi.saturating_sub(lo)
    }

    /// Dimensions with at least one available cutpoint.
    pub fn splittable_vars(&self) -> Vec<usize> {
        (0..self.ranges.len()).filter(|&v| self.count(v) > 0).collect()
    }

    pub fn is_splittable(&self) -> bool {
        self.ranges.iter().any(|&(lo, hi)| hi > lo)
    }

    pub fn contains(&self, rule: SplitRule) -> bool {
        let (lo, hi) = self.ranges[rule.var];
        rule.cut >= lo && rule.cut < hi
    }

    pub fn left_of(&self, rule: SplitRule) -> Self {
        let mut out = self.clone();
        out.ranges[rule.var].1 = rule.cut;
        out
    }

    pub fn right_of(&self, rule: SplitRule) -> Self {
        let mut out = self.clone();
        out.ranges[rule.var].0 = rule.cut + 1;
        out
    }

    pub fn interval(&self, var: usize, grid: &CutpointGrid) -> (f64, f64) {
        let (lo, hi) = self.ranges[var];
        let axis = grid.cutpoints(var);
        let lower = if lo == 0 { 0.0 } else { axis[lo - 1] };
        let upper = if hi >= axis.len() { 1.0 } else { axis[hi] };
        (lower, upper)
    }
}

/// Rooted binary tree; internal nodes carry split rules.
#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Default for Tree {
    fn default() -> Self {
        Tree::new()
    }
}

impl PartialEq for Tree {
    /// Structural equality of the reachable topology, ignoring arena layout.
    fn eq(&self, other: &Self) -> bool {
        fn same(a: &Tree, ia: NodeId, b: &Tree, ib: NodeId) -> bool {
            match (&a.nodes[ia].kind, &b.nodes[ib].kind) {
                (NodeKind::Leaf, NodeKind::Leaf) => true,
                (
                    NodeKind::Split {
                        rule: ra,
                        left: la,
                        right: rra,
                    },
                    NodeKind::Split {
                        rule: rb,
                        left: lb,
                        right: rrb,
                    },
                ) => ra == rb && same(a, *la, b, *lb) && same(a, *rra, b, *rrb),
                _ => false,
            }
        }
        same(self, 0, other, 0)
    }
}

impl Tree {
    pub const ROOT: NodeId = 0;

    /// Root-only tree.
    pub fn new() -> Self {
        Tree {
            nodes: vec![Node {
                parent: None,
                depth: 0,
                kind: NodeKind::Leaf,
            }],
        }
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, TreeError> {
        self.nodes.get(id).ok_or(TreeError::UnknownNode(id))
    }

    /// Arena size, including any unreachable slots left by a prune.
    pub fn arena_len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_root_only(&self) -> bool {
        self.nodes[Self::ROOT].is_leaf()
    }

    pub fn children(&self, id: NodeId) -> Option<(NodeId, NodeId)> {
        match self.nodes[id].kind {
            NodeKind::Split { left, right, .. } => Some((left, right)),
            NodeKind::Leaf => None,
        }
    }

    pub fn rule(&self, id: NodeId) -> Option<SplitRule> {
        match self.nodes[id].kind {
            NodeKind::Split { rule, .. } => Some(rule),
            NodeKind::Leaf => None,
        }
    }

    /// Reachable nodes in preorder (node, then left subtree, then right).
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![Self::ROOT];
        while let Some(id) = stack.pop() {
            out.push(id);
            if let NodeKind::Split { left, right, .. } = self.nodes[id].kind {
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }

    /// Terminal nodes in depth-first order; position `b` is leaf index `b + 1`.
    pub fn leaves(&self) -> Vec<NodeId> {
        self.preorder()
            .into_iter()
            .filter(|&id| self.nodes[id].is_leaf())
            .collect()
    }

    pub fn internal_nodes(&self) -> Vec<NodeId> {
        self.preorder()
            .into_iter()
            .filter(|&id| !self.nodes[id].is_leaf())
            .collect()
    }

    /// Internal nodes whose two children are both leaves (death candidates).
    pub fn prunable_nodes(&self) -> Vec<NodeId> {
        self.preorder()
            .into_iter()
            .filter(|&id| match self.nodes[id].kind {
                NodeKind::Split { left, right, .. } => {
                    self.nodes[left].is_leaf() && self.nodes[right].is_leaf()
                }
                NodeKind::Leaf => false,
            })
            .collect()
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves().len()
    }

    /// Largest leaf depth.
    pub fn depth(&self) -> usize {
        self.leaves()
            .into_iter()
            .map(|id| self.nodes[id].depth)
            .max()
            .unwrap_or(0)
    }

    /// Root-to-node path as (ancestor, went_right) pairs, root first.
    pub fn ancestry(&self, id: NodeId) -> Vec<(NodeId, bool)> {
        let mut path = Vec::with_capacity(self.nodes[id].depth);
        let mut child = id;
        while let Some(parent) = self.nodes[child].parent {
            let went_right = matches!(self.nodes[parent].kind, NodeKind::Split { right, .. } if right == child);
            path.push((parent, went_right));
            child = parent;
        }
        path.reverse();
        path
    }

    pub fn index_bounds(&self, id: NodeId, grid: &CutpointGrid) -> Result<IndexBounds, TreeError> {
        if id >= self.nodes.len() {
            return Err(TreeError::UnknownNode(id));
        }
        let mut bounds = IndexBounds::full(grid);
        for (ancestor, went_right) in self.ancestry(id) {
            let rule = self.rule(ancestor).expect("ancestor is internal");
            bounds = if went_right {
                bounds.right_of(rule)
            } else {
                bounds.left_of(rule)
            };
        }
        Ok(bounds)
    }

    /// Leaf reached by hard routing (`x[v] < c` goes left).
    pub fn route(&self, grid: &CutpointGrid, x: &[f64]) -> NodeId {
        let mut id = Self::ROOT;
        while let NodeKind::Split { rule, left, right } = self.nodes[id].kind {
            id = if x[rule.var] < grid.value(rule) { left } else { right };
        }
        id
    }

    /// Turn `leaf` into an internal node with two fresh leaf children.
    /// Returns the (left, right) ids, which are appended to the arena.
    pub fn grow(&mut self, leaf: NodeId, rule: SplitRule) -> Result<(NodeId, NodeId), TreeError> {
        let node = self.nodes.get(leaf).ok_or(TreeError::UnknownNode(leaf))?;
        if !node.is_leaf() {
            return Err(TreeError::NotALeaf(leaf));
        }
        let depth = node.depth + 1;
        let left = self.nodes.len();
        let right = left + 1;
        for _ in 0..2 {
            self.nodes.push(Node {
                parent: Some(leaf),
                depth,
                kind: NodeKind::Leaf,
            });
        }
        self.nodes[leaf].kind = NodeKind::Split { rule, left, right };
        Ok((left, right))
    }

    /// Collapse an internal node whose children are both leaves. The child
    /// slots become unreachable until the next [`Tree::compacted`].
    pub fn prune(&mut self, id: NodeId) -> Result<(NodeId, NodeId), TreeError> {
        let node = self.nodes.get(id).ok_or(TreeError::UnknownNode(id))?;
        let (left, right) = match node.kind {
            NodeKind::Split { left, right, .. }
                if self.nodes[left].is_leaf() && self.nodes[right].is_leaf() =>
            {
                (left, right)
            }
            _ => return Err(TreeError::NotPrunable(id)),
        };
        self.nodes[id].kind = NodeKind::Leaf;
        Ok((left, right))
    }

    /// Preorder rebuild of the reachable nodes. `remap[old]` is the new id of
    /// every reachable old node and `None` for dropped slots.
    pub fn compacted(&self) -> (Tree, Vec<Option<NodeId>>) {
        let order = self.preorder();
        let mut remap = vec![None; self.nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = Some(new);
        }
        let nodes = order
            .iter()
            .map(|&old| {
                let node = &self.nodes[old];
                Node {
                    parent: node.parent.map(|p| remap[p].expect("parent reachable")),
                    depth: node.depth,
                    kind: match node.kind {
                        NodeKind::Leaf => NodeKind::Leaf,
                        NodeKind::Split { rule, left, right } => NodeKind::Split {
                            rule,
                            left: remap[left].expect("child reachable"),
                            right: remap[right].expect("child reachable"),
                        },
                    },
                }
            })
            .collect();
        (Tree { nodes }, remap)
    }

    /// Build from preorder records: `Some(rule)` for internal nodes, `None`
    /// for leaves.
    pub fn from_preorder(records: &[Option<SplitRule>]) -> Result<Tree, TreeError> {
        fn build(
            records: &[Option<SplitRule>],
            pos: &mut usize,
            parent: Option<NodeId>,
            depth: usize,
            nodes: &mut Vec<Node>,
        ) -> Result<NodeId, TreeError> {
            let rec = *records
                .get(*pos)
                .ok_or_else(|| TreeError::Invalid("truncated preorder record list".into()))?;
            *pos += 1;
            let id = nodes.len();
            nodes.push(Node {
                parent,
                depth,
                kind: NodeKind::Leaf,
            });
            if let Some(rule) = rec {
                let left = build(records, pos, Some(id), depth + 1, nodes)?;
                let right = build(records, pos, Some(id), depth + 1, nodes)?;
                nodes[id].kind = NodeKind::Split { rule, left, right };
            }
            Ok(id)
        }
        let mut nodes = Vec::with_capacity(records.len());
        let mut pos = 0;
        build(records, &mut pos, None, 0, &mut nodes)?;
        if pos != records.len() {
            return Err(TreeError::Invalid(format!(
                "{} trailing preorder records",
                records.len() - pos
            )));
        }
        Ok(Tree { nodes })
    }

    /// Preorder records, the inverse of [`Tree::from_preorder`].
    pub fn to_preorder(&self) -> Vec<Option<SplitRule>> {
        self.preorder().into_iter().map(|id| self.rule(id)).collect()
    }

    /// Every split must use a cutpoint available inside its node's bounds.
    pub fn validate(&self, grid: &CutpointGrid) -> Result<(), TreeError> {
        let mut stack = vec![(Self::ROOT, IndexBounds::full(grid))];
        while let Some((id, bounds)) = stack.pop() {
            if self.nodes[id].depth > MAX_DEPTH {
                return Err(TreeError::Invalid(format!("node {id} exceeds the depth cap")));
            }
            if let NodeKind::Split { rule, left, right } = self.nodes[id].kind {
                if rule.var >= grid.dims() || rule.cut >= grid.len(rule.var) {
                    return Err(TreeError::Invalid(format!(
                        "node {id} uses a rule outside the cutpoint grid"
                    )));
                }
                if !bounds.contains(rule) {
                    return Err(TreeError::Invalid(format!(
                        "node {id} splits outside its bounds (no available cutpoint)"
                    )));
                }
                stack.push((right, bounds.right_of(rule)));
                stack.push((left, bounds.left_of(rule)));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for id in self.preorder() {
            let node = &self.nodes[id];
            let pad = "  ".repeat(node.depth);
            match node.kind {
                NodeKind::Leaf => writeln!(f, "{pad}leaf#{id}")?,
                NodeKind::Split { rule, .. } => {
                    writeln!(f, "{pad}x{} < cut[{}]", rule.var, rule.cut)?
                }
            }
        }
        Ok(())
    }
}

/// Per-dimension interval `[L_v, U_v]` implied by the ancestors of `node`.
pub fn node_bounds(tree: &Tree, node: NodeId, grid: &CutpointGrid) -> Result<Vec<(f64, f64)>, TreeError> {
    let bounds = tree.index_bounds(node, grid)?;
    Ok((0..grid.dims()).map(|v| bounds.interval(v, grid)).collect())
}

/// Depth-penalising prior `P(node internal) = alpha (1 + depth)^(-beta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreePrior {
    alpha: f64,
    beta: f64,
}

impl TreePrior {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, TreeError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(TreeError::InvalidPrior(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(TreeError::InvalidPrior(format!("beta must be >= 0, got {beta}")));
        }
        Ok(TreePrior { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn split_prob(&self, depth: usize) -> f64 {
        depth_split_prob(depth, self)
    }

    /// Log prior mass of a leaf at `depth` staying terminal. Leaves that
    /// cannot split (no cutpoints left, or at the depth cap) are terminal
    /// with probability one.
    fn log_terminal(&self, depth: usize, bounds: &IndexBounds) -> f64 {
        if depth >= MAX_DEPTH || !bounds.is_splittable() {
            0.0
        } else {
            (1.0 - self.split_prob(depth)).ln()
        }
    }
}

pub fn depth_split_prob(depth: usize, prior: &TreePrior) -> f64 {
    prior.alpha * (1.0 + depth as f64).powf(-prior.beta)
}

/// Log of the rule-choice probability at a node: uniform over splittable
/// dimensions, then uniform over available cutpoints.
fn log_rule_prob(bounds: &IndexBounds, var: usize) -> f64 {
    let vars = bounds.splittable_vars().len() as f64;
    -(vars.ln()) - (bounds.count(var) as f64).ln()
}

pub fn log_tree_prior(tree: &Tree, prior: &TreePrior, grid: &CutpointGrid) -> Result<f64, TreeError> {
    tree.validate(grid)?;
    let mut total = 0.0;
    let mut stack = vec![(Tree::ROOT, IndexBounds::full(grid))];
    while let Some((id, bounds)) = stack.pop() {
        let depth = tree.nodes[id].depth;
        match tree.nodes[id].kind {
            NodeKind::Leaf => total += prior.log_terminal(depth, &bounds),
            NodeKind::Split { rule, left, right } => {
                total += prior.split_prob(depth).ln() + log_rule_prob(&bounds, rule.var);
                stack.push((left, bounds.left_of(rule)));
                stack.push((right, bounds.right_of(rule)));
            }
        }
    }
    Ok(total)
}

/// Change in [`log_tree_prior`] when `leaf` (at `depth` with `bounds`) is
/// split on `rule`.
pub(crate) fn log_prior_birth_delta(
    prior: &TreePrior,
    depth: usize,
    bounds: &IndexBounds,
    rule: SplitRule,
) -> f64 {
    prior.split_prob(depth).ln() + log_rule_prob(bounds, rule.var)
        + prior.log_terminal(depth + 1, &bounds.left_of(rule))
        + prior.log_terminal(depth + 1, &bounds.right_of(rule))
        - prior.log_terminal(depth, bounds)
}

fn draw_rule<R: Rng + ?Sized>(bounds: &IndexBounds, rng: &mut R) -> Option<SplitRule> {
    let vars = bounds.splittable_vars();
    if vars.is_empty() {
        return None;
    }
    let var = vars[rng.random_range(0..vars.len())];
    let cut = rng.random_range(bounds.available(var));
    Some(SplitRule { var, cut })
}

/// Draw a topology from the tree prior by recursive growth.
pub fn sample_prior_tree<R: Rng + ?Sized>(prior: &TreePrior, grid: &CutpointGrid, rng: &mut R) -> Tree {
    let mut tree = Tree::new();
    let mut stack = vec![(Tree::ROOT, IndexBounds::full(grid))];
    while let Some((id, bounds)) = stack.pop() {
        let depth = tree.nodes[id].depth;
        if depth >= MAX_DEPTH || !bounds.is_splittable() {
            continue;
        }
        if rng.random::<f64>() < prior.split_prob(depth) {
            let rule = draw_rule(&bounds, rng).expect("node is splittable");
            let (left, right) = tree.grow(id, rule).expect("id is a leaf");
            stack.push((right, bounds.right_of(rule)));
            stack.push((left, bounds.left_of(rule)));
        }
    }
    tree
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    Birth,
    Death,
}

/// Candidate topology with exact log proposal densities for the MH ratio.
///
/// For a birth, `node` is the split leaf and `children` the new ids in
/// `tree`. For a death, `node` is the collapsed internal node and `children`
/// the removed leaves (unreachable in `tree`, valid in the original).
#[derive(Debug, Clone)]
pub struct Proposal {
    pub tree: Tree,
    pub kind: MoveKind,
    pub node: NodeId,
    pub children: (NodeId, NodeId),
    pub rule: SplitRule,
    pub log_forward: f64,
    pub log_reverse: f64,
    /// `log pi(T') - log pi(T)`.
    pub log_prior_ratio: f64,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum NoValidMove {
    #[error("death proposed on a root-only tree")]
    RootOnly,
    #[error("chosen leaf has no available split rule")]
    NoAvailableRule,
}

/// Probability of proposing a birth from `tree`.
pub fn birth_probability(tree: &Tree) -> f64 {
    if tree.is_root_only() {
        1.0
    } else {
        0.5
    }
}

/// Birth/death proposal: birth with probability [`birth_probability`], leaf
/// chosen uniformly, rule uniform over available dimensions then cutpoints;
/// death picks uniformly among nodes with two leaf children.
pub fn propose_move<R: Rng + ?Sized>(
    tree: &Tree,
    prior: &TreePrior,
    grid: &CutpointGrid,
    rng: &mut R,
) -> Result<Proposal, NoValidMove> {
    if rng.random::<f64>() < birth_probability(tree) {
        let leaves = tree.leaves();
        let leaf = leaves[rng.random_range(0..leaves.len())];
        let bounds = tree.index_bounds(leaf, grid).expect("leaf exists");
        if tree.nodes[leaf].depth >= MAX_DEPTH {
            return Err(NoValidMove::NoAvailableRule);
        }
        let rule = draw_rule(&bounds, rng).ok_or(NoValidMove::NoAvailableRule)?;
        propose_birth_at(tree, prior, grid, leaf, rule)
    } else {
        let candidates = tree.prunable_nodes();
        if candidates.is_empty() {
            return Err(NoValidMove::RootOnly);
        }
        let node = candidates[rng.random_range(0..candidates.len())];
        propose_death_at(tree, prior, grid, node)
    }
}

/// Deterministic birth of `rule` at `leaf`, with the densities
/// [`propose_move`] would assign to it.
pub fn propose_birth_at(
    tree: &Tree,
    prior: &TreePrior,
    grid: &CutpointGrid,
    leaf: NodeId,
    rule: SplitRule,
) -> Result<Proposal, NoValidMove> {
    let bounds = tree.index_bounds(leaf, grid).map_err(|_| NoValidMove::NoAvailableRule)?;
    let depth = tree.nodes[leaf].depth;
    if !tree.nodes[leaf].is_leaf() || depth >= MAX_DEPTH || !bounds.contains(rule) {
        return Err(NoValidMove::NoAvailableRule);
    }
    let log_forward = birth_probability(tree).ln() - (tree.num_leaves() as f64).ln()
        + log_rule_prob(&bounds, rule.var);
    let mut next = tree.clone();
    let children = next.grow(leaf, rule).expect("leaf checked");
    let log_reverse = (1.0 - birth_probability(&next)).ln() - (next.prunable_nodes().len() as f64).ln();
    Ok(Proposal {
        log_prior_ratio: log_prior_birth_delta(prior, depth, &bounds, rule),
        tree: next,
        kind: MoveKind::Birth,
        node: leaf,
        children,
        rule,
        log_forward,
        log_reverse,
    })
}

/// Deterministic death at `node`, with the densities [`propose_move`] would
/// assign to it.
pub fn propose_death_at(
    tree: &Tree,
    prior: &TreePrior,
    grid: &CutpointGrid,
    node: NodeId,
) -> Result<Proposal, NoValidMove> {
    if tree.is_root_only() {
        return Err(NoValidMove::RootOnly);
    }
    let rule = tree.rule(node).ok_or(NoValidMove::RootOnly)?;
    let bounds = tree.index_bounds(node, grid).map_err(|_| NoValidMove::RootOnly)?;
    let depth = tree.nodes[node].depth;
    let log_forward = (1.0 - birth_probability(tree)).ln() - (tree.prunable_nodes().len() as f64).ln();
    let mut next = tree.clone();
    let children = next.prune(node).map_err(|_| NoValidMove::RootOnly)?;
    let log_reverse = birth_probability(&next).ln() - (next.num_leaves() as f64).ln()
        + log_rule_prob(&bounds, rule.var);
    Ok(Proposal {
        log_prior_ratio: -log_prior_birth_delta(prior, depth, &bounds, rule),
        tree: next,
        kind: MoveKind::Death,
        node,
        children,
        rule,
        log_forward,
        log_reverse,
    })
}
