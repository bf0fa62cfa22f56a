//! UCB tree search with lazily grown trees.
//!
//! The tree is grown one path per iteration. Unexplored regions are
//! summarized by *dummy nodes*: a visited node with at least one uncreated
//! child owns one dummy standing for all paths through its maximum
//! unexplored sub-tree. Every such path shares the same kernel products with
//! the training arms (only the explored prefix matters), hence the same
//! posterior and the same upper confidence value, so the candidate set `S`
//! of leaves and dummies (at most `(D + 1) t + 1` elements after `t`
//! iterations) suffices to locate the UCB argmax over all `B^D` paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::gp::{BetaSchedule, PosteriorState};
use crate::kernels::{common_prefix_len, ChiSequence, Path};

/// Comparison slack when collecting tied maximizers.
const TIE_TOL: f64 = 1e-12;

/// How cached upper-confidence values are brought up to date after each
/// observation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Re-solve every candidate from scratch (the plain per-iteration loop).
    Recompute,
    /// Extend each candidate's triangular solve by one entry per
    /// observation. Produces bit-identical values to [`UpdateMode::Recompute`]
    /// at `O(|S| t)` instead of `O(|S| t^2)` per iteration.
    Incremental,
}

/// How the cached-UCB argmax is located.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// Scan the candidate set (the specified contract).
    FlatScan,
    /// Propagate max values to ancestors and walk down from the root.
    TreeDescent,
}

/// When a search run stops.
#[derive(Clone, Debug)]
pub enum StoppingRule {
    /// Run exactly this many iterations (fewer if the tree is exhausted).
    FixedIterations(usize),
    /// Stop once the confidence interval of the best observed arm is
    /// narrower than `threshold` (width `2 beta sigma`), with a hard cap.
    ConfidenceWidth { threshold: f64, max_iterations: usize },
    /// Stop once a wall-clock budget is spent.
    WallClock { budget: Duration, max_iterations: Option<usize> },
}

/// Maps an action prefix to the number of actions available below it.
pub type ArityOracle = Box<dyn Fn(&[u32]) -> usize>;

/// Branching structure of the searched tree. The kernel theory assumes a
/// uniform factor; planners may supply a per-node arity oracle keyed by the
/// action prefix.
pub enum Branching {
    Uniform(usize),
    PerNode(ArityOracle),
}

impl Branching {
    fn arity(&self, prefix: &[u32]) -> usize {
        match self {
            Branching::Uniform(b) => *b,
            Branching::PerNode(f) => f(prefix),
        }
    }
}

impl fmt::Debug for Branching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Branching::Uniform(b) => write!(f, "Uniform({b})"),
            Branching::PerNode(_) => write!(f, "PerNode(..)"),
        }
    }
}

/// Configuration of one search run.
#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub chi: ChiSequence,
    pub noise_var: f64,
    pub delta: f64,
    pub beta_scale: f64,
    /// Override for the arm count inside the confidence schedule
    /// (defaults to `B^D`).
    pub num_arms: Option<f64>,
    pub seed: u64,
    pub update: UpdateMode,
    pub selection: SelectionStrategy,
}

impl SearchConfig {
    pub fn new(chi: ChiSequence, noise_var: f64) -> Self {
        SearchConfig {
            chi,
            noise_var,
            delta: 0.05,
            beta_scale: 1.0,
            num_arms: None,
            seed: 0,
            update: UpdateMode::Recompute,
            selection: SelectionStrategy::FlatScan,
        }
    }
}

/// Known ground truth for synthetic runs; enables regret columns.
pub struct Truth {
    pub f_star: f64,
    pub f: Box<dyn Fn(&Path) -> f64>,
}

/// One iteration of the trace: the chosen arm, its reward, and the posterior
/// statistics the selection was based on.
#[derive(Clone, Debug, Serialize)]
pub struct TraceRow {
    pub t: usize,
    pub path: Path,
    pub reward: f64,
    pub mu: f64,
    pub sigma: f64,
    pub beta: f64,
    pub ucb: f64,
    pub cum_regret: Option<f64>,
}

/// Full record of a run.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SearchTrace {
    pub rows: Vec<TraceRow>,
    pub f_star: Option<f64>,
}

impl SearchTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Best observed arm so far (ties resolved to the earliest).
    pub fn best(&self) -> Option<(&Path, f64)> {
        self.rows
            .iter()
            .fold(None, |acc: Option<(&Path, f64)>, row| match acc {
                Some((_, y)) if y >= row.reward => acc,
                _ => Some((&row.path, row.reward)),
            })
    }

    /// Sum of observed rewards.
    pub fn total_observed(&self) -> f64 {
        self.rows.iter().map(|r| r.reward).sum()
    }

    /// CSV serialization: fixed column order, versioned header comment,
    /// `cum_regret` left empty when no ground truth was attached.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# gpts trace v1\n");
        out.push_str("t,path,reward,mu,sigma,beta,ucb,cum_regret\n");
        for r in &self.rows {
            let cum = r.cum_regret.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.t, r.path, r.reward, r.mu, r.sigma, r.beta, r.ucb, cum
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CandidateKind {
    /// A concrete depth-`D` arm.
    Leaf { node: usize },
    /// Stand-in for all paths through the uncreated children of `parent`.
    Dummy { parent: usize },
}

/// A candidate with its cached posterior statistics.
struct Scored {
    kind: CandidateKind,
    /// Action prefix identifying the candidate for kernel purposes: the full
    /// path for a leaf, the prefix up to the parent for a dummy.
    actions: Vec<u32>,
    mu: f64,
    var: f64,
    ucb: f64,
    /// Prefix of the triangular solve `L^{-1} k` (incremental mode).
    solved: Vec<f64>,
    /// Running `sum v_i z_i` and `sum v_i^2` matching `solved`.
    mu_acc: f64,
    sq_acc: f64,
}

struct Node {
    /// Action path from the root; doubles as the node identifier.
    prefix: Vec<u32>,
    arity: usize,
    created_actions: Vec<u32>,
    children: Vec<usize>,
    dummy_s: Option<usize>,
    leaf_s: Option<usize>,
}

impl Node {
    fn depth(&self) -> usize {
        self.prefix.len()
    }
}

/// Read-only view of one candidate, for inspection and tests.
#[derive(Clone, Debug)]
pub struct CandidateView {
    pub is_dummy: bool,
    pub actions: Vec<u32>,
    pub mu: f64,
    pub sigma: f64,
    pub ucb: f64,
}

/// Arena of created nodes plus the candidate set `S`.
pub struct SearchTree {
    depth: usize,
    branching: Branching,
    nodes: Vec<Node>,
    s: Vec<Scored>,
    /// Per-node propagated max (tree-descent selection).
    node_values: Vec<f64>,
}

impl SearchTree {
    /// Create the root and its initial dummy `d_0`.
    pub fn new(depth: usize, branching: Branching) -> Result<Self> {
        if depth < 1 {
            return Err(Error::Parameter(format!("tree depth must be >= 1, got {depth}")));
        }
        let root_arity = branching.arity(&[]);
        if root_arity < 1 {
            return Err(Error::Parameter("root must have at least one action".into()));
        }
        let mut tree = SearchTree {
            depth,
            branching,
            nodes: vec![Node {
                prefix: Vec::new(),
                arity: root_arity,
                created_actions: Vec::new(),
                children: Vec::new(),
                dummy_s: None,
                leaf_s: None,
            }],
            s: Vec::new(),
            node_values: Vec::new(),
        };
        tree.push_candidate(CandidateKind::Dummy { parent: 0 });
        Ok(tree)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of created nodes (root included).
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Size of the candidate set `S`.
    pub fn candidate_count(&self) -> usize {
        self.s.len()
    }

    pub fn dummy_count(&self) -> usize {
        self.s.iter().filter(|c| matches!(c.kind, CandidateKind::Dummy { .. })).count()
    }

    /// Created non-leaf nodes that still have at least one uncreated child.
    /// Always equals [`SearchTree::dummy_count`].
    pub fn nodes_with_uncreated_children(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.depth() < self.depth && n.created_actions.len() < n.arity)
            .count()
    }

    pub fn candidates(&self) -> impl Iterator<Item = CandidateView> + '_ {
        self.s.iter().map(|c| CandidateView {
            is_dummy: matches!(c.kind, CandidateKind::Dummy { .. }),
            actions: c.actions.clone(),
            mu: c.mu,
            sigma: c.var.sqrt(),
            ucb: c.ucb,
        })
    }

    fn push_candidate(&mut self, kind: CandidateKind) {
        let actions = match kind {
            CandidateKind::Leaf { node } => self.nodes[node].prefix.clone(),
            CandidateKind::Dummy { parent } => self.nodes[parent].prefix.clone(),
        };
        let idx = self.s.len();
        match kind {
            CandidateKind::Leaf { node } => self.nodes[node].leaf_s = Some(idx),
            CandidateKind::Dummy { parent } => self.nodes[parent].dummy_s = Some(idx),
        }
        self.s.push(Scored {
            kind,
            actions,
            mu: f64::NAN,
            var: f64::NAN,
            ucb: f64::NAN,
            solved: Vec::new(),
            mu_acc: 0.0,
            sq_acc: 0.0,
        });
    }

    fn remove_candidate(&mut self, idx: usize) {
        match self.s[idx].kind {
            CandidateKind::Leaf { node } => self.nodes[node].leaf_s = None,
            CandidateKind::Dummy { parent } => self.nodes[parent].dummy_s = None,
        }
        self.s.swap_remove(idx);
        if idx < self.s.len() {
            // Fix the back-reference of the element that moved into `idx`.
            match self.s[idx].kind {
                CandidateKind::Leaf { node } => self.nodes[node].leaf_s = Some(idx),
                CandidateKind::Dummy { parent } => self.nodes[parent].dummy_s = Some(idx),
            }
        }
    }

    fn alloc_node(&mut self, parent: usize, action: u32) -> usize {
        let mut prefix = self.nodes[parent].prefix.clone();
        prefix.push(action);
        let arity = if prefix.len() < self.depth { self.branching.arity(&prefix) } else { 0 };
        let idx = self.nodes.len();
        self.nodes.push(Node {
            prefix,
            arity,
            created_actions: Vec::new(),
            children: Vec::new(),
            dummy_s: None,
            leaf_s: None,
        });
        self.nodes[parent].created_actions.push(action);
        self.nodes[parent].children.push(idx);
        idx
    }

    /// Turn a selected candidate into a concrete arm. A leaf is returned
    /// as-is. A dummy spawns one new sibling under its parent (deleting the
    /// dummy once the parent's children are exhausted), then walks down
    /// creating one child and one dummy per level until depth `D`; the new
    /// dummies and the final leaf join `S`.
    pub fn materialize<R: Rng + ?Sized>(&mut self, s_index: usize, rng: &mut R) -> Result<Path> {
        let kind = self.s[s_index].kind;
        match kind {
            CandidateKind::Leaf { node } => Ok(Path::new(self.nodes[node].prefix.clone())),
            CandidateKind::Dummy { parent } => {
                let uncreated: Vec<u32> = (0..self.nodes[parent].arity as u32)
                    .filter(|a| !self.nodes[parent].created_actions.contains(a))
                    .collect();
                debug_assert!(!uncreated.is_empty(), "dummy with no uncreated siblings");
                let action = if uncreated.len() == 1 {
                    uncreated[0]
                } else {
                    uncreated[rng.random_range(0..uncreated.len())]
                };
                let mut cur = self.alloc_node(parent, action);
                if uncreated.len() == 1 {
                    self.remove_candidate(s_index);
                }
                while self.nodes[cur].depth() < self.depth {
                    let arity = self.nodes[cur].arity;
                    if arity < 1 {
                        return Err(Error::Environment(format!(
                            "node {:?} has no actions before reaching depth {}",
                            self.nodes[cur].prefix, self.depth
                        )));
                    }
                    let action =
                        if arity == 1 { 0 } else { rng.random_range(0..arity) as u32 };
                    let child = self.alloc_node(cur, action);
                    if arity > 1 {
                        self.push_candidate(CandidateKind::Dummy { parent: cur });
                    }
                    cur = child;
                }
                self.push_candidate(CandidateKind::Leaf { node: cur });
                Ok(Path::new(self.nodes[cur].prefix.clone()))
            }
        }
    }

    /// Drop the leaf candidate of an already-played arm (noise-free runs).
    fn remove_leaf_candidate(&mut self, path: &Path) {
        let mut cur = 0usize;
        for a in path.actions() {
            match self.nodes[cur]
                .created_actions
                .iter()
                .position(|c| c == a)
                .map(|i| self.nodes[cur].children[i])
            {
                Some(child) => cur = child,
                None => return,
            }
        }
        if let Some(idx) = self.nodes[cur].leaf_s {
            self.remove_candidate(idx);
        }
    }

    /// Recompute the per-node propagated maxima (bottom-up; children were
    /// created after their parents, so one reverse sweep suffices).
    fn propagate_values(&mut self) {
        self.node_values.resize(self.nodes.len(), f64::NEG_INFINITY);
        for i in (0..self.nodes.len()).rev() {
            let node = &self.nodes[i];
            let mut best = f64::NEG_INFINITY;
            if let Some(s) = node.leaf_s {
                best = self.s[s].ucb;
            }
            if let Some(s) = node.dummy_s {
                best = best.max(self.s[s].ucb);
            }
            for &c in &node.children {
                best = best.max(self.node_values[c]);
            }
            self.node_values[i] = best;
        }
    }

    fn descend<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        enum Step {
            IntoChild(usize),
            TakeCandidate(usize),
        }
        let mut cur = 0usize;
        if self.node_values[cur] == f64::NEG_INFINITY {
            return Err(Error::ExhaustedTree);
        }
        loop {
            let node = &self.nodes[cur];
            if node.depth() == self.depth {
                return node.leaf_s.ok_or(Error::ExhaustedTree);
            }
            // Options: each created child (by its propagated value) plus the
            // node's own dummy.
            let mut options: Vec<(f64, Step)> = node
                .children
                .iter()
                .map(|&c| (self.node_values[c], Step::IntoChild(c)))
                .collect();
            if let Some(s) = node.dummy_s {
                options.push((self.s[s].ucb, Step::TakeCandidate(s)));
            }
            let max = options.iter().map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(Error::ExhaustedTree);
            }
            let ties: Vec<usize> = options
                .iter()
                .enumerate()
                .filter(|(_, (v, _))| *v >= max - TIE_TOL)
                .map(|(i, _)| i)
                .collect();
            let pick = if ties.len() == 1 {
                ties[0]
            } else {
                ties[rng.random_range(0..ties.len())]
            };
            match options[pick].1 {
                Step::TakeCandidate(s_index) => return Ok(s_index),
                Step::IntoChild(child) => cur = child,
            }
        }
    }
}

/// Indices achieving the maximum of `values` up to [`TIE_TOL`].
fn max_indices(values: impl Iterator<Item = f64>) -> Vec<usize> {
    let collected: Vec<f64> = values.collect();
    let max = collected.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Vec::new();
    }
    collected
        .iter()
        .enumerate()
        .filter(|(_, v)| **v >= max - TIE_TOL)
        .map(|(i, _)| i)
        .collect()
}

/// The candidate chosen by one selection, with the posterior statistics its
/// upper confidence value was computed from. The index is valid until the
/// tree is next mutated.
#[derive(Clone, Debug)]
pub struct Selected {
    pub s_index: usize,
    pub is_dummy: bool,
    pub actions: Vec<u32>,
    pub mu: f64,
    pub sigma: f64,
    pub ucb: f64,
}

/// One GPTS run: tree, posterior, schedule, and trace.
pub struct Search {
    tree: SearchTree,
    state: PosteriorState,
    schedule: BetaSchedule,
    update: UpdateMode,
    selection: SelectionStrategy,
    rng: ChaCha8Rng,
    trace: SearchTrace,
    truth: Option<Truth>,
    cum_regret: f64,
    /// Beta for the upcoming selection (index `t + 1` after `t` observations).
    current_beta: f64,
    /// Posterior epoch the cached solves belong to.
    cached_epoch: u64,
}

impl Search {
    pub fn new(config: SearchConfig) -> Result<Self> {
        let branching = Branching::Uniform(config.chi.branching);
        Self::with_branching(config, branching)
    }

    /// Variant with an explicit branching structure (planning on MDPs whose
    /// arity varies by state).
    pub fn with_branching(config: SearchConfig, branching: Branching) -> Result<Self> {
        config.chi.validate()?;
        let tree = SearchTree::new(config.chi.depth, branching)?;
        let state = PosteriorState::new(config.chi.clone(), config.noise_var)?;
        let num_arms = config.num_arms.unwrap_or_else(|| config.chi.num_paths_f64());
        let schedule = BetaSchedule::with_scale(config.delta, num_arms, config.beta_scale)?;
        let current_beta = schedule.beta(1)?;
        let mut search = Search {
            tree,
            state,
            schedule,
            update: config.update,
            selection: config.selection,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            trace: SearchTrace::default(),
            truth: None,
            cum_regret: 0.0,
            current_beta,
            cached_epoch: 0,
        };
        search.refresh()?;
        Ok(search)
    }

    /// Attach a ground-truth function; enables the `cum_regret` column.
    pub fn with_truth(mut self, truth: Truth) -> Self {
        self.trace.f_star = Some(truth.f_star);
        self.truth = Some(truth);
        self
    }

    pub fn tree(&self) -> &SearchTree {
        &self.tree
    }

    pub fn state(&self) -> &PosteriorState {
        &self.state
    }

    pub fn trace(&self) -> &SearchTrace {
        &self.trace
    }

    pub fn into_trace(self) -> SearchTrace {
        self.trace
    }

    /// Beta that the next selection will use.
    pub fn current_beta(&self) -> f64 {
        self.current_beta
    }

    /// Pick the candidate with the highest cached upper confidence value.
    /// The very first selection is the root's dummy by construction; later
    /// ties are broken uniformly at random.
    pub fn select_arm(&mut self) -> Result<Selected> {
        if self.tree.s.is_empty() {
            return Err(Error::ExhaustedTree);
        }
        let idx = if self.state.is_empty() {
            // t = 0: S holds exactly the root dummy.
            0
        } else {
            match self.selection {
                SelectionStrategy::FlatScan => {
                    let ties = max_indices(self.tree.s.iter().map(|c| c.ucb));
                    if ties.is_empty() {
                        return Err(Error::ExhaustedTree);
                    }
                    if ties.len() == 1 {
                        ties[0]
                    } else {
                        ties[self.rng.random_range(0..ties.len())]
                    }
                }
                SelectionStrategy::TreeDescent => self.tree.descend(&mut self.rng)?,
            }
        };
        let c = &self.tree.s[idx];
        Ok(Selected {
            s_index: idx,
            is_dummy: matches!(c.kind, CandidateKind::Dummy { .. }),
            actions: c.actions.clone(),
            mu: c.mu,
            sigma: c.var.sqrt(),
            ucb: c.ucb,
        })
    }

    /// Concretize a selected candidate into an arm (see
    /// [`SearchTree::materialize`]).
    pub fn materialize(&mut self, selected: &Selected) -> Result<Path> {
        self.tree.materialize(selected.s_index, &mut self.rng)
    }

    /// One iteration: select, materialize, observe, update the posterior,
    /// and refresh every cached upper confidence value.
    pub fn step(&mut self, reward_source: &mut dyn FnMut(&Path) -> f64) -> Result<&TraceRow> {
        let selected = self.select_arm()?;
        let beta_used = self.current_beta;
        let path = self.materialize(&selected)?;
        let reward = reward_source(&path);
        self.state.push_observation(&path, reward)?;
        if self.state.noise_var() == 0.0 {
            self.tree.remove_leaf_candidate(&path);
        }
        let t = self.state.len();
        self.current_beta = self.schedule.beta(t + 1)?;
        self.refresh()?;
        let cum_regret = self.truth.as_ref().map(|truth| {
            self.cum_regret += truth.f_star - (truth.f)(&path);
            self.cum_regret
        });
        self.trace.rows.push(TraceRow {
            t,
            path,
            reward,
            mu: selected.mu,
            sigma: selected.sigma,
            beta: beta_used,
            ucb: selected.ucb,
            cum_regret,
        });
        Ok(self.trace.rows.last().expect("row just pushed"))
    }

    /// Iterate until the stopping rule fires or the tree is exhausted.
    pub fn run(
        &mut self,
        stop: &StoppingRule,
        reward_source: &mut dyn FnMut(&Path) -> f64,
    ) -> Result<()> {
        let started = Instant::now();
        loop {
            let done = match stop {
                StoppingRule::FixedIterations(max) => self.trace.len() >= *max,
                StoppingRule::ConfidenceWidth { threshold, max_iterations } => {
                    self.trace.len() >= *max_iterations
                        || match self.trace.best() {
                            Some((best, _)) if !self.trace.is_empty() => {
                                let (_, var) = self.state.posterior(best)?;
                                2.0 * self.current_beta * var.sqrt() < *threshold
                            }
                            _ => false,
                        }
                }
                StoppingRule::WallClock { budget, max_iterations } => {
                    started.elapsed() >= *budget
                        || max_iterations.map(|m| self.trace.len() >= m).unwrap_or(false)
                }
            };
            if done || self.tree.s.is_empty() {
                return Ok(());
            }
            self.step(reward_source)?;
        }
    }

    /// Recompute or extend the cached statistics of every candidate for the
    /// current posterior and the upcoming selection's beta.
    fn refresh(&mut self) -> Result<()> {
        let chi = self.state.chi().clone();
        let chi_zero = chi.chi_zero();
        let t = self.state.len();
        let full = match self.update {
            UpdateMode::Recompute => true,
            // A jitter rebuild rewrites the factor; cached solves die with it.
            UpdateMode::Incremental => self.state.epoch() != self.cached_epoch,
        };
        self.cached_epoch = self.state.epoch();
        let beta = self.current_beta;
        for cand in self.tree.s.iter_mut() {
            let extend = !full && cand.solved.len() + 1 == t && t > 0;
            if extend {
                let row = self.state.factor_row(t - 1);
                let arm = &self.state.arms()[t - 1];
                let k_new =
                    chi.value(chi.depth - common_prefix_len(&cand.actions, arm.actions()));
                let v_new = (k_new - dot(&row[..t - 1], &cand.solved)) / row[t - 1];
                cand.mu_acc += v_new * self.state.scaled_observations()[t - 1];
                cand.sq_acc += v_new * v_new;
                cand.solved.push(v_new);
            } else {
                let k: Vec<f64> = self
                    .state
                    .arms()
                    .iter()
                    .map(|arm| {
                        chi.value(chi.depth - common_prefix_len(&cand.actions, arm.actions()))
                    })
                    .collect();
                let v = self.state.solve_lower(&k);
                cand.mu_acc = dot(&v, self.state.scaled_observations());
                cand.sq_acc = dot(&v, &v);
                cand.solved = if self.update == UpdateMode::Incremental { v } else { Vec::new() };
            }
            cand.mu = cand.mu_acc;
            cand.var = (chi_zero - cand.sq_acc).clamp(0.0, chi_zero);
            cand.ucb = cand.mu + beta * cand.var.sqrt();
        }
        if self.selection == SelectionStrategy::TreeDescent {
            self.tree.propagate_values();
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Convenience wrapper: build a search from `config`, run it under `stop`,
/// and return the trace.
pub fn run_search(
    config: SearchConfig,
    stop: &StoppingRule,
    truth: Option<Truth>,
    reward_source: &mut dyn FnMut(&Path) -> f64,
) -> Result<SearchTrace> {
    let mut search = Search::new(config)?;
    if let Some(truth) = truth {
        search = search.with_truth(truth);
    }
    search.run(stop, reward_source)?;
    Ok(search.into_trace())
}
