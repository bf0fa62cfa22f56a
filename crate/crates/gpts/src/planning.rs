//! Open-loop planning in discounted deterministic MDPs.
//!
//! A fixed action sequence of length `D` collects the discounted sum of its
//! intermediate rewards. Modelling each state's reward vector as independent
//! unit Gaussians makes two sequences sharing `h` actions covary by
//! `(1 - gamma^{2h}) / (1 - gamma^2)`, the MDP chi-kernel, so the tree
//! search applies directly, with the horizon grown logarithmically in the
//! iteration budget.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::kernels::{chi_mdp, Path};
use crate::search::{
    ArityOracle, Branching, Search, SearchConfig, SearchTrace, SelectionStrategy, StoppingRule,
    Truth, UpdateMode,
};

/// A deterministic-transition MDP exposed through a generative interface.
/// Implementations must keep intermediate rewards within `[-1, 1]`.
pub trait GenerativeMdp {
    type State: Clone;

    fn initial_state(&self) -> Self::State;
    /// Number of actions available in `state` (indices `0..arity`).
    fn arity(&self, state: &Self::State) -> usize;
    /// Deterministic transition: next state and intermediate reward.
    fn step(&self, state: &Self::State, action: u32) -> Result<(Self::State, f64)>;
    fn discount(&self) -> f64;
}

/// Tabular MDP loadable from a JSON description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TabularMdp {
    pub gamma: f64,
    pub initial_state: String,
    pub states: Vec<TabularState>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TabularState {
    pub name: String,
    pub actions: Vec<TabularAction>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TabularAction {
    pub next: String,
    pub reward: f64,
}

impl TabularMdp {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut mdp: TabularMdp = serde_json::from_str(text)
            .map_err(|e| Error::Input(format!("cannot parse MDP description: {e}")))?;
        mdp.validate()?;
        Ok(mdp)
    }

    /// Check the description and rebuild the name index. Must be called
    /// after constructing or mutating the struct by hand; `from_json` does
    /// it for you.
    pub fn validate(&mut self) -> Result<()> {
        self.index =
            self.states.iter().enumerate().map(|(i, s)| (s.name.clone(), i)).collect();
        if self.index.len() != self.states.len() {
            return Err(Error::Input("duplicate state names in MDP description".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Input(format!(
                "discount must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if !self.index.contains_key(&self.initial_state) {
            return Err(Error::Input(format!("unknown initial state `{}`", self.initial_state)));
        }
        for state in &self.states {
            if state.actions.is_empty() {
                return Err(Error::Input(format!("state `{}` has no actions", state.name)));
            }
            for action in &state.actions {
                if !self.index.contains_key(&action.next) {
                    return Err(Error::Input(format!(
                        "state `{}` transitions to unknown state `{}`",
                        state.name, action.next
                    )));
                }
                if !(-1.0..=1.0).contains(&action.reward) {
                    return Err(Error::Input(format!(
                        "reward {} in state `{}` falls outside [-1, 1]",
                        action.reward, state.name
                    )));
                }
            }
        }
        Ok(())
    }
}

impl GenerativeMdp for TabularMdp {
    type State = usize;

    fn initial_state(&self) -> usize {
        self.index[&self.initial_state]
    }

    fn arity(&self, state: &usize) -> usize {
        self.states[*state].actions.len()
    }

    fn step(&self, state: &usize, action: u32) -> Result<(usize, f64)> {
        let actions = &self.states[*state].actions;
        let a = actions.get(action as usize).ok_or_else(|| {
            Error::Environment(format!(
                "action {action} out of range for state `{}` ({} actions)",
                self.states[*state].name,
                actions.len()
            ))
        })?;
        Ok((self.index[&a.next], a.reward))
    }

    fn discount(&self) -> f64 {
        self.gamma
    }
}

/// Discounted return of an action sequence from the initial state:
/// `sum_tau gamma^tau r_tau`.
pub fn discounted_reward<M: GenerativeMdp>(mdp: &M, actions: &[u32]) -> Result<f64> {
    let mut state = mdp.initial_state();
    let mut total = 0.0;
    let mut weight = 1.0;
    for &a in actions {
        let (next, reward) = mdp.step(&state, a)?;
        total += weight * reward;
        weight *= mdp.discount();
        state = next;
    }
    Ok(total)
}

/// Planning depth for an iteration budget: `D(T) = max(1, ceil(log_B T))`,
/// so the number of depth-`D` sequences keeps pace with the budget.
pub fn depth_schedule(horizon: usize, branching: usize) -> usize {
    assert!(branching >= 2, "depth schedule needs branching >= 2");
    if horizon <= 1 {
        return 1;
    }
    let mut depth = 0usize;
    let mut reach = 1u128;
    while reach < horizon as u128 {
        reach = reach.saturating_mul(branching as u128);
        depth += 1;
    }
    depth.max(1)
}

/// Knobs of one planning run.
#[derive(Clone, Debug)]
pub struct PlanConfig {
    /// Iteration budget `T`.
    pub horizon: usize,
    /// Noise variance assumed by the GP model (an algorithm parameter; the
    /// environment itself is deterministic).
    pub noise_var: f64,
    pub delta: f64,
    pub beta_scale: f64,
    pub seed: u64,
    /// Standard deviation of optional additive Gaussian observation noise
    /// for stochastic-reward experiments.
    pub observation_noise_std: Option<f64>,
    /// Enumerate the exact optimum (for regret reporting) only while
    /// `B^D` stays at or below this.
    pub enumeration_cap: usize,
    pub update: UpdateMode,
    pub selection: SelectionStrategy,
}

impl PlanConfig {
    pub fn new(horizon: usize) -> Self {
        PlanConfig {
            horizon,
            noise_var: 0.01,
            delta: 0.05,
            beta_scale: 1.0,
            seed: 0,
            observation_noise_std: None,
            enumeration_cap: crate::spectrum::DEFAULT_GRAM_CAP,
            update: UpdateMode::Incremental,
            selection: SelectionStrategy::FlatScan,
        }
    }
}

/// Outcome of a planning run.
#[derive(Clone, Debug, Serialize)]
pub struct PlanResult {
    /// Best observed action sequence (length `D(T)`).
    pub best_actions: Vec<u32>,
    pub best_observed_reward: f64,
    /// Depth `D(T)` the search ran at.
    pub horizon_depth: usize,
    /// Iterations actually executed.
    pub iterations: usize,
    /// Generative-model calls consumed: depth times iterations.
    pub generative_calls: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimal_actions: Option<Vec<u32>>,
    /// `max(0, f_star - best observed)`, when the optimum is enumerable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simple_regret: Option<f64>,
    /// `T f_star - sum_t y_t`, when the optimum is enumerable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_cumulative_regret: Option<f64>,
    /// Per-iteration record; serialized separately as CSV.
    #[serde(skip_serializing)]
    pub trace: SearchTrace,
}

/// Empirical simple regret `max(0, f_star - best observed y)` and empirical
/// cumulative regret `T f_star - sum y_t`. The unclipped simple regret never
/// exceeds `R'_T / T` (a minimum is at most the mean).
pub fn empirical_simple_regret(trace: &SearchTrace, f_star: f64) -> (f64, f64) {
    let t = trace.len() as f64;
    let empirical_cumulative = t * f_star - trace.total_observed();
    let raw = match trace.best() {
        Some((_, y)) => f_star - y,
        None => 0.0,
    };
    if t > 0.0 {
        debug_assert!(raw <= empirical_cumulative / t + 1e-9);
    }
    (raw.max(0.0), empirical_cumulative)
}

/// All action sequences of length `depth` from the initial state with their
/// discounted returns, in depth-first order. Errors when the sequence count
/// would exceed `cap`.
pub fn enumerate_returns<M: GenerativeMdp>(
    mdp: &M,
    depth: usize,
    cap: usize,
) -> Result<Vec<(Vec<u32>, f64)>> {
    let mut out = Vec::new();
    let mut actions = Vec::with_capacity(depth);
    descend(mdp, &mdp.initial_state(), depth, 0.0, 1.0, &mut actions, &mut out, cap)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn descend<M: GenerativeMdp>(
    mdp: &M,
    state: &M::State,
    remaining: usize,
    acc: f64,
    weight: f64,
    actions: &mut Vec<u32>,
    out: &mut Vec<(Vec<u32>, f64)>,
    cap: usize,
) -> Result<()> {
    if remaining == 0 {
        if out.len() >= cap {
            return Err(Error::SizeCap { requested: out.len() as u128 + 1, cap });
        }
        out.push((actions.clone(), acc));
        return Ok(());
    }
    for a in 0..mdp.arity(state) as u32 {
        let (next, reward) = mdp.step(state, a)?;
        actions.push(a);
        descend(mdp, &next, remaining - 1, acc + weight * reward, weight * mdp.discount(), actions, out, cap)?;
        actions.pop();
    }
    Ok(())
}

/// Run the tree search on `mdp` with the MDP kernel at depth `D(T)` and
/// report the best observed sequence; on enumerable instances the exact
/// optimum and both empirical regrets are attached.
pub fn plan<M: GenerativeMdp>(mdp: &M, config: &PlanConfig) -> Result<PlanResult> {
    if config.horizon < 1 {
        return Err(Error::Parameter("planning horizon must be >= 1".into()));
    }
    let initial = mdp.initial_state();
    let branching = mdp.arity(&initial);
    if branching < 2 {
        return Err(Error::Environment(
            "planning needs at least two actions at the initial state".into(),
        ));
    }
    let depth = depth_schedule(config.horizon, branching);
    let chi = chi_mdp(branching, depth, mdp.discount())?;

    // Exact optimum when the sequence space is small enough to enumerate.
    let enumerated = enumerate_returns(mdp, depth, config.enumeration_cap).ok();
    let optimum: Option<(Vec<u32>, f64)> = enumerated.as_ref().map(|all| {
        let best = all
            .iter()
            .fold(None::<(&Vec<u32>, f64)>, |acc, (a, v)| match acc {
                Some((_, top)) if top >= *v => acc,
                _ => Some((a, *v)),
            })
            .expect("at least one sequence");
        (best.0.clone(), best.1)
    });

    let mut search_config = SearchConfig::new(chi, config.noise_var);
    search_config.delta = config.delta;
    search_config.beta_scale = config.beta_scale;
    search_config.seed = config.seed;
    search_config.update = config.update;
    search_config.selection = config.selection;

    // Per-node arity oracle: prefixes replayed through the environment.
    let arity_table = build_arity_oracle(mdp, depth);
    let mut search =
        Search::with_branching(search_config, Branching::PerNode(arity_table))?;
    if let Some((_, f_star)) = &optimum {
        let value_of = returns_lookup(enumerated.as_ref().expect("enumerated"));
        search = search.with_truth(Truth { f_star: *f_star, f: Box::new(value_of) });
    }

    let mut noise_rng = config
        .observation_noise_std
        .map(|std| (std, ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15)));
    let mut observe = |path: &Path| {
        let exact = discounted_reward(mdp, path.actions()).expect("valid materialized path");
        match noise_rng.as_mut() {
            Some((std, rng)) => exact + *std * rng.sample::<f64, _>(rand_distr::StandardNormal),
            None => exact,
        }
    };
    search.run(&StoppingRule::FixedIterations(config.horizon), &mut observe)?;
    let trace = search.into_trace();

    let (best_actions, best_observed_reward) = match trace.best() {
        Some((p, y)) => (p.actions().to_vec(), y),
        None => (Vec::new(), f64::NEG_INFINITY),
    };
    let iterations = trace.len();
    let mut result = PlanResult {
        best_actions,
        best_observed_reward,
        horizon_depth: depth,
        iterations,
        generative_calls: depth * iterations,
        f_star: None,
        optimal_actions: None,
        simple_regret: None,
        empirical_cumulative_regret: None,
        trace,
    };
    if let Some((actions, f_star)) = optimum {
        let (simple, cumulative) = empirical_simple_regret(&result.trace, f_star);
        result.f_star = Some(f_star);
        result.optimal_actions = Some(actions);
        result.simple_regret = Some(simple);
        result.empirical_cumulative_regret = Some(cumulative);
    }
    Ok(result)
}

/// Precompute arities of every reachable prefix (the tree the search may
/// touch is tiny compared to the state space: at most `D` levels).
fn build_arity_oracle<M: GenerativeMdp>(mdp: &M, depth: usize) -> ArityOracle {
    let mut table: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut stack: Vec<(Vec<u32>, M::State)> = vec![(Vec::new(), mdp.initial_state())];
    while let Some((prefix, state)) = stack.pop() {
        let arity = mdp.arity(&state);
        if prefix.len() < depth {
            for a in 0..arity as u32 {
                if let Ok((next, _)) = mdp.step(&state, a) {
                    let mut p = prefix.clone();
                    p.push(a);
                    stack.push((p, next));
                }
            }
        }
        table.insert(prefix, arity);
    }
    Box::new(move |prefix: &[u32]| table.get(prefix).copied().unwrap_or(0))
}

fn returns_lookup(all: &[(Vec<u32>, f64)]) -> impl Fn(&Path) -> f64 + 'static {
    let map: HashMap<Vec<u32>, f64> =
        all.iter().map(|(a, v)| (a.clone(), *v)).collect();
    move |path: &Path| map[path.actions()]
}
