//! Discounted visitation counts `η` and probabilities `ρ` by exact forward enumeration.

mod candidates;
mod trajectories;

use std::collections::{BTreeMap, HashMap};

pub use candidates::{candidate_action_distributions, CandidateSeries, CandidateTables};
pub use trajectories::{trajectories, Trajectory, TrajectoryStep};

use crate::error::{Error, Result};
use crate::model::{DecPomdp, HistoryArena, JointHistory, PolicySet};

#[derive(Debug, Clone, Copy)]
pub struct VisitationConfig {
    /// Hard limit on enumerated timesteps.
    pub depth_cap: usize,
    /// Maximum number of joint histories materialized.
    pub node_budget: usize,
    /// Discounted models are truncated once `γ^T` drops below this.
    pub truncation_tol: f64,
}

impl Default for VisitationConfig {
    fn default() -> Self {
        Self { depth_cap: 10_000, node_budget: 2_000_000, truncation_tol: 1e-10 }
    }
}

/// Result of a conditional `ρ` query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rho {
    Value(f64),
    /// The conditioning event has zero mass.
    Empty,
}

impl Rho {
    pub fn value(self) -> Option<f64> {
        match self {
            Rho::Value(x) => Some(x),
            Rho::Empty => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoQuery {
    State(usize),
    History(usize),
    HistoryState(usize, usize),
    StateAction(usize, usize),
    HistoryAction(usize, usize),
    HistoryStateAction(usize, usize, usize),
    StateGivenHistory { state: usize, history: usize },
    HistoryGivenState { history: usize, state: usize },
    ActionGivenHistory { action: usize, history: usize },
    ActionGivenState { action: usize, state: usize },
}

/// Exact `η` tables over reachable joint histories and non-terminal states.
#[derive(Debug, Clone)]
pub struct Visitation {
    pub gamma: f64,
    /// Arena holding exactly the reachable joint histories.
    pub arena: HistoryArena,
    /// Number of timesteps enumerated.
    pub depth: usize,
    /// True when probability mass was still live at the depth cap.
    pub truncated: bool,
    /// `η(h⃗, s)` per joint history, sparse over states.
    pub history_state: Vec<Vec<(usize, f64)>>,
    pub history: Vec<f64>,
    /// Support of `π⃗(·; h⃗)` per joint history.
    pub policy: Vec<Vec<(usize, f64)>>,
    pub state: Vec<f64>,
    pub state_action: Vec<Vec<f64>>,
    /// Normalizer `Z = Σ_{h⃗} η(h⃗)`.
    pub z: f64,
    /// `Pr(S_t = s)` for `t < depth`.
    pub state_marginals: Vec<Vec<f64>>,
    /// `Pr(S_t = s, A⃗_t = a⃗)` for `t < depth`.
    pub state_action_marginals: Vec<Vec<Vec<f64>>>,
    /// `J = Σ_{s,a⃗} η(s,a⃗) R(s,a⃗)`.
    pub expected_return: f64,
}

pub fn compute_visitations(model: &DecPomdp, policies: &PolicySet, config: &VisitationConfig) -> Result<Visitation> {
    let depth = model.analysis_depth(config.truncation_tol, config.depth_cap);
    enumerate(model, policies, depth, config.node_budget)
}

/// Breadth-first enumeration of reachable `(h⃗, s)` pairs for `depth` timesteps.
pub fn enumerate(model: &DecPomdp, policies: &PolicySet, depth: usize, node_budget: usize) -> Result<Visitation> {
    let ns = model.n_states();
    let na = model.n_joint_actions();
    let gamma = model.discount;
    let mut arena = model.new_arena();
    let mut vis = Visitation {
        gamma,
        arena: model.new_arena(),
        depth,
        truncated: false,
        history_state: Vec::new(),
        history: Vec::new(),
        policy: Vec::new(),
        state: vec![0.0; ns],
        state_action: vec![vec![0.0; na]; ns],
        z: 0.0,
        state_marginals: Vec::with_capacity(depth),
        state_action_marginals: Vec::with_capacity(depth),
        expected_return: 0.0,
    };

    let mut frontier: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for s in 0..ns {
        let p0 = model.start[s];
        if p0 <= 0.0 || model.terminal[s] {
            continue;
        }
        match &model.initial_observation {
            Some(rows) => {
                for &(o, q) in &rows[s] {
                    if q > 0.0 {
                        let id = arena.root(Some(o));
                        frontier.entry(id).or_insert_with(|| vec![0.0; ns])[s] += p0 * q;
                    }
                }
            }
            None => {
                let id = arena.root(None);
                frontier.entry(id).or_insert_with(|| vec![0.0; ns])[s] += p0;
            }
        }
    }

    let mut discount_t = 1.0;
    for t in 0..depth {
        if frontier.is_empty() {
            break;
        }
        let mut marg = vec![0.0; ns];
        let mut marg_sa = vec![vec![0.0; na]; ns];
        let mut next: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let expand = t + 1 < depth;
        for (&node, masses) in &frontier {
            grow(&mut vis, node + 1);
            let pi = policies.joint_distribution(&arena, node)?;
            let mut row = Vec::new();
            for (s, &p) in masses.iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                row.push((s, discount_t * p));
                vis.history[node] += discount_t * p;
                vis.state[s] += discount_t * p;
                marg[s] += p;
                for &(a, q) in &pi {
                    let m = p * q;
                    marg_sa[s][a] += m;
                    vis.state_action[s][a] += discount_t * m;
                    vis.expected_return += discount_t * m * model.reward[s][a];
                    if !expand {
                        continue;
                    }
                    for &(sn, pt) in &model.transition[s][a] {
                        if pt <= 0.0 || model.terminal[sn] {
                            continue;
                        }
                        for &(o, po) in &model.observation[a][sn] {
                            if po <= 0.0 {
                                continue;
                            }
                            let child = arena.child(node, a, o);
                            next.entry(child).or_insert_with(|| vec![0.0; ns])[sn] += m * pt * po;
                        }
                    }
                }
            }
            vis.history_state[node] = row;
            vis.policy[node] = pi;
        }
        if arena.joint_len() > node_budget {
            return Err(Error::BudgetExceeded { depth: t + 1, budget: node_budget });
        }
        vis.state_marginals.push(marg);
        vis.state_action_marginals.push(marg_sa);
        frontier = next;
        discount_t *= gamma;
        if t + 1 == depth {
            // frontier was not expanded; check whether live mass remained
            let live = frontier_had_continuation(model, &vis, depth);
            vis.truncated = live;
        }
    }
    grow(&mut vis, arena.joint_len());
    vis.z = vis.history.iter().sum();
    vis.arena = arena;
    Ok(vis)
}

fn grow(vis: &mut Visitation, n: usize) {
    if vis.history.len() < n {
        vis.history.resize(n, 0.0);
        vis.history_state.resize(n, Vec::new());
        vis.policy.resize(n, Vec::new());
    }
}

fn frontier_had_continuation(model: &DecPomdp, vis: &Visitation, depth: usize) -> bool {
    if model.horizon.is_some_and(|h| h <= depth) {
        return false;
    }
    let last = match vis.state_action_marginals.last() {
        Some(x) => x,
        None => return false,
    };
    last.iter().enumerate().any(|(s, row)| {
        row.iter().enumerate().any(|(a, &m)| {
            m > 0.0 && model.transition[s][a].iter().any(|&(sn, p)| p > 0.0 && !model.terminal[sn])
        })
    })
}

impl Visitation {
    pub fn n_states(&self) -> usize {
        self.state.len()
    }

    pub fn n_joint_actions(&self) -> usize {
        self.state_action.first().map_or(0, Vec::len)
    }

    pub fn n_histories(&self) -> usize {
        self.history.len()
    }

    pub fn policy_prob(&self, h: usize, a: usize) -> f64 {
        self.policy[h].iter().find(|x| x.0 == a).map_or(0.0, |x| x.1)
    }

    pub fn eta_history_state(&self, h: usize, s: usize) -> f64 {
        self.history_state[h].iter().find(|x| x.0 == s).map_or(0.0, |x| x.1)
    }

    pub fn eta(&self, q: RhoQuery) -> f64 {
        match q {
            RhoQuery::State(s) => self.state[s],
            RhoQuery::History(h) => self.history[h],
            RhoQuery::HistoryState(h, s) => self.eta_history_state(h, s),
            RhoQuery::StateAction(s, a) => self.state_action[s][a],
            RhoQuery::HistoryAction(h, a) => self.history[h] * self.policy_prob(h, a),
            RhoQuery::HistoryStateAction(h, s, a) => self.eta_history_state(h, s) * self.policy_prob(h, a),
            _ => f64::NAN,
        }
    }

    /// `ρ` for joint forms (`η/Z`) and conditionals (renormalized), with [`Rho::Empty`] on zero-mass conditions.
    pub fn rho(&self, q: RhoQuery) -> Rho {
        match q {
            RhoQuery::StateGivenHistory { state, history } => {
                cond(self.eta_history_state(history, state), self.history[history])
            }
            RhoQuery::HistoryGivenState { history, state } => cond(self.eta_history_state(history, state), self.state[state]),
            RhoQuery::ActionGivenHistory { action, history } => {
                if self.history[history] > 0.0 {
                    Rho::Value(self.policy_prob(history, action))
                } else {
                    Rho::Empty
                }
            }
            RhoQuery::ActionGivenState { action, state } => cond(self.state_action[state][action], self.state[state]),
            joint => {
                if self.z > 0.0 {
                    Rho::Value(self.eta(joint) / self.z)
                } else {
                    Rho::Empty
                }
            }
        }
    }

    /// `ρ(s | h⃗)` as a dense row.
    pub fn belief(&self, h: usize) -> Option<Vec<f64>> {
        let total = self.history[h];
        if total <= 0.0 {
            return None;
        }
        let mut row = vec![0.0; self.n_states()];
        for &(s, e) in &self.history_state[h] {
            row[s] = e / total;
        }
        Some(row)
    }

    /// `ρ(a⃗ | s)` as a dense row.
    pub fn action_given_state(&self, s: usize) -> Option<Vec<f64>> {
        if self.state[s] <= 0.0 {
            return None;
        }
        Some(self.state_action[s].iter().map(|x| x / self.state[s]).collect())
    }

    /// `ρ(h⃗ | s)` sparse over reachable histories.
    pub fn history_given_state(&self, s: usize) -> Option<Vec<(usize, f64)>> {
        if self.state[s] <= 0.0 {
            return None;
        }
        Some(
            self.history_state
                .iter()
                .enumerate()
                .filter_map(|(h, row)| row.iter().find(|x| x.0 == s).map(|x| (h, x.1 / self.state[s])))
                .collect(),
        )
    }

    /// `Pr(A⃗_t | S_t = s)` from the per-timestep marginals.
    pub fn timed_action_given_state(&self, t: usize, s: usize) -> Option<Vec<f64>> {
        let ps = *self.state_marginals.get(t)?.get(s)?;
        if ps <= 0.0 {
            return None;
        }
        Some(self.state_action_marginals[t][s].iter().map(|x| x / ps).collect())
    }

    /// `η(h_i)` for every reachable individual history of `agent`.
    pub fn individual_eta(&self, agent: usize) -> HashMap<usize, f64> {
        let mut out = HashMap::new();
        for h in 0..self.n_histories() {
            *out.entry(self.arena.members(h)[agent]).or_insert(0.0) += self.history[h];
        }
        out
    }

    /// Reachable individual history ids of `agent`, sorted.
    pub fn reachable_individuals(&self, agent: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.n_histories()).map(|h| self.arena.members(h)[agent]).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn find(&self, h: &JointHistory) -> Option<usize> {
        self.arena.find(h)
    }
}

fn cond(num: f64, den: f64) -> Rho {
    if den > 0.0 {
        Rho::Value(num / den)
    } else {
        Rho::Empty
    }
}

/// Bayesian filter `Pr(s | h⃗)` computed from the model alone.
///
/// Returns `None` when the history has zero probability under every state sequence.
pub fn belief_filter(model: &DecPomdp, h: &JointHistory) -> Option<Vec<f64>> {
    let ns = model.n_states();
    let mut b: Vec<f64> = model.start.iter().enumerate().map(|(s, &p)| if model.terminal[s] { 0.0 } else { p }).collect();
    if let Some(rows) = &model.initial_observation {
        let parts: Option<Vec<usize>> = h.agents.iter().map(|x| x.first).collect();
        let o = model.observations.encode(&parts?);
        for (s, bs) in b.iter_mut().enumerate() {
            *bs *= rows[s].iter().find(|x| x.0 == o).map_or(0.0, |x| x.1);
        }
    }
    normalize(&mut b)?;
    for t in 0..h.len() {
        let a = model.actions.encode(&h.agents.iter().map(|x| x.steps[t].0).collect::<Vec<_>>());
        let o = model.observations.encode(&h.agents.iter().map(|x| x.steps[t].1).collect::<Vec<_>>());
        let mut nb = vec![0.0; ns];
        for s in 0..ns {
            if b[s] == 0.0 {
                continue;
            }
            for &(sn, p) in &model.transition[s][a] {
                if model.terminal[sn] {
                    continue;
                }
                let po = model.observation[a][sn].iter().find(|x| x.0 == o).map_or(0.0, |x| x.1);
                nb[sn] += b[s] * p * po;
            }
        }
        normalize(&mut nb)?;
        b = nb;
    }
    Some(b)
}

fn normalize(v: &mut [f64]) -> Option<()> {
    let z: f64 = v.iter().sum();
    if z <= 0.0 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= z);
    Some(())
}
