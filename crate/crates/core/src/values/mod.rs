//! Exact value functions: joint-history, individual-history, state (untimed and timed), and history-state.

pub mod bellman;

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

pub use bellman::{random_system, solve_generic, value_iteration, BellmanSolution, BellmanSystem, SolveMethod};

use crate::error::{Error, Result};
use crate::model::{DecPomdp, HistoryArena, PolicySet};
use crate::visitation::Visitation;

pub const DEFAULT_NODE_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QVariant {
    JointHistory,
    IndividualHistory,
    State,
    StateTimed,
    HistoryState,
}

impl QVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            QVariant::JointHistory => "joint-history",
            QVariant::IndividualHistory => "individual-history",
            QVariant::State => "state",
            QVariant::StateTimed => "state-timed",
            QVariant::HistoryState => "history-state",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QKey {
    JointHistory { h: usize, a: usize },
    Individual { agent: usize, h: usize, a: usize },
    State { s: usize, a: usize },
    StateTimed { t: usize, s: usize, a: usize },
    HistoryState { h: usize, s: usize, a: usize },
}

/// Key of a state-value (baseline) entry: a [`QKey`] without its action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VKey {
    JointHistory(usize),
    Individual(usize, usize),
    State(usize),
    StateTimed(usize, usize),
    HistoryState(usize, usize),
}

impl QKey {
    pub fn split(self) -> (VKey, usize) {
        match self {
            QKey::JointHistory { h, a } => (VKey::JointHistory(h), a),
            QKey::Individual { agent, h, a } => (VKey::Individual(agent, h), a),
            QKey::State { s, a } => (VKey::State(s), a),
            QKey::StateTimed { t, s, a } => (VKey::StateTimed(t, s), a),
            QKey::HistoryState { h, s, a } => (VKey::HistoryState(h, s), a),
        }
    }

    pub fn variant(self) -> QVariant {
        match self {
            QKey::JointHistory { .. } => QVariant::JointHistory,
            QKey::Individual { .. } => QVariant::IndividualHistory,
            QKey::State { .. } => QVariant::State,
            QKey::StateTimed { .. } => QVariant::StateTimed,
            QKey::HistoryState { .. } => QVariant::HistoryState,
        }
    }

    pub fn ids(self) -> Vec<usize> {
        match self {
            QKey::JointHistory { h, a } => vec![h, a],
            QKey::Individual { agent, h, a } => vec![agent, h, a],
            QKey::State { s, a } => vec![s, a],
            QKey::StateTimed { t, s, a } => vec![t, s, a],
            QKey::HistoryState { h, s, a } => vec![h, s, a],
        }
    }
}

pub trait QTable {
    fn variant(&self) -> QVariant;
    fn lookup(&self, key: QKey) -> Option<f64>;
    /// All defined entries in a stable order.
    fn rows(&self) -> Vec<(QKey, f64)>;
    /// On-policy action weights used to form the baseline `V` at `key`.
    fn baseline_weights(&self, key: VKey) -> Option<Vec<(usize, f64)>>;
    /// Largest Bellman residual of the solved system.
    fn residual(&self) -> f64;
}

#[derive(Debug, Clone)]
pub struct VTable {
    pub variant: QVariant,
    pub values: HashMap<VKey, f64>,
}

/// `V(key) = Σ_a w(a|key)·Q(key, a)` using the table's own on-policy weights.
pub fn v_baseline(q: &dyn QTable) -> VTable {
    let mut values = HashMap::new();
    let mut seen = Vec::new();
    for (key, _) in q.rows() {
        let (vk, _) = key.split();
        if values.contains_key(&vk) || seen.contains(&vk) {
            continue;
        }
        seen.push(vk);
        if let Some(w) = q.baseline_weights(vk) {
            let mut v = 0.0;
            let mut ok = true;
            for (a, p) in w {
                match q.lookup(with_action(vk, a)) {
                    Some(x) => v += p * x,
                    None => ok = false,
                }
            }
            if ok {
                values.insert(vk, v);
            }
        }
    }
    VTable { variant: q.variant(), values }
}

pub fn with_action(key: VKey, a: usize) -> QKey {
    match key {
        VKey::JointHistory(h) => QKey::JointHistory { h, a },
        VKey::Individual(agent, h) => QKey::Individual { agent, h, a },
        VKey::State(s) => QKey::State { s, a },
        VKey::StateTimed(t, s) => QKey::StateTimed { t, s, a },
        VKey::HistoryState(h, s) => QKey::HistoryState { h, s, a },
    }
}

/// `A(key, a) = Q(key, a) − V(key)` over entries where both are defined.
pub fn advantage(q: &dyn QTable, v: &VTable) -> Result<Vec<(QKey, f64)>> {
    if q.variant() != v.variant {
        return Err(Error::VariantMismatch { expected: q.variant().as_str().into(), found: v.variant.as_str().into() });
    }
    Ok(q
        .rows()
        .into_iter()
        .filter_map(|(k, x)| v.values.get(&k.split().0).map(|vv| (k, x - vv)))
        .collect())
}

/// Timesteps at which decisions may still be taken.
fn step_limit(model: &DecPomdp, vis: &Visitation) -> usize {
    model.horizon.unwrap_or(vis.depth)
}

fn normalized(row: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let z: f64 = row.iter().map(|x| x.1).sum();
    row.iter().filter(|x| x.1 > 0.0).map(|&(i, p)| (i, p / z)).collect()
}

fn check_budget(arena: &HistoryArena, depth: usize) -> Result<()> {
    if arena.joint_len() > DEFAULT_NODE_BUDGET {
        return Err(Error::BudgetExceeded { depth, budget: DEFAULT_NODE_BUDGET });
    }
    Ok(())
}

/// Keyed system under construction: keys in insertion order with their rows.
struct Builder<K> {
    keys: Vec<K>,
    index: HashMap<K, usize>,
}

impl<K: Copy + Eq + std::hash::Hash> Builder<K> {
    fn new() -> Self {
        Self { keys: Vec::new(), index: HashMap::new() }
    }

    fn push(&mut self, k: K) -> usize {
        if let Some(&i) = self.index.get(&k) {
            return i;
        }
        self.keys.push(k);
        self.index.insert(k, self.keys.len() - 1);
        self.keys.len() - 1
    }
}

fn solve_rows(rewards: Vec<f64>, p1: Vec<Vec<(usize, f64)>>, gamma: f64) -> Result<BellmanSolution> {
    let p0 = (0..rewards.len()).map(|i| vec![(i, 1.0)]).collect();
    solve_generic(&BellmanSystem { p0, reward: rewards, p1, gamma })
}

/// `Q(h⃗, a⃗)` over reachable histories × all joint actions, plus on-policy continuations of counterfactual actions.
#[derive(Debug, Clone)]
pub struct JointHistoryQ {
    pub arena: HistoryArena,
    /// Joint histories with id below this are on-policy reachable.
    pub reachable: usize,
    /// `Pr(s | h⃗)` per joint history in `arena`.
    pub beliefs: Vec<Vec<(usize, f64)>>,
    pub policy: Vec<Vec<(usize, f64)>>,
    pub keys: Vec<(usize, usize)>,
    index: HashMap<(usize, usize), usize>,
    pub values: Vec<f64>,
    pub residual: f64,
}

impl JointHistoryQ {
    pub fn get(&self, h: usize, a: usize) -> Option<f64> {
        self.index.get(&(h, a)).map(|&i| self.values[i])
    }

    pub fn value(&self, h: usize) -> Option<f64> {
        self.policy[h].iter().map(|&(a, p)| self.get(h, a).map(|q| p * q)).sum()
    }
}

impl QTable for JointHistoryQ {
    fn variant(&self) -> QVariant {
        QVariant::JointHistory
    }
    fn lookup(&self, key: QKey) -> Option<f64> {
        match key {
            QKey::JointHistory { h, a } => self.get(h, a),
            _ => None,
        }
    }
    fn rows(&self) -> Vec<(QKey, f64)> {
        self.keys.iter().zip(&self.values).map(|(&(h, a), &v)| (QKey::JointHistory { h, a }, v)).collect()
    }
    fn baseline_weights(&self, key: VKey) -> Option<Vec<(usize, f64)>> {
        match key {
            VKey::JointHistory(h) => self.policy.get(h).cloned(),
            _ => None,
        }
    }
    fn residual(&self) -> f64 {
        self.residual
    }
}

pub fn q_joint_history(model: &DecPomdp, policies: &PolicySet, vis: &Visitation) -> Result<JointHistoryQ> {
    let gamma = model.discount;
    let limit = step_limit(model, vis);
    let na = model.n_joint_actions();
    let ns = model.n_states();
    let mut arena = vis.arena.clone();
    let reachable = vis.n_histories();
    let mut beliefs: Vec<Vec<(usize, f64)>> = vis.history_state.iter().map(|r| normalized(r)).collect();
    let mut policy = vis.policy.clone();
    let mut b = Builder::new();
    for h in 0..reachable {
        for a in 0..na {
            b.push((h, a));
        }
    }
    let mut rewards = Vec::new();
    let mut p1 = Vec::new();
    let mut k = 0;
    while k < b.keys.len() {
        let (h, a) = b.keys[k];
        let r: f64 = beliefs[h].iter().map(|&(s, p)| p * model.reward[s][a]).sum();
        let mut row = Vec::new();
        let depth = arena.node(h).depth;
        if gamma > 0.0 && depth + 1 < limit {
            let mut by_obs: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for &(s, bs) in &beliefs[h] {
                for &(sn, pt) in &model.transition[s][a] {
                    if pt <= 0.0 || model.terminal[sn] {
                        continue;
                    }
                    for &(o, po) in &model.observation[a][sn] {
                        if po > 0.0 {
                            by_obs.entry(o).or_insert_with(|| vec![0.0; ns])[sn] += bs * pt * po;
                        }
                    }
                }
            }
            for (o, masses) in by_obs {
                let p_o: f64 = masses.iter().sum();
                if p_o <= 0.0 {
                    continue;
                }
                let child = arena.child(h, a, o);
                if child >= beliefs.len() {
                    let dense: Vec<(usize, f64)> = masses.iter().copied().enumerate().collect();
                    beliefs.push(normalized(&dense));
                    policy.push(policies.joint_distribution(&arena, child)?);
                    for i in 0..policy[child].len() {
                        b.push((child, policy[child][i].0));
                    }
                    check_budget(&arena, depth + 1)?;
                }
                for &(a2, q) in &policy[child] {
                    row.push((b.index[&(child, a2)], p_o * q));
                }
            }
        }
        rewards.push(r);
        p1.push(row);
        k += 1;
    }
    let sol = solve_rows(rewards, p1, gamma)?;
    Ok(JointHistoryQ {
        arena,
        reachable,
        beliefs,
        policy,
        keys: b.keys,
        index: b.index,
        values: sol.q,
        residual: sol.residual,
    })
}

/// `Q(h⃗, s, a⃗)` over reachable `(h⃗, s)` × all joint actions, plus counterfactual continuations.
#[derive(Debug, Clone)]
pub struct HistoryStateQ {
    pub arena: HistoryArena,
    pub reachable: usize,
    pub policy: Vec<Vec<(usize, f64)>>,
    pub keys: Vec<(usize, usize, usize)>,
    index: HashMap<(usize, usize, usize), usize>,
    pub values: Vec<f64>,
    pub residual: f64,
}

impl HistoryStateQ {
    pub fn get(&self, h: usize, s: usize, a: usize) -> Option<f64> {
        self.index.get(&(h, s, a)).map(|&i| self.values[i])
    }
}

impl QTable for HistoryStateQ {
    fn variant(&self) -> QVariant {
        QVariant::HistoryState
    }
    fn lookup(&self, key: QKey) -> Option<f64> {
        match key {
            QKey::HistoryState { h, s, a } => self.get(h, s, a),
            _ => None,
        }
    }
    fn rows(&self) -> Vec<(QKey, f64)> {
        self.keys.iter().zip(&self.values).map(|(&(h, s, a), &v)| (QKey::HistoryState { h, s, a }, v)).collect()
    }
    fn baseline_weights(&self, key: VKey) -> Option<Vec<(usize, f64)>> {
        match key {
            VKey::HistoryState(h, _) => self.policy.get(h).cloned(),
            _ => None,
        }
    }
    fn residual(&self) -> f64 {
        self.residual
    }
}

pub fn q_history_state(model: &DecPomdp, policies: &PolicySet, vis: &Visitation) -> Result<HistoryStateQ> {
    let gamma = model.discount;
    let limit = step_limit(model, vis);
    let na = model.n_joint_actions();
    let mut arena = vis.arena.clone();
    let reachable = vis.n_histories();
    let mut policy = vis.policy.clone();
    let mut b = Builder::new();
    let mut pairs: HashMap<(usize, usize), ()> = HashMap::new();
    for h in 0..reachable {
        for &(s, e) in &vis.history_state[h] {
            if e > 0.0 {
                pairs.insert((h, s), ());
                for a in 0..na {
                    b.push((h, s, a));
                }
            }
        }
    }
    let mut rewards = Vec::new();
    let mut p1 = Vec::new();
    let mut k = 0;
    while k < b.keys.len() {
        let (h, s, a) = b.keys[k];
        let mut row = Vec::new();
        let depth = arena.node(h).depth;
        if gamma > 0.0 && depth + 1 < limit {
            for &(sn, pt) in &model.transition[s][a] {
                if pt <= 0.0 || model.terminal[sn] {
                    continue;
                }
                for &(o, po) in &model.observation[a][sn] {
                    if po <= 0.0 {
                        continue;
                    }
                    let child = arena.child(h, a, o);
                    if child >= policy.len() {
                        policy.push(policies.joint_distribution(&arena, child)?);
                        check_budget(&arena, depth + 1)?;
                    }
                    if pairs.insert((child, sn), ()).is_none() {
                        for i in 0..policy[child].len() {
                            b.push((child, sn, policy[child][i].0));
                        }
                    }
                    for &(a2, q) in &policy[child] {
                        row.push((b.index[&(child, sn, a2)], pt * po * q));
                    }
                }
            }
        }
        rewards.push(model.reward[s][a]);
        p1.push(row);
        k += 1;
    }
    let sol = solve_rows(rewards, p1, gamma)?;
    Ok(HistoryStateQ { arena, reachable, policy, keys: b.keys, index: b.index, values: sol.q, residual: sol.residual })
}

/// `Q_i(h_i, a_i)` for one agent, from the individual-history Bellman equality.
#[derive(Debug, Clone)]
pub struct IndividualQ {
    pub agent: usize,
    pub arena: HistoryArena,
    /// Reachable individual-history ids of this agent.
    pub reachable: Vec<usize>,
    /// `π_i(· ; h_i)` per individual history with entries.
    pub policy: HashMap<usize, Vec<f64>>,
    pub keys: Vec<(usize, usize)>,
    index: HashMap<(usize, usize), usize>,
    pub values: Vec<f64>,
    pub residual: f64,
}

impl IndividualQ {
    pub fn get(&self, h: usize, a: usize) -> Option<f64> {
        self.index.get(&(h, a)).map(|&i| self.values[i])
    }
}

impl QTable for IndividualQ {
    fn variant(&self) -> QVariant {
        QVariant::IndividualHistory
    }
    fn lookup(&self, key: QKey) -> Option<f64> {
        match key {
            QKey::Individual { agent, h, a } if agent == self.agent => self.get(h, a),
            _ => None,
        }
    }
    fn rows(&self) -> Vec<(QKey, f64)> {
        self.keys
            .iter()
            .zip(&self.values)
            .map(|(&(h, a), &v)| (QKey::Individual { agent: self.agent, h, a }, v))
            .collect()
    }
    fn baseline_weights(&self, key: VKey) -> Option<Vec<(usize, f64)>> {
        match key {
            VKey::Individual(agent, h) if agent == self.agent => {
                self.policy.get(&h).map(|row| row.iter().copied().enumerate().filter(|x| x.1 > 0.0).collect())
            }
            _ => None,
        }
    }
    fn residual(&self) -> f64 {
        self.residual
    }
}

pub fn q_individual(model: &DecPomdp, policies: &PolicySet, vis: &Visitation, agent: usize) -> Result<IndividualQ> {
    let own = policies
        .agent(agent)
        .ok_or_else(|| Error::UnsupportedParameterization("individual values need a decentralized policy".into()))?;
    let gamma = model.discount;
    let limit = step_limit(model, vis);
    let space = model.actions.clone();
    let n_own = space.size(agent);
    let mut arena = vis.arena.clone();

    // ψ(h⃗, s | h_i) for reachable h_i, from the visitation table
    let mut psi: HashMap<usize, Vec<((usize, usize), f64)>> = HashMap::new();
    for h in 0..vis.n_histories() {
        let hi = arena.members(h)[agent];
        for &(s, e) in &vis.history_state[h] {
            if e > 0.0 {
                psi.entry(hi).or_default().push(((h, s), e));
            }
        }
    }
    for rows in psi.values_mut() {
        let z: f64 = rows.iter().map(|x| x.1).sum();
        rows.iter_mut().for_each(|x| x.1 /= z);
    }
    let reachable = vis.reachable_individuals(agent);
    let mut policy: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut b = Builder::new();
    for &hi in &reachable {
        policy.insert(hi, own.probs(agent, arena.individual(agent, hi))?);
        for a in 0..n_own {
            b.push((hi, a));
        }
    }
    let mut others_cache: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
    let mut rewards = Vec::new();
    let mut p1 = Vec::new();
    let mut k = 0;
    while k < b.keys.len() {
        let (hi, ai) = b.keys[k];
        let dist = psi[&hi].clone();
        let mut r = 0.0;
        let mut children: BTreeMap<usize, BTreeMap<(usize, usize), f64>> = BTreeMap::new();
        for ((node, s), w) in dist {
            if !others_cache.contains_key(&node) {
                others_cache.insert(node, policies.others_distribution(&arena, node, agent)?);
            }
            let depth = arena.node(node).depth;
            let expand = gamma > 0.0 && depth + 1 < limit;
            for &(partial, q) in &others_cache[&node].clone() {
                let ja = space.with_component(partial, agent, ai);
                r += w * q * model.reward[s][ja];
                if !expand {
                    continue;
                }
                for &(sn, pt) in &model.transition[s][ja] {
                    if pt <= 0.0 || model.terminal[sn] {
                        continue;
                    }
                    for &(o, po) in &model.observation[ja][sn] {
                        if po <= 0.0 {
                            continue;
                        }
                        let child = arena.child(node, ja, o);
                        let oi = model.observations.component(o, agent);
                        *children.entry(oi).or_default().entry((child, sn)).or_insert(0.0) += w * q * pt * po;
                    }
                }
            }
            check_budget(&arena, depth + 1)?;
        }
        let mut row = Vec::new();
        for (oi, masses) in children {
            let p: f64 = masses.values().sum();
            if p <= 0.0 {
                continue;
            }
            let child_i = arena.intern_individual_child(agent, hi, ai, oi);
            if let std::collections::hash_map::Entry::Vacant(e) = psi.entry(child_i) {
                e.insert(masses.into_iter().map(|(key, m)| (key, m / p)).collect());
                let probs = own.probs(agent, arena.individual(agent, child_i))?;
                for (a2, &q) in probs.iter().enumerate() {
                    if q > 0.0 {
                        b.push((child_i, a2));
                    }
                }
                policy.insert(child_i, probs);
            }
            for (a2, &q) in policy[&child_i].iter().enumerate() {
                if q > 0.0 {
                    row.push((b.index[&(child_i, a2)], p * q));
                }
            }
        }
        rewards.push(r);
        p1.push(row);
        k += 1;
    }
    let sol = solve_rows(rewards, p1, gamma)?;
    Ok(IndividualQ {
        agent,
        arena,
        reachable,
        policy,
        keys: b.keys,
        index: b.index,
        values: sol.q,
        residual: sol.residual,
    })
}

/// Individual tables for every agent.
pub fn q_individual_all(model: &DecPomdp, policies: &PolicySet, vis: &Visitation) -> Result<Vec<IndividualQ>> {
    (0..model.n_agents()).map(|i| q_individual(model, policies, vis, i)).collect()
}

/// Untimed `Q(s, a⃗)` using `ρ(a⃗′ | s′)` for the next action.
///
/// Entries whose successor states have no visitation mass are left undefined.
#[derive(Debug, Clone)]
pub struct StateQ {
    pub values: Vec<Vec<Option<f64>>>,
    /// `ρ(a⃗ | s)` rows, `None` for zero-mass states.
    pub action_given_state: Vec<Option<Vec<f64>>>,
    pub residual: f64,
}

impl StateQ {
    pub fn get(&self, s: usize, a: usize) -> Option<f64> {
        self.values.get(s)?.get(a).copied().flatten()
    }
}

impl QTable for StateQ {
    fn variant(&self) -> QVariant {
        QVariant::State
    }
    fn lookup(&self, key: QKey) -> Option<f64> {
        match key {
            QKey::State { s, a } => self.get(s, a),
            _ => None,
        }
    }
    fn rows(&self) -> Vec<(QKey, f64)> {
        let mut out = Vec::new();
        for (s, row) in self.values.iter().enumerate() {
            for (a, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    out.push((QKey::State { s, a }, *v));
                }
            }
        }
        out
    }
    fn baseline_weights(&self, key: VKey) -> Option<Vec<(usize, f64)>> {
        match key {
            VKey::State(s) => self
                .action_given_state
                .get(s)?
                .as_ref()
                .map(|r| r.iter().copied().enumerate().filter(|x| x.1 > 0.0).collect()),
            _ => None,
        }
    }
    fn residual(&self) -> f64 {
        self.residual
    }
}

pub fn q_state(model: &DecPomdp, vis: &Visitation) -> Result<StateQ> {
    let ns = model.n_states();
    let na = model.n_joint_actions();
    let gamma = model.discount;
    let rho: Vec<Option<Vec<f64>>> = (0..ns).map(|s| vis.action_given_state(s)).collect();
    let live: Vec<bool> = (0..ns).map(|s| !model.terminal[s] && rho[s].is_some()).collect();
    let successors = |s: usize, a: usize| model.transition[s][a].iter().filter(|&&(sn, p)| p > 0.0 && !model.terminal[sn]);
    let mut defined = vec![vec![false; na]; ns];
    for s in 0..ns {
        if live[s] {
            for a in 0..na {
                defined[s][a] = gamma == 0.0 || successors(s, a).all(|&(sn, _)| live[sn]);
            }
        }
    }
    if gamma > 0.0 {
        loop {
            let mut changed = false;
            for s in 0..ns {
                for a in 0..na {
                    if !defined[s][a] {
                        continue;
                    }
                    let bad = successors(s, a).any(|&(sn, _)| {
                        rho[sn].as_ref().is_some_and(|r| r.iter().enumerate().any(|(a2, &p)| p > 0.0 && !defined[sn][a2]))
                    });
                    if bad {
                        defined[s][a] = false;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }
    let mut index = HashMap::new();
    let mut keys = Vec::new();
    for s in 0..ns {
        for a in 0..na {
            if defined[s][a] {
                index.insert((s, a), keys.len());
                keys.push((s, a));
            }
        }
    }
    let mut rewards = Vec::with_capacity(keys.len());
    let mut p1 = Vec::with_capacity(keys.len());
    for &(s, a) in &keys {
        rewards.push(model.reward[s][a]);
        let mut row = Vec::new();
        if gamma > 0.0 {
            for &(sn, pt) in successors(s, a) {
                if let Some(r) = &rho[sn] {
                    for (a2, &p) in r.iter().enumerate() {
                        if p > 0.0 {
                            row.push((index[&(sn, a2)], pt * p));
                        }
                    }
                }
            }
        }
        p1.push(row);
    }
    let sol = solve_rows(rewards, p1, gamma)?;
    let mut values = vec![vec![None; na]; ns];
    for (&(s, a), v) in keys.iter().zip(sol.q) {
        values[s][a] = Some(v);
    }
    Ok(StateQ { values, action_given_state: rho, residual: sol.residual })
}

/// Timed `Q_t(s, a⃗)` by backward recursion with `Pr(A⃗_{t+1} | S_{t+1})`.
#[derive(Debug, Clone)]
pub struct StateTimedQ {
    pub values: Vec<Vec<Vec<Option<f64>>>>,
    pub weights: Vec<Vec<Option<Vec<f64>>>>,
}

impl StateTimedQ {
    pub fn get(&self, t: usize, s: usize, a: usize) -> Option<f64> {
        self.values.get(t)?.get(s)?.get(a).copied().flatten()
    }
}

impl QTable for StateTimedQ {
    fn variant(&self) -> QVariant {
        QVariant::StateTimed
    }
    fn lookup(&self, key: QKey) -> Option<f64> {
        match key {
            QKey::StateTimed { t, s, a } => self.get(t, s, a),
            _ => None,
        }
    }
    fn rows(&self) -> Vec<(QKey, f64)> {
        let mut out = Vec::new();
        for (t, layer) in self.values.iter().enumerate() {
            for (s, row) in layer.iter().enumerate() {
                for (a, v) in row.iter().enumerate() {
                    if let Some(v) = v {
                        out.push((QKey::StateTimed { t, s, a }, *v));
                    }
                }
            }
        }
        out
    }
    fn baseline_weights(&self, key: VKey) -> Option<Vec<(usize, f64)>> {
        match key {
            VKey::StateTimed(t, s) => self
                .weights
                .get(t)?
                .get(s)?
                .as_ref()
                .map(|r| r.iter().copied().enumerate().filter(|x| x.1 > 0.0).collect()),
            _ => None,
        }
    }
    fn residual(&self) -> f64 {
        0.0
    }
}

pub fn q_state_timed(model: &DecPomdp, vis: &Visitation) -> StateTimedQ {
    let ns = model.n_states();
    let na = model.n_joint_actions();
    let gamma = model.discount;
    let steps = vis.state_marginals.len();
    let limit = step_limit(model, vis);
    let weights: Vec<Vec<Option<Vec<f64>>>> =
        (0..steps).map(|t| (0..ns).map(|s| vis.timed_action_given_state(t, s)).collect()).collect();
    let mut values = vec![vec![vec![None; na]; ns]; steps];
    for t in (0..steps).rev() {
        for s in 0..ns {
            if weights[t][s].is_none() || model.terminal[s] {
                continue;
            }
            for a in 0..na {
                let mut q = model.reward[s][a];
                let mut ok = true;
                if gamma > 0.0 && t + 1 < limit {
                    for &(sn, pt) in &model.transition[s][a] {
                        if pt <= 0.0 || model.terminal[sn] {
                            continue;
                        }
                        let w = if t + 1 < steps { weights[t + 1][sn].as_ref() } else { None };
                        match w {
                            Some(w) => {
                                for (a2, &p) in w.iter().enumerate() {
                                    if p > 0.0 {
                                        match values[t + 1][sn][a2] {
                                            Some(v) => q += gamma * pt * p * v,
                                            None => ok = false,
                                        }
                                    }
                                }
                            }
                            None => ok = false,
                        }
                    }
                }
                if ok {
                    values[t][s][a] = Some(q);
                }
            }
        }
    }
    StateTimedQ { values, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains;
    use crate::visitation::{compute_visitations, VisitationConfig};
    use approx::assert_abs_diff_eq;

    #[test]
    fn climb_individual_values() {
        let b = domains::climb_game();
        let pol = b.reference_policies.unwrap();
        let vis = compute_visitations(&b.model, &pol, &VisitationConfig::default()).unwrap();
        let q1 = q_individual(&b.model, &pol, &vis, 0).unwrap();
        let q2 = q_individual(&b.model, &pol, &vis, 1).unwrap();
        assert_abs_diff_eq!(q1.get(0, 0).unwrap(), -19.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q1.get(0, 1).unwrap(), -23.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q1.get(0, 2).unwrap(), 11.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q2.get(0, 1).unwrap(), -17.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q2.get(0, 2).unwrap(), 5.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn climb_individual_advantage() {
        let b = domains::climb_game();
        let pol = b.reference_policies.unwrap();
        let vis = compute_visitations(&b.model, &pol, &VisitationConfig::default()).unwrap();
        let q1 = q_individual(&b.model, &pol, &vis, 0).unwrap();
        let v = v_baseline(&q1);
        let adv = advantage(&q1, &v).unwrap();
        let a3 = adv.iter().find(|(k, _)| *k == QKey::Individual { agent: 0, h: 0, a: 2 }).unwrap().1;
        assert_abs_diff_eq!(a3, 64.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn advantage_rejects_mismatched_baseline() {
        let b = domains::climb_game();
        let pol = b.reference_policies.unwrap();
        let vis = compute_visitations(&b.model, &pol, &VisitationConfig::default()).unwrap();
        let qh = q_joint_history(&b.model, &pol, &vis).unwrap();
        let qs = q_state(&b.model, &vis).unwrap();
        let v = v_baseline(&qs);
        assert!(matches!(advantage(&qh, &v), Err(Error::VariantMismatch { .. })));
    }

    #[test]
    fn beverage_state_values() {
        let b = domains::beverage();
        let pol = b.reference_policies.unwrap();
        let vis = compute_visitations(&b.model, &pol, &VisitationConfig::default()).unwrap();
        let qs = q_state(&b.model, &vis).unwrap();
        let qh = q_joint_history(&b.model, &pol, &vis).unwrap();
        assert_eq!(qs.get(0, 1), Some(-1.0));
        assert_eq!(qs.get(1, 1), Some(1.0));
        assert_abs_diff_eq!(qh.get(0, 1).unwrap(), 0.0);
    }
}
