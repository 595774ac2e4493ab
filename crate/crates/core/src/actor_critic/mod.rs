//! Episode-driven actor-critic with tabular V critics and one-step TD advantages.

mod config;

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{default_config, DomainDefaults};

use crate::error::{Error, Result};
use crate::gradients::{root_probabilities, Variant};
use crate::model::policy::{score_from_probs, softmax_score};
use crate::model::{DecPomdp, IndividualHistory, JointHistory, JointSoftmax, Policy, PolicySet, RulePolicy, SoftmaxPolicy};
use crate::values::QVariant;
use crate::visitation::{compute_visitations, VisitationConfig};

pub const DEFAULT_EVAL_EPISODES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStep {
    pub state: usize,
    pub history: JointHistory,
    pub action: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub steps: Vec<EpisodeStep>,
    /// Stopped by `max_len` before reaching a terminal state or the model horizon.
    pub truncated: bool,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let mut w = 1.0;
        self.steps
            .iter()
            .map(|s| {
                let r = w * s.reward;
                w *= gamma;
                r
            })
            .sum()
    }
}

fn draw<R: Rng>(rng: &mut R, items: impl IntoIterator<Item = (usize, f64)>) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in items {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// On-policy rollout until a terminal state, the model horizon, or `max_len` decisions.
pub fn sample_episode<R: Rng>(model: &DecPomdp, policies: &PolicySet, rng: &mut R, max_len: usize) -> Result<Episode> {
    let n = model.n_agents();
    let mut s = draw(rng, model.start.iter().copied().enumerate());
    let mut steps = Vec::new();
    if model.terminal[s] {
        return Ok(Episode { steps, truncated: false });
    }
    let first = model.initial_observation.as_ref().map(|rows| draw(rng, rows[s].iter().copied()));
    let mut h = JointHistory {
        agents: (0..n).map(|i| IndividualHistory::rooted(first.map(|o| model.observations.component(o, i)))).collect(),
    };
    let limit = model.horizon.map_or(max_len, |hz| hz.min(max_len));
    let mut ended = false;
    while steps.len() < limit {
        let a = draw(rng, policies.joint_distribution_of(&model.actions, &h)?);
        steps.push(EpisodeStep { state: s, history: h.clone(), action: a, reward: model.reward[s][a] });
        let sn = draw(rng, model.transition[s][a].iter().copied());
        if model.terminal[sn] {
            ended = true;
            break;
        }
        let o = draw(rng, model.observation[a][sn].iter().copied());
        for (i, hi) in h.agents.iter_mut().enumerate() {
            *hi = hi.extended(model.actions.component(a, i), model.observations.component(o, i));
        }
        s = sn;
    }
    let truncated = !ended && steps.len() == max_len && model.horizon.map_or(true, |hz| hz > max_len);
    Ok(Episode { steps, truncated })
}

pub fn sample_episode_seeded(model: &DecPomdp, policies: &PolicySet, seed: u64, max_len: usize) -> Result<Episode> {
    sample_episode(model, policies, &mut ChaCha8Rng::seed_from_u64(seed), max_len)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CriticKey {
    Individual(usize, IndividualHistory),
    Joint(JointHistory),
    State(usize),
    HistoryState(JointHistory, usize),
}

/// Tabular `V̂` with lazily created zero-initialized entries.
#[derive(Debug, Clone)]
pub struct CriticModel {
    pub variant: QVariant,
    pub lr: f64,
    pub values: HashMap<CriticKey, f64>,
}

impl CriticModel {
    pub fn new(variant: QVariant, lr: f64) -> Self {
        Self { variant, lr, values: HashMap::new() }
    }

    pub fn for_variant(variant: Variant, lr: f64) -> Self {
        Self::new(variant.critic(), lr)
    }

    pub fn value(&self, key: &CriticKey) -> f64 {
        self.values.get(key).copied().unwrap_or(0.0)
    }

    /// Number of key streams: one per agent for individual critics, otherwise one.
    pub fn streams(&self, n_agents: usize) -> usize {
        if self.variant == QVariant::IndividualHistory {
            n_agents
        } else {
            1
        }
    }

    /// Keys visited along the episode, per stream.
    pub fn keys(&self, episode: &Episode, n_agents: usize) -> Vec<Vec<CriticKey>> {
        (0..self.streams(n_agents))
            .map(|i| {
                episode
                    .steps
                    .iter()
                    .map(|st| match self.variant {
                        QVariant::IndividualHistory => CriticKey::Individual(i, st.history.agents[i].clone()),
                        QVariant::JointHistory => CriticKey::Joint(st.history.clone()),
                        QVariant::State | QVariant::StateTimed => CriticKey::State(st.state),
                        QVariant::HistoryState => CriticKey::HistoryState(st.history.clone(), st.state),
                    })
                    .collect()
            })
            .collect()
    }
}

/// `δ_t = r_t + γ·V̂(key_{t+1}) − V̂(key_t)` per stream, with `V̂ = 0` past the last step.
pub fn td_advantages(episode: &Episode, critic: &CriticModel, gamma: f64, n_agents: usize) -> Vec<Vec<f64>> {
    critic
        .keys(episode, n_agents)
        .iter()
        .map(|keys| {
            (0..keys.len())
                .map(|t| {
                    let next = if t + 1 < keys.len() { critic.value(&keys[t + 1]) } else { 0.0 };
                    episode.steps[t].reward + gamma * next - critic.value(&keys[t])
                })
                .collect()
        })
        .collect()
}

/// `V̂(key_t) += (β/T)·δ_t`, all increments computed from the same pre-update table.
pub fn critic_update(critic: &mut CriticModel, episode: &Episode, deltas: &[Vec<f64>], n_agents: usize) {
    let t_len = episode.len().max(1) as f64;
    let keys = critic.keys(episode, n_agents);
    let mut inc: HashMap<CriticKey, f64> = HashMap::new();
    for (stream, ks) in keys.into_iter().enumerate() {
        for (t, k) in ks.into_iter().enumerate() {
            *inc.entry(k).or_insert(0.0) += critic.lr / t_len * deltas[stream][t];
        }
    }
    for (k, d) in inc {
        *critic.values.entry(k).or_insert(0.0) += d;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: Variant,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub episodes: usize,
    pub seed: u64,
    pub eval_every: usize,
    pub max_len: usize,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    /// Joint-history budget for exact evaluation before falling back to Monte Carlo.
    #[serde(default = "default_eval_budget")]
    pub eval_budget: usize,
}

fn default_eval_episodes() -> usize {
    DEFAULT_EVAL_EPISODES
}

fn default_eval_budget() -> usize {
    200_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMethod {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub episode: usize,
    /// Expected return of the stochastic policy.
    pub stochastic: f64,
    pub stochastic_method: EvalMethod,
    /// Expected return of the greedy policy.
    pub greedy: f64,
    pub greedy_method: EvalMethod,
    pub root_probs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct LearningCurve {
    pub config: TrainConfig,
    pub points: Vec<CurvePoint>,
    pub policies: PolicySet,
    pub critic: CriticModel,
}

impl LearningCurve {
    pub fn final_point(&self) -> &CurvePoint {
        self.points.last().expect("curve has at least the initial point")
    }
}

/// Initial policy for a variant: uniform decentralized softmax, or a uniform joint softmax for JAC.
pub fn initial_policies(model: &DecPomdp, variant: Variant) -> PolicySet {
    if variant.is_centralized_actor() {
        PolicySet::Centralized(JointSoftmax::uniform(model.n_joint_actions()))
    } else {
        PolicySet::Decentralized(
            (0..model.n_agents()).map(|i| Policy::Softmax(SoftmaxPolicy::uniform(model.actions.size(i)))).collect(),
        )
    }
}

fn argmax_set(row: &[f64]) -> Vec<f64> {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hits = row.iter().filter(|&&x| x == m).count() as f64;
    row.iter().map(|&x| if x == m { 1.0 / hits } else { 0.0 }).collect()
}

/// Greedy counterpart: uniform over each history's highest-probability actions.
pub fn greedy_policies(policies: &PolicySet) -> PolicySet {
    match policies {
        PolicySet::Centralized(p) => {
            let logits = p
                .logits
                .iter()
                .map(|(h, row)| (h.clone(), argmax_set(row).into_iter().map(|x| if x > 0.0 { 0.0 } else { f64::NEG_INFINITY }).collect()))
                .collect();
            PolicySet::Centralized(JointSoftmax { n_joint_actions: p.n_joint_actions, logits })
        }
        PolicySet::Decentralized(ps) => PolicySet::Decentralized(
            ps.iter()
                .enumerate()
                .map(|(i, p)| {
                    let inner = p.clone();
                    Policy::Rule(RulePolicy {
                        name: format!("greedy-{}", p.kind()),
                        n_actions: p.n_actions(),
                        rule: Arc::new(move |h: &IndividualHistory| {
                            let n = inner.n_actions();
                            argmax_set(&inner.probs(i, h).unwrap_or_else(|_| vec![1.0; n]))
                        }),
                    })
                })
                .collect(),
        ),
    }
}

/// Exact expected return when enumerable within `budget`, else the mean of `episodes` seeded rollouts.
pub fn evaluate(
    model: &DecPomdp,
    policies: &PolicySet,
    budget: usize,
    episodes: usize,
    max_len: usize,
    seed: u64,
) -> Result<(f64, EvalMethod)> {
    let cfg = VisitationConfig { node_budget: budget, ..Default::default() };
    match compute_visitations(model, policies, &cfg) {
        Ok(vis) => Ok((vis.expected_return, EvalMethod::Exact)),
        Err(Error::BudgetExceeded { .. }) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut total = 0.0;
            for _ in 0..episodes {
                total += sample_episode(model, policies, &mut rng, max_len)?.discounted_return(model.discount);
            }
            Ok((total / episodes.max(1) as f64, EvalMethod::MonteCarlo))
        }
        Err(e) => Err(e),
    }
}

fn eval_point(model: &DecPomdp, policies: &PolicySet, cfg: &TrainConfig, episode: usize) -> Result<CurvePoint> {
    let seed = cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ episode as u64;
    let (stochastic, stochastic_method) = evaluate(model, policies, cfg.eval_budget, cfg.eval_episodes, cfg.max_len, seed)?;
    let greedy_set = greedy_policies(policies);
    let (greedy, greedy_method) = evaluate(model, &greedy_set, cfg.eval_budget, cfg.eval_episodes, cfg.max_len, seed ^ 1)?;
    Ok(CurvePoint {
        episode,
        stochastic,
        stochastic_method,
        greedy,
        greedy_method,
        root_probs: root_probabilities(model, policies)?,
    })
}

/// Runs the actor-critic loop for one variant and seed, evaluating at episode 0 and every `eval_every` episodes.
pub fn train(model: &DecPomdp, cfg: &TrainConfig) -> Result<LearningCurve> {
    if cfg.eval_every == 0 {
        return Err(Error::InvalidArgument("eval_every must be positive".into()));
    }
    let n = model.n_agents();
    let gamma = model.discount;
    let mut policies = initial_policies(model, cfg.variant);
    let mut critic = CriticModel::for_variant(cfg.variant, cfg.critic_lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut points = vec![eval_point(model, &policies, cfg, 0)?];
    for e in 0..cfg.episodes {
        let episode = sample_episode(model, &policies, &mut rng, cfg.max_len)?;
        let deltas = td_advantages(&episode, &critic, gamma, n);
        let mut rows: HashMap<(usize, RowId), Vec<f64>> = HashMap::new();
        let streams = critic.streams(n);
        let mut w = 1.0;
        for (t, st) in episode.steps.iter().enumerate() {
            match &policies {
                PolicySet::Centralized(p) => {
                    let score = softmax_score(&p.probs(&st.history), st.action);
                    let row = rows.entry((0, RowId::Joint(st.history.clone()))).or_insert_with(|| vec![0.0; score.len()]);
                    row.iter_mut().zip(&score).for_each(|(x, s)| *x += w * deltas[0][t] * s);
                }
                PolicySet::Decentralized(ps) => {
                    for (i, p) in ps.iter().enumerate() {
                        let h = &st.history.agents[i];
                        let probs = p.probs(i, h)?;
                        let score = score_from_probs(p, &probs, model.actions.component(st.action, i))?;
                        let d = deltas[i.min(streams - 1)][t];
                        let row = rows.entry((i, RowId::Individual(h.clone()))).or_insert_with(|| vec![0.0; score.len()]);
                        row.iter_mut().zip(&score).for_each(|(x, s)| *x += w * d * s);
                    }
                }
            }
            w *= gamma;
        }
        for ((i, id), g) in rows {
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { iterate: e });
            }
            let logits = match (&mut policies, id) {
                (PolicySet::Centralized(p), RowId::Joint(h)) => {
                    let n = p.n_joint_actions;
                    p.logits.entry(h).or_insert_with(|| vec![0.0; n])
                }
                (PolicySet::Decentralized(ps), RowId::Individual(h)) => match &mut ps[i] {
                    Policy::Softmax(p) => {
                        let n = p.n_actions;
                        p.logits.entry(h).or_insert_with(|| vec![0.0; n])
                    }
                    _ => return Err(Error::UnsupportedParameterization("actor-critic needs softmax actors".into())),
                },
                _ => unreachable!("row kind follows the policy kind"),
            };
            logits.iter_mut().zip(&g).for_each(|(x, d)| *x += cfg.actor_lr * d);
        }
        critic_update(&mut critic, &episode, &deltas, n);
        if (e + 1) % cfg.eval_every == 0 || e + 1 == cfg.episodes {
            points.push(eval_point(model, &policies, cfg, e + 1)?);
        }
    }
    Ok(LearningCurve { config: cfg.clone(), points, policies, critic })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum RowId {
    Individual(IndividualHistory),
    Joint(JointHistory),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains;

    #[test]
    fn climb_episode_has_one_step() {
        let b = domains::climb_game();
        let pol = b.reference_policies.unwrap();
        for seed in 0..20 {
            let ep = sample_episode_seeded(&b.model, &pol, seed, 10).unwrap();
            assert_eq!(ep.len(), 1);
            assert!([11.0, -30.0, 0.0, 7.0, 6.0, 5.0].contains(&ep.steps[0].reward));
            assert!(!ep.truncated);
        }
    }

    #[test]
    fn dec_tiger_reference_episode_length() {
        let b = domains::dec_tiger();
        let pol = b.reference_policies.unwrap();
        for seed in 0..20 {
            let ep = sample_episode_seeded(&b.model, &pol, seed, 25).unwrap();
            assert_eq!(ep.len(), 3);
        }
    }

    #[test]
    fn zero_critic_advantage_is_reward() {
        let b = domains::dec_tiger();
        let pol = b.reference_policies.unwrap();
        let ep = sample_episode_seeded(&b.model, &pol, 3, 25).unwrap();
        let critic = CriticModel::new(QVariant::JointHistory, 0.1);
        let d = td_advantages(&ep, &critic, 1.0, 2);
        let r: Vec<f64> = ep.steps.iter().map(|s| s.reward).collect();
        assert_eq!(d, vec![r]);
    }

    #[test]
    fn training_is_deterministic() {
        let b = domains::climb_game();
        let cfg = TrainConfig {
            variant: Variant::IaccH,
            actor_lr: 0.1,
            critic_lr: 0.1,
            episodes: 200,
            seed: 4,
            eval_every: 50,
            max_len: 1,
            eval_episodes: 10,
            eval_budget: 1000,
        };
        let a = train(&b.model, &cfg).unwrap();
        let c = train(&b.model, &cfg).unwrap();
        assert_eq!(a.points, c.points);
        assert_eq!(a.points.len(), 5);
    }
}
