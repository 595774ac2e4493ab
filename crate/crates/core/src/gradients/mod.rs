//! Exact policy-gradient means, single-sample estimators, covariance, and bias analytics.

mod checks;
mod training;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use checks::{exact_return, finite_difference_gradient, score_reward_lemma, tabularize, FD_STEP};
pub use training::{
    apply_gradient, apply_rows, gd_train, project_simplex, root_probabilities, sgd_train, GdConfig, IterateRecord, RowKey,
    SgdConfig, SgdRecord, SgdRun, StepSchedule, TrainingRun,
};

use crate::error::{Error, Result};
use crate::model::policy::{score_from_probs, softmax_score};
use crate::model::{DecPomdp, PolicySet};
use crate::values::{
    q_history_state, q_individual_all, q_joint_history, q_state, HistoryStateQ, IndividualQ, JointHistoryQ, QVariant,
    StateQ,
};
use crate::visitation::Visitation;

/// Full covariance matrices are only materialized up to this many dimensions.
pub const FULL_COVARIANCE_LIMIT: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Iac,
    IaccH,
    IaccS,
    IaccHs,
    Jac,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Iac, Variant::IaccH, Variant::IaccS, Variant::IaccHs, Variant::Jac];
    pub const DECENTRALIZED: [Variant; 4] = [Variant::Iac, Variant::IaccH, Variant::IaccS, Variant::IaccHs];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Iac => "iac",
            Variant::IaccH => "iacc-h",
            Variant::IaccS => "iacc-s",
            Variant::IaccHs => "iacc-hs",
            Variant::Jac => "jac",
        }
    }

    pub fn critic(self) -> QVariant {
        match self {
            Variant::Iac => QVariant::IndividualHistory,
            Variant::IaccH | Variant::Jac => QVariant::JointHistory,
            Variant::IaccS => QVariant::State,
            Variant::IaccHs => QVariant::HistoryState,
        }
    }

    pub fn is_centralized_actor(self) -> bool {
        self == Variant::Jac
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant '{s}' (expected iac, iacc-h, iacc-s, iacc-hs, jac)")))
    }
}

/// Gradient normalization: `Unit` drops the `(1−γ)` factor, `FullyScaled` keeps it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    Unit,
    FullyScaled,
}

impl Convention {
    pub fn factor(self, gamma: f64) -> f64 {
        match self {
            Convention::Unit => 1.0,
            Convention::FullyScaled => 1.0 - gamma,
        }
    }
}

/// The exact critic a variant's estimator reads from.
#[derive(Debug, Clone)]
pub enum Critic {
    Individual(Vec<IndividualQ>),
    JointHistory(JointHistoryQ),
    State(StateQ),
    HistoryState(HistoryStateQ),
}

impl Critic {
    pub fn variant(&self) -> QVariant {
        match self {
            Critic::Individual(_) => QVariant::IndividualHistory,
            Critic::JointHistory(_) => QVariant::JointHistory,
            Critic::State(_) => QVariant::State,
            Critic::HistoryState(_) => QVariant::HistoryState,
        }
    }
}

pub fn build_critic(variant: Variant, model: &DecPomdp, policies: &PolicySet, vis: &Visitation) -> Result<Critic> {
    Ok(match variant.critic() {
        QVariant::IndividualHistory => Critic::Individual(q_individual_all(model, policies, vis)?),
        QVariant::JointHistory => Critic::JointHistory(q_joint_history(model, policies, vis)?),
        QVariant::State => Critic::State(q_state(model, vis)?),
        QVariant::HistoryState => Critic::HistoryState(q_history_state(model, policies, vis)?),
        QVariant::StateTimed => unreachable!("no estimator reads the timed state critic"),
    })
}

/// One `(h⃗, s, a⃗)` point of the sampling distribution with its `η` weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub history: usize,
    pub state: usize,
    pub action: usize,
    pub weight: f64,
}

pub fn draws(vis: &Visitation) -> Vec<Draw> {
    let mut out = Vec::new();
    for h in 0..vis.n_histories() {
        for &(a, p) in &vis.policy[h] {
            for &(s, e) in &vis.history_state[h] {
                if e * p > 0.0 {
                    out.push(Draw { history: h, state: s, action: a, weight: e * p });
                }
            }
        }
    }
    out
}

/// Critic value the variant's estimator multiplies the score by, for `agent`.
pub fn critic_value(variant: Variant, critic: &Critic, vis: &Visitation, agent: usize, d: &Draw) -> Result<f64> {
    if critic.variant() != variant.critic() {
        return Err(Error::VariantMismatch { expected: variant.critic().as_str().into(), found: critic.variant().as_str().into() });
    }
    let missing = || Error::Undefined(format!("{} critic has no entry for history {} state {} action {}", variant, d.history, d.state, d.action));
    match critic {
        Critic::Individual(qs) => {
            let hi = vis.arena.members(d.history)[agent];
            let ai = vis.arena.action_space().component(d.action, agent);
            qs[agent].get(hi, ai).ok_or_else(missing)
        }
        Critic::JointHistory(q) => q.get(d.history, d.action).ok_or_else(missing),
        Critic::State(q) => q.get(d.state, d.action).ok_or_else(missing),
        Critic::HistoryState(q) => q.get(d.history, d.state, d.action).ok_or_else(missing),
    }
}

/// Parameter coordinates: `(individual history id, action)` per agent, or `(joint history id, joint action)` for a joint actor.
#[derive(Debug, Clone, PartialEq)]
pub struct Dimensions {
    pub entries: Vec<(usize, usize)>,
    index: HashMap<(usize, usize), usize>,
}

impl Dimensions {
    fn new(entries: Vec<(usize, usize)>) -> Self {
        let index = entries.iter().enumerate().map(|(k, &e)| (e, k)).collect();
        Self { entries, index }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, history: usize, action: usize) -> Option<usize> {
        self.index.get(&(history, action)).copied()
    }
}

pub fn agent_dimensions(model: &DecPomdp, vis: &Visitation, agent: usize) -> Dimensions {
    let n = model.actions.size(agent);
    Dimensions::new(vis.reachable_individuals(agent).into_iter().flat_map(|h| (0..n).map(move |a| (h, a))).collect())
}

pub fn joint_dimensions(model: &DecPomdp, vis: &Visitation) -> Dimensions {
    let na = model.n_joint_actions();
    Dimensions::new((0..vis.n_histories()).filter(|&h| vis.history[h] > 0.0).flat_map(|h| (0..na).map(move |a| (h, a))).collect())
}

#[derive(Debug, Clone)]
pub struct GradientStats {
    pub variant: Variant,
    pub convention: Convention,
    /// Agent index; 0 for the joint actor.
    pub agent: usize,
    pub dims: Dimensions,
    pub mean: Vec<f64>,
    /// `E[ĝ²]` per coordinate, when moments were requested.
    pub second_moment: Option<Vec<f64>>,
    pub cov_trace: Option<f64>,
    pub covariance: Option<Vec<Vec<f64>>>,
}

impl GradientStats {
    pub fn mean_norm(&self) -> f64 {
        self.mean.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn covariance_diagonal(&self) -> Option<Vec<f64>> {
        let m2 = self.second_moment.as_ref()?;
        Some(m2.iter().zip(&self.mean).map(|(e2, mu)| e2 - mu * mu).collect())
    }

    pub fn get(&self, history: usize, action: usize) -> Option<f64> {
        self.dims.position(history, action).map(|k| self.mean[k])
    }
}

fn check_differentiable(variant: Variant, policies: &PolicySet) -> Result<()> {
    if variant.is_centralized_actor() != policies.is_centralized() {
        return Err(Error::UnsupportedParameterization(format!(
            "variant {variant} needs a {} policy",
            if variant.is_centralized_actor() { "centralized" } else { "decentralized" }
        )));
    }
    if !policies.is_differentiable() {
        return Err(Error::UnsupportedParameterization("policy has no gradient".into()));
    }
    Ok(())
}

/// Exact `E_ρ[ĝ]` per agent. Under [`Convention::Unit`] this is `Σ η·Q·∇log π`.
pub fn expected_gradient(
    variant: Variant,
    model: &DecPomdp,
    policies: &PolicySet,
    critic: &Critic,
    vis: &Visitation,
    convention: Convention,
) -> Result<Vec<GradientStats>> {
    accumulate(variant, model, policies, critic, vis, convention, false)
}

/// Exact first and second moments of `ĝ` under `ρ`.
pub fn gradient_moments(
    variant: Variant,
    model: &DecPomdp,
    policies: &PolicySet,
    critic: &Critic,
    vis: &Visitation,
    convention: Convention,
) -> Result<Vec<GradientStats>> {
    accumulate(variant, model, policies, critic, vis, convention, true)
}

/// Computes the critic and then [`gradient_moments`].
pub fn analyze(variant: Variant, model: &DecPomdp, policies: &PolicySet, vis: &Visitation) -> Result<Vec<GradientStats>> {
    let critic = build_critic(variant, model, policies, vis)?;
    gradient_moments(variant, model, policies, &critic, vis, Convention::Unit)
}

/// Score row of `agent` at draw `d` (or of the joint actor), over that agent's actions.
fn score_at(policies: &PolicySet, vis: &Visitation, agent: usize, d: &Draw, probs: &[f64]) -> Result<Vec<f64>> {
    match policies {
        PolicySet::Centralized(_) => Ok(softmax_score(probs, d.action)),
        PolicySet::Decentralized(ps) => score_from_probs(&ps[agent], probs, vis.arena.action_space().component(d.action, agent)),
    }
}

fn accumulate(
    variant: Variant,
    model: &DecPomdp,
    policies: &PolicySet,
    critic: &Critic,
    vis: &Visitation,
    convention: Convention,
    moments: bool,
) -> Result<Vec<GradientStats>> {
    check_differentiable(variant, policies)?;
    let scale = convention.factor(model.discount);
    let z = vis.z;
    let all = draws(vis);
    let agents: Vec<usize> = if policies.is_centralized() { vec![0] } else { (0..model.n_agents()).collect() };
    let mut out = Vec::with_capacity(agents.len());
    for agent in agents {
        let (dims, n_row) = if policies.is_centralized() {
            (joint_dimensions(model, vis), model.n_joint_actions())
        } else {
            (agent_dimensions(model, vis, agent), model.actions.size(agent))
        };
        let mut mean = vec![0.0; dims.len()];
        let mut second = vec![0.0; dims.len()];
        let mut blocks: HashMap<usize, Vec<Vec<f64>>> = HashMap::new();
        let mut probs_cache: HashMap<usize, Vec<f64>> = HashMap::new();
        for d in &all {
            let row_id = if policies.is_centralized() { d.history } else { vis.arena.members(d.history)[agent] };
            if !probs_cache.contains_key(&row_id) {
                let probs = match policies {
                    PolicySet::Centralized(_) => {
                        let mut p = vec![0.0; n_row];
                        for &(a, q) in &vis.policy[d.history] {
                            p[a] = q;
                        }
                        p
                    }
                    PolicySet::Decentralized(ps) => ps[agent].probs(agent, vis.arena.individual(agent, row_id))?,
                };
                probs_cache.insert(row_id, probs);
            }
            let q = critic_value(variant, critic, vis, agent, d)?;
            let score = score_at(policies, vis, agent, d, &probs_cache[&row_id])?;
            let base = dims.position(row_id, 0).expect("reachable history has dimensions");
            let p = d.weight / z;
            let g: Vec<f64> = score.iter().map(|sc| z * scale * q * sc).collect();
            for (k, gk) in g.iter().enumerate() {
                mean[base + k] += p * gk;
                if moments {
                    second[base + k] += p * gk * gk;
                }
            }
            if moments && dims.len() <= FULL_COVARIANCE_LIMIT {
                let block = blocks.entry(row_id).or_insert_with(|| vec![vec![0.0; n_row]; n_row]);
                for (k, gk) in g.iter().enumerate() {
                    for (l, gl) in g.iter().enumerate() {
                        block[k][l] += p * gk * gl;
                    }
                }
            }
        }
        let (second_moment, cov_trace, covariance) = if moments {
            let trace = second.iter().zip(&mean).map(|(e2, mu)| e2 - mu * mu).sum();
            let cov = (dims.len() <= FULL_COVARIANCE_LIMIT).then(|| {
                let mut c: Vec<Vec<f64>> = mean.iter().map(|mi| mean.iter().map(|mj| -mi * mj).collect()).collect();
                for (&row_id, block) in &blocks {
                    let base = dims.position(row_id, 0).unwrap();
                    for k in 0..n_row {
                        for l in 0..n_row {
                            c[base + k][base + l] += block[k][l];
                        }
                    }
                }
                c
            });
            (Some(second), Some(trace), cov)
        } else {
            (None, None, None)
        };
        out.push(GradientStats { variant, convention, agent, dims, mean, second_moment, cov_trace, covariance });
    }
    Ok(out)
}

/// The estimator `ĝ` for one draw, as `(dimension index, value)` pairs per agent.
pub fn sample_gradient(
    variant: Variant,
    model: &DecPomdp,
    policies: &PolicySet,
    critic: &Critic,
    vis: &Visitation,
    draw: (usize, usize, usize),
    convention: Convention,
) -> Result<Vec<Vec<(usize, f64)>>> {
    check_differentiable(variant, policies)?;
    let (history, state, action) = draw;
    if history >= vis.n_histories() || vis.eta_history_state(history, state) <= 0.0 || vis.policy_prob(history, action) <= 0.0 {
        return Err(Error::Unreachable(format!("draw (history {history}, state {state}, action {action})")));
    }
    let d = Draw { history, state, action, weight: 0.0 };
    let scale = vis.z * convention.factor(model.discount);
    let agents: Vec<usize> = if policies.is_centralized() { vec![0] } else { (0..model.n_agents()).collect() };
    let mut out = Vec::new();
    for agent in agents {
        let (dims, probs, row_id) = match policies {
            PolicySet::Centralized(_) => {
                let mut p = vec![0.0; model.n_joint_actions()];
                for &(a, q) in &vis.policy[history] {
                    p[a] = q;
                }
                (joint_dimensions(model, vis), p, history)
            }
            PolicySet::Decentralized(ps) => {
                let hi = vis.arena.members(history)[agent];
                (agent_dimensions(model, vis, agent), ps[agent].probs(agent, vis.arena.individual(agent, hi))?, hi)
            }
        };
        let q = critic_value(variant, critic, vis, agent, &d)?;
        let score = score_at(policies, vis, agent, &d, &probs)?;
        let base = dims.position(row_id, 0).unwrap();
        out.push(score.iter().enumerate().map(|(k, sc)| (base + k, scale * q * sc)).collect());
    }
    Ok(out)
}

/// Variance of the value random variables feeding each agent's estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueVariance {
    pub agent: usize,
    /// `Var_ρ[Q(h⃗, a⃗)]`.
    pub centralized: f64,
    /// `Var_ρ[Q_i(h_i, a_i)]`.
    pub decentralized: f64,
    /// `E_{h_i,a_i}[Var_{h⃗,a⃗|h_i,a_i}[Q(h⃗, a⃗)]]`.
    pub conditional: f64,
}

pub fn value_variance(model: &DecPomdp, policies: &PolicySet, vis: &Visitation) -> Result<Vec<ValueVariance>> {
    let qh = q_joint_history(model, policies, vis)?;
    let qi = q_individual_all(model, policies, vis)?;
    let z = vis.z;
    let mut out = Vec::new();
    for (agent, qi) in qi.iter().enumerate() {
        let (mut m1, mut m2, mut d1, mut d2) = (0.0, 0.0, 0.0, 0.0);
        // per (h_i, a_i): (mass, Σ p·Q, Σ p·Q²)
        let mut groups: HashMap<(usize, usize), (f64, f64, f64)> = HashMap::new();
        for h in 0..vis.n_histories() {
            for &(a, pa) in &vis.policy[h] {
                let p = vis.history[h] * pa / z;
                if p <= 0.0 {
                    continue;
                }
                let q = qh.get(h, a).expect("reachable key");
                let hi = vis.arena.members(h)[agent];
                let ai = model.actions.component(a, agent);
                let v = qi.get(hi, ai).expect("reachable key");
                m1 += p * q;
                m2 += p * q * q;
                d1 += p * v;
                d2 += p * v * v;
                let g = groups.entry((hi, ai)).or_insert((0.0, 0.0, 0.0));
                g.0 += p;
                g.1 += p * q;
                g.2 += p * q * q;
            }
        }
        let conditional = groups.values().map(|&(w, s1, s2)| s2 - s1 * s1 / w).sum::<f64>();
        out.push(ValueVariance { agent, centralized: m2 - m1 * m1, decentralized: d2 - d1 * d1, conditional });
    }
    Ok(out)
}

/// `Var_{s|h⃗}[Q(s, a⃗)]`, or `None` if the history is unreachable or a state value is undefined.
pub fn state_value_variance(vis: &Visitation, q: &StateQ, history: usize, action: usize) -> Option<f64> {
    let b = vis.belief(history)?;
    let (mut m1, mut m2) = (0.0, 0.0);
    for (s, &p) in b.iter().enumerate() {
        if p > 0.0 {
            let v = q.get(s, action)?;
            m1 += p * v;
            m2 += p * v * v;
        }
    }
    Some(m2 - m1 * m1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionBias {
    pub agent: usize,
    pub history: usize,
    pub action: usize,
    pub g_state: f64,
    pub g_history: f64,
}

impl DimensionBias {
    pub fn difference(&self) -> f64 {
        self.g_state - self.g_history
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueWitness {
    pub history: usize,
    pub action: usize,
    pub q_history: f64,
    /// `E_{s|h⃗}[Q(s, a⃗)]`.
    pub q_state: f64,
}

impl ValueWitness {
    pub fn gap(&self) -> f64 {
        (self.q_history - self.q_state).abs()
    }
}

#[derive(Debug, Clone)]
pub struct BiasReport {
    pub dimensions: Vec<DimensionBias>,
    pub witnesses: Vec<ValueWitness>,
}

impl BiasReport {
    pub fn max_dimension(&self) -> Option<&DimensionBias> {
        self.dimensions.iter().max_by(|a, b| a.difference().abs().total_cmp(&b.difference().abs()))
    }

    pub fn max_witness(&self) -> Option<&ValueWitness> {
        self.witnesses.iter().max_by(|a, b| a.gap().total_cmp(&b.gap()))
    }

    pub fn max_gradient_gap(&self) -> f64 {
        self.max_dimension().map_or(0.0, |d| d.difference().abs())
    }

    pub fn max_value_gap(&self) -> f64 {
        self.max_witness().map_or(0.0, ValueWitness::gap)
    }
}

/// `g_s − g_h` per dimension (unit convention) and value witnesses over reachable histories and all joint actions.
pub fn bias_report(model: &DecPomdp, policies: &PolicySet, vis: &Visitation) -> Result<BiasReport> {
    let qh = q_joint_history(model, policies, vis)?;
    let qs = q_state(model, vis)?;
    let gh = expected_gradient(Variant::IaccH, model, policies, &Critic::JointHistory(qh.clone()), vis, Convention::Unit)?;
    let gs = expected_gradient(Variant::IaccS, model, policies, &Critic::State(qs.clone()), vis, Convention::Unit)?;
    let mut dimensions = Vec::new();
    for (h, s) in gh.iter().zip(&gs) {
        for (k, &(hist, a)) in h.dims.entries.iter().enumerate() {
            dimensions.push(DimensionBias { agent: h.agent, history: hist, action: a, g_state: s.mean[k], g_history: h.mean[k] });
        }
    }
    let mut witnesses = Vec::new();
    for h in 0..vis.n_histories() {
        let Some(b) = vis.belief(h) else { continue };
        'actions: for a in 0..model.n_joint_actions() {
            let mut e = 0.0;
            for (s, &p) in b.iter().enumerate() {
                if p > 0.0 {
                    match qs.get(s, a) {
                        Some(v) => e += p * v,
                        None => continue 'actions,
                    }
                }
            }
            witnesses.push(ValueWitness { history: h, action: a, q_history: qh.get(h, a).unwrap(), q_state: e });
        }
    }
    Ok(BiasReport { dimensions, witnesses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains;
    use crate::visitation::{compute_visitations, VisitationConfig};
    use approx::assert_abs_diff_eq;

    #[test]
    fn climb_iacc_h_coefficients() {
        let b = domains::climb_game();
        let pol = b.reference_policies.unwrap();
        let vis = compute_visitations(&b.model, &pol, &VisitationConfig::default()).unwrap();
        let critic = build_critic(Variant::IaccH, &b.model, &pol, &vis).unwrap();
        let g = expected_gradient(Variant::IaccH, &b.model, &pol, &critic, &vis, Convention::Unit).unwrap();
        // tabular score is 1/π = 3, so the coefficient of ∇log π is mean/3
        let coef: Vec<f64> = g[0].mean.iter().map(|x| x / 3.0).collect();
        assert_abs_diff_eq!(coef[0], -19.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(coef[1], -23.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(coef[2], 11.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn variant_parsing_round_trips() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("iacc".parse::<Variant>().is_err());
    }

    #[test]
    fn mismatched_critic_is_rejected() {
        let b = domains::climb_game();
        let pol = b.reference_policies.unwrap();
        let vis = compute_visitations(&b.model, &pol, &VisitationConfig::default()).unwrap();
        let critic = build_critic(Variant::IaccS, &b.model, &pol, &vis).unwrap();
        let r = expected_gradient(Variant::IaccH, &b.model, &pol, &critic, &vis, Convention::Unit);
        assert!(matches!(r, Err(Error::VariantMismatch { .. })));
    }

    #[test]
    fn guess_value_variance() {
        let b = domains::guess_game();
        let pol = b.reference_policies.unwrap();
        let vis = compute_visitations(&b.model, &pol, &VisitationConfig::default()).unwrap();
        for v in value_variance(&b.model, &pol, &vis).unwrap() {
            assert_abs_diff_eq!(v.centralized, 50.0, epsilon = 1e-9);
            assert_abs_diff_eq!(v.decentralized, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn beverage_state_variance() {
        let b = domains::beverage();
        let pol = b.reference_policies.unwrap();
        let vis = compute_visitations(&b.model, &pol, &VisitationConfig::default()).unwrap();
        let qs = q_state(&b.model, &vis).unwrap();
        assert_eq!(state_value_variance(&vis, &qs, 0, 1), Some(1.0));
    }

    #[test]
    fn covariance_trace_matches_matrix() {
        let b = domains::morning_game();
        let pol = b.reference_policies.unwrap();
        let vis = compute_visitations(&b.model, &pol, &VisitationConfig::default()).unwrap();
        for g in analyze(Variant::IaccH, &b.model, &pol, &vis).unwrap() {
            let c = g.covariance.as_ref().unwrap();
            let tr: f64 = (0..c.len()).map(|i| c[i][i]).sum();
            assert_abs_diff_eq!(tr, g.cov_trace.unwrap(), epsilon = 1e-12);
            assert!(g.cov_trace.unwrap() >= 0.0);
        }
    }
}
