use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::history::{HistoryArena, IndividualHistory, JointHistory};
use super::space::JointSpace;
use crate::error::{Error, Result};

/// Decision rule for rule-based policies: maps a history to an action distribution.
pub type Rule = Arc<dyn Fn(&IndividualHistory) -> Vec<f64> + Send + Sync>;

/// Direct probability table `θ_{h,a} = π(a; h)`.
#[derive(Debug, Clone)]
pub struct TabularPolicy {
    pub n_actions: usize,
    pub rows: HashMap<IndividualHistory, Vec<f64>>,
    /// Row used for histories absent from `rows`; `None` makes them an error.
    pub default: Option<Vec<f64>>,
}

impl TabularPolicy {
    pub fn uniform(n_actions: usize) -> Self {
        Self { n_actions, rows: HashMap::new(), default: Some(vec![1.0 / n_actions as f64; n_actions]) }
    }

    pub fn row(&self, h: &IndividualHistory) -> Option<&Vec<f64>> {
        self.rows.get(h).or(self.default.as_ref())
    }
}

/// Logit table; histories without an entry have all-zero logits.
#[derive(Debug, Clone)]
pub struct SoftmaxPolicy {
    pub n_actions: usize,
    pub logits: HashMap<IndividualHistory, Vec<f64>>,
}

impl SoftmaxPolicy {
    pub fn uniform(n_actions: usize) -> Self {
        Self { n_actions, logits: HashMap::new() }
    }

    pub fn logits_of(&self, h: &IndividualHistory) -> Vec<f64> {
        self.logits.get(h).cloned().unwrap_or_else(|| vec![0.0; self.n_actions])
    }
}

#[derive(Clone)]
pub struct RulePolicy {
    pub name: String,
    pub n_actions: usize,
    pub rule: Rule,
}

impl fmt::Debug for RulePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RulePolicy").field("name", &self.name).field("n_actions", &self.n_actions).finish()
    }
}

#[derive(Debug, Clone)]
pub enum Policy {
    Tabular(TabularPolicy),
    Softmax(SoftmaxPolicy),
    Rule(RulePolicy),
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// Gradient of `log π(a; h)` with respect to the parameters of row `h`.
///
/// Only the row belonging to `history` can be non-zero, so the vector is
/// stored sparsely as that row.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub agent: usize,
    pub history: IndividualHistory,
    pub row: Vec<f64>,
}

impl Policy {
    pub fn n_actions(&self) -> usize {
        match self {
            Policy::Tabular(p) => p.n_actions,
            Policy::Softmax(p) => p.n_actions,
            Policy::Rule(p) => p.n_actions,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Policy::Tabular(_) => "tabular",
            Policy::Softmax(_) => "softmax",
            Policy::Rule(_) => "rule",
        }
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self, Policy::Rule(_))
    }

    pub fn probs(&self, agent: usize, h: &IndividualHistory) -> Result<Vec<f64>> {
        match self {
            Policy::Tabular(p) => p.row(h).cloned().ok_or_else(|| Error::MissingPolicyEntry {
                agent,
                history: format!("{h:?}"),
            }),
            Policy::Softmax(p) => Ok(softmax(&p.logits_of(h))),
            Policy::Rule(p) => Ok((p.rule)(h)),
        }
    }

    /// Score row: `∂ log π(a; h) / ∂θ_{h,·}`.
    pub fn score_row(&self, agent: usize, h: &IndividualHistory, a: usize) -> Result<Vec<f64>> {
        let probs = self.probs(agent, h)?;
        score_from_probs(self, &probs, a)
    }
}

/// Score row computed from an already-evaluated distribution.
pub fn score_from_probs(policy: &Policy, probs: &[f64], a: usize) -> Result<Vec<f64>> {
    match policy {
        Policy::Tabular(_) => {
            let mut row = vec![0.0; probs.len()];
            if probs[a] <= 0.0 {
                return Err(Error::Undefined(format!("score at zero-probability action {a}")));
            }
            row[a] = 1.0 / probs[a];
            Ok(row)
        }
        Policy::Softmax(_) => Ok(softmax_score(probs, a)),
        Policy::Rule(p) => Err(Error::UnsupportedParameterization(format!("rule policy '{}' has no gradient", p.name))),
    }
}

pub fn softmax_score(probs: &[f64], a: usize) -> Vec<f64> {
    let mut row: Vec<f64> = probs.iter().map(|p| -p).collect();
    row[a] += 1.0;
    row
}

pub fn score(policies: &PolicySet, agent: usize, h: &IndividualHistory, a: usize) -> Result<ScoreVector> {
    let policy = policies
        .agent(agent)
        .ok_or_else(|| Error::UnsupportedParameterization("centralized policy has no per-agent score".into()))?;
    Ok(ScoreVector { agent, history: h.clone(), row: policy.score_row(agent, h, a)? })
}

/// Fully centralized softmax over joint actions, conditioned on the joint history.
#[derive(Debug, Clone)]
pub struct JointSoftmax {
    pub n_joint_actions: usize,
    pub logits: HashMap<JointHistory, Vec<f64>>,
}

impl JointSoftmax {
    pub fn uniform(n_joint_actions: usize) -> Self {
        Self { n_joint_actions, logits: HashMap::new() }
    }

    pub fn logits_of(&self, h: &JointHistory) -> Vec<f64> {
        self.logits.get(h).cloned().unwrap_or_else(|| vec![0.0; self.n_joint_actions])
    }

    pub fn probs(&self, h: &JointHistory) -> Vec<f64> {
        softmax(&self.logits_of(h))
    }
}

#[derive(Debug, Clone)]
pub enum PolicySet {
    Decentralized(Vec<Policy>),
    Centralized(JointSoftmax),
}

impl PolicySet {
    pub fn agent(&self, i: usize) -> Option<&Policy> {
        match self {
            PolicySet::Decentralized(ps) => ps.get(i),
            PolicySet::Centralized(_) => None,
        }
    }

    pub fn is_centralized(&self) -> bool {
        matches!(self, PolicySet::Centralized(_))
    }

    pub fn is_differentiable(&self) -> bool {
        match self {
            PolicySet::Decentralized(ps) => ps.iter().all(Policy::is_differentiable),
            PolicySet::Centralized(_) => true,
        }
    }

    /// Sparse joint action distribution `[(a⃗, π⃗(a⃗; h⃗))]` with zero-probability actions dropped.
    pub fn joint_distribution_of(&self, space: &JointSpace, h: &JointHistory) -> Result<Vec<(usize, f64)>> {
        match self {
            PolicySet::Centralized(p) => {
                Ok(p.probs(h).into_iter().enumerate().filter(|&(_, q)| q > 0.0).collect())
            }
            PolicySet::Decentralized(ps) => {
                let rows = ps
                    .iter()
                    .enumerate()
                    .map(|(i, p)| p.probs(i, &h.agents[i]))
                    .collect::<Result<Vec<_>>>()?;
                Ok(product_distribution(space, &rows))
            }
        }
    }

    pub fn joint_distribution(&self, arena: &HistoryArena, node: usize) -> Result<Vec<(usize, f64)>> {
        match self {
            PolicySet::Centralized(p) => {
                let h = arena.joint_history(node);
                Ok(p.probs(&h).into_iter().enumerate().filter(|&(_, q)| q > 0.0).collect())
            }
            PolicySet::Decentralized(ps) => {
                let rows = ps
                    .iter()
                    .enumerate()
                    .map(|(i, p)| p.probs(i, arena.individual(i, arena.members(node)[i])))
                    .collect::<Result<Vec<_>>>()?;
                Ok(product_distribution(arena.action_space(), &rows))
            }
        }
    }

    /// Joint distribution of all agents except `skip`, as `[(partial a⃗ with agent skip set to 0, prob)]`.
    pub fn others_distribution(&self, arena: &HistoryArena, node: usize, skip: usize) -> Result<Vec<(usize, f64)>> {
        let ps = match self {
            PolicySet::Decentralized(ps) => ps,
            PolicySet::Centralized(_) => {
                return Err(Error::UnsupportedParameterization("centralized policy does not factorize".into()))
            }
        };
        let space = arena.action_space();
        let rows = ps
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if i == skip {
                    let mut r = vec![0.0; space.size(i)];
                    r[0] = 1.0;
                    Ok(r)
                } else {
                    p.probs(i, arena.individual(i, arena.members(node)[i]))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(product_distribution(space, &rows))
    }
}

pub fn product_distribution(space: &JointSpace, rows: &[Vec<f64>]) -> Vec<(usize, f64)> {
    let mut out = vec![(0usize, 1.0f64)];
    for (i, row) in rows.iter().enumerate() {
        let mut next = Vec::with_capacity(out.len() * row.len());
        for &(idx, p) in &out {
            for (a, &q) in row.iter().enumerate() {
                if q > 0.0 {
                    next.push((idx + a * space_stride(space, i), p * q));
                }
            }
        }
        out = next;
    }
    out.sort_by_key(|&(i, _)| i);
    out
}

fn space_stride(space: &JointSpace, agent: usize) -> usize {
    space.sizes()[agent + 1..].iter().product()
}

/// `π⃗(a⃗; h⃗) = Π_i π_i(a_i; h_i)` (or the centralized joint probability).
pub fn joint_policy_prob(policies: &PolicySet, space: &JointSpace, h: &JointHistory, a: &[usize]) -> Result<f64> {
    let idx = space.encode(a);
    match policies {
        PolicySet::Centralized(p) => Ok(p.probs(h)[idx]),
        PolicySet::Decentralized(ps) => {
            let mut prob = 1.0;
            for (i, p) in ps.iter().enumerate() {
                prob *= p.probs(i, &h.agents[i])?[a[i]];
            }
            Ok(prob)
        }
    }
}
