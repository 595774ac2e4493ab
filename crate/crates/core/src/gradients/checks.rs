use std::collections::HashMap;

use crate::domains::random::individual_histories;
use crate::error::{Error, Result};
use crate::model::{DecPomdp, IndividualHistory, Policy, PolicySet, TabularPolicy};
use crate::visitation::{compute_visitations, trajectories, Visitation, VisitationConfig};

use super::{agent_dimensions, joint_dimensions};

pub const FD_STEP: f64 = 1e-5;

/// `J = Σ_{s,a⃗} η(s, a⃗)·R(s, a⃗)`.
pub fn exact_return(model: &DecPomdp, policies: &PolicySet, config: &VisitationConfig) -> Result<f64> {
    Ok(compute_visitations(model, policies, config)?.expected_return)
}

fn perturbed(policies: &PolicySet, vis: &Visitation, agent: usize, row: usize, action: usize, delta: f64) -> Result<PolicySet> {
    let mut out = policies.clone();
    match &mut out {
        PolicySet::Centralized(p) => {
            let h = vis.arena.joint_history(row);
            let n = p.n_joint_actions;
            p.logits.entry(h).or_insert_with(|| vec![0.0; n])[action] += delta;
        }
        PolicySet::Decentralized(ps) => {
            let h = vis.arena.individual(agent, row).clone();
            match &mut ps[agent] {
                Policy::Softmax(p) => {
                    let n = p.n_actions;
                    p.logits.entry(h).or_insert_with(|| vec![0.0; n])[action] += delta;
                }
                Policy::Tabular(p) => {
                    let base = p.row(&h).cloned().ok_or_else(|| Error::MissingPolicyEntry { agent, history: format!("{h:?}") })?;
                    p.rows.entry(h).or_insert(base)[action] += delta;
                }
                Policy::Rule(r) => {
                    return Err(Error::UnsupportedParameterization(format!("rule policy '{}' has no parameters", r.name)))
                }
            }
        }
    }
    Ok(out)
}

/// Central differences of exact `J` over every parameter coordinate of `agent` (aligned with the gradient dimensions).
pub fn finite_difference_gradient(
    model: &DecPomdp,
    policies: &PolicySet,
    vis: &Visitation,
    agent: usize,
    step: f64,
    config: &VisitationConfig,
) -> Result<Vec<f64>> {
    let dims = if policies.is_centralized() { joint_dimensions(model, vis) } else { agent_dimensions(model, vis, agent) };
    dims.entries
        .iter()
        .map(|&(row, a)| {
            let up = exact_return(model, &perturbed(policies, vis, agent, row, a, step)?, config)?;
            let down = exact_return(model, &perturbed(policies, vis, agent, row, a, -step)?, config)?;
            Ok((up - down) / (2.0 * step))
        })
        .collect()
}

/// Tabular copy of `policies` on every individual history of length at most `max_len`.
pub fn tabularize(model: &DecPomdp, policies: &PolicySet, max_len: usize) -> Result<PolicySet> {
    let ps = match policies {
        PolicySet::Decentralized(ps) => ps,
        PolicySet::Centralized(_) => return Err(Error::UnsupportedParameterization("cannot tabularize a joint policy".into())),
    };
    let mut out = Vec::with_capacity(ps.len());
    for (i, p) in ps.iter().enumerate() {
        let mut rows: HashMap<IndividualHistory, Vec<f64>> = HashMap::new();
        for h in individual_histories(model, i, max_len + 1) {
            let row = p.probs(i, &h)?;
            rows.insert(h, row);
        }
        out.push(Policy::Tabular(TabularPolicy { n_actions: p.n_actions(), rows, default: None }));
    }
    Ok(PolicySet::Decentralized(out))
}

/// Largest `|E[∇log π_i(a_k; h_k)·R(s_t, a⃗_t)]|` over agents, coordinates, and `t < k`, by trajectory enumeration.
pub fn score_reward_lemma(model: &DecPomdp, policies: &PolicySet, max_len: usize) -> Result<f64> {
    let ps = match policies {
        PolicySet::Decentralized(ps) => ps,
        PolicySet::Centralized(_) => return Err(Error::UnsupportedParameterization("lemma is stated per agent".into())),
    };
    let mut sums: HashMap<(usize, usize, IndividualHistory, usize), f64> = HashMap::new();
    for tr in trajectories(model, policies, max_len, 5_000_000)? {
        for (k, step) in tr.steps.iter().enumerate() {
            for (i, p) in ps.iter().enumerate() {
                let h = &step.history.agents[i];
                let ai = model.actions.component(step.action, i);
                let row = p.score_row(i, h, ai)?;
                for t in 0..k {
                    let r = tr.steps[t].reward;
                    for (a, sc) in row.iter().enumerate() {
                        *sums.entry((i, t, h.clone(), a)).or_insert(0.0) += tr.prob * sc * r;
                    }
                }
            }
        }
    }
    Ok(sums.values().fold(0.0, |m, v| m.max(v.abs())))
}
