//! Brute-force enumeration of complete trajectories; an oracle independent of the `(h⃗, s)` tables.

use crate::error::{Error, Result};
use crate::model::{DecPomdp, IndividualHistory, JointHistory, PolicySet};

#[derive(Debug, Clone)]
pub struct TrajectoryStep {
    pub state: usize,
    /// Joint history the agents acted on.
    pub history: JointHistory,
    pub action: usize,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub prob: f64,
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let mut w = 1.0;
        let mut total = 0.0;
        for st in &self.steps {
            total += w * st.reward;
            w *= gamma;
        }
        total
    }
}

/// Every positive-probability trajectory of at most `max_len` decisions.
pub fn trajectories(model: &DecPomdp, policies: &PolicySet, max_len: usize, budget: usize) -> Result<Vec<Trajectory>> {
    let n = model.n_agents();
    let mut out = Vec::new();
    for s in 0..model.n_states() {
        let p0 = model.start[s];
        if p0 <= 0.0 || model.terminal[s] {
            continue;
        }
        let roots: Vec<(Option<usize>, f64)> = match &model.initial_observation {
            Some(rows) => rows[s].iter().map(|&(o, q)| (Some(o), q)).collect(),
            None => vec![(None, 1.0)],
        };
        for (o, q) in roots {
            if q <= 0.0 {
                continue;
            }
            let h = JointHistory {
                agents: (0..n)
                    .map(|i| IndividualHistory::rooted(o.map(|o| model.observations.component(o, i))))
                    .collect(),
            };
            walk(model, policies, max_len, budget, s, h, p0 * q, Vec::new(), &mut out)?;
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn walk(
    model: &DecPomdp,
    policies: &PolicySet,
    max_len: usize,
    budget: usize,
    s: usize,
    h: JointHistory,
    prob: f64,
    steps: Vec<TrajectoryStep>,
    out: &mut Vec<Trajectory>,
) -> Result<()> {
    if out.len() > budget {
        return Err(Error::BudgetExceeded { depth: steps.len(), budget });
    }
    for (a, pa) in policies.joint_distribution_of(&model.actions, &h)? {
        let mut here = steps.clone();
        here.push(TrajectoryStep { state: s, history: h.clone(), action: a, reward: model.reward[s][a] });
        let m = prob * pa;
        let mut ended = 0.0;
        if here.len() >= max_len {
            out.push(Trajectory { prob: m, steps: here });
            continue;
        }
        for &(sn, pt) in &model.transition[s][a] {
            if pt <= 0.0 {
                continue;
            }
            if model.terminal[sn] {
                ended += pt;
                continue;
            }
            for &(o, po) in &model.observation[a][sn] {
                if po <= 0.0 {
                    continue;
                }
                let mut next = h.clone();
                for (i, hi) in next.agents.iter_mut().enumerate() {
                    *hi = hi.extended(model.actions.component(a, i), model.observations.component(o, i));
                }
                walk(model, policies, max_len, budget, sn, next, m * pt * po, here.clone(), out)?;
            }
        }
        if ended > 0.0 {
            out.push(Trajectory { prob: m * ended, steps: here });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains;
    use crate::visitation::{compute_visitations, VisitationConfig};

    #[test]
    fn dec_tiger_return_matches_visitation() {
        let b = domains::dec_tiger();
        let pol = b.reference_policies.unwrap();
        let trajs = trajectories(&b.model, &pol, 25, 100_000).unwrap();
        let total: f64 = trajs.iter().map(|t| t.prob).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(trajs.iter().all(|t| t.steps.len() == 3));
        let j: f64 = trajs.iter().map(|t| t.prob * t.discounted_return(1.0)).sum();
        let vis = compute_visitations(&b.model, &pol, &VisitationConfig::default()).unwrap();
        assert!((j - vis.expected_return).abs() < 1e-12);
        assert!((j + 16.175).abs() < 1e-9);
    }
}
