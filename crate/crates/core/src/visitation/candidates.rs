use super::{compute_visitations, enumerate, VisitationConfig};
use crate::error::Result;
use crate::model::{DecPomdp, PolicySet};

pub const CONVERGENCE_TOL: f64 = 1e-8;

/// Prefix sequences of the three candidate state-conditioned action distributions for one `(s, a⃗)`.
#[derive(Debug, Clone)]
pub struct CandidateSeries {
    pub state: usize,
    pub joint_action: usize,
    /// `Pr(A⃗_t = a⃗ | S_t = s)` for `t = 0..n_cap`.
    pub limit: Vec<Option<f64>>,
    /// Cesàro averages over the first `N = 1..=n_cap` timesteps.
    pub total: Vec<Option<f64>>,
    /// Discount-weighted averages over the first `N = 1..=n_cap` timesteps.
    pub discounted_prefix: Vec<Option<f64>>,
    /// `ρ(a⃗ | s)` from the truncated visitation table.
    pub discounted: Option<f64>,
    pub limit_converged: bool,
    pub total_converged: bool,
    pub discounted_converged: bool,
}

#[derive(Debug, Clone)]
pub struct CandidateTables {
    pub n_cap: usize,
    pub gamma: f64,
    pub series: Vec<CandidateSeries>,
}

impl CandidateTables {
    pub fn get(&self, state: usize, joint_action: usize) -> Option<&CandidateSeries> {
        self.series.iter().find(|c| c.state == state && c.joint_action == joint_action)
    }
}

/// Converged when every successive difference over the last quarter of the prefix is below tolerance.
pub fn tail_converged(seq: &[Option<f64>]) -> bool {
    let vals: Vec<f64> = seq.iter().flatten().copied().collect();
    if vals.len() < 2 {
        return false;
    }
    let window = (vals.len() / 4).max(2).min(vals.len());
    vals[vals.len() - window..].windows(2).all(|w| (w[1] - w[0]).abs() < CONVERGENCE_TOL)
}

pub fn candidate_action_distributions(
    model: &DecPomdp,
    policies: &PolicySet,
    n_cap: usize,
    node_budget: usize,
) -> Result<CandidateTables> {
    let timed = enumerate(model, policies, n_cap, node_budget)?;
    let dv = compute_visitations(model, policies, &VisitationConfig { node_budget, ..Default::default() })?;
    let ns = model.n_states();
    let na = model.n_joint_actions();
    let gamma = model.discount;
    let steps = timed.state_marginals.len();
    let mut series = Vec::new();
    for s in 0..ns {
        if timed.state_marginals.iter().all(|m| m[s] <= 0.0) {
            continue;
        }
        for a in 0..na {
            let mut limit = Vec::with_capacity(steps);
            let mut total = Vec::with_capacity(steps);
            let mut disc = Vec::with_capacity(steps);
            let (mut num, mut den, mut dnum, mut dden, mut w) = (0.0, 0.0, 0.0, 0.0, 1.0);
            for t in 0..steps {
                let ps = timed.state_marginals[t][s];
                let psa = timed.state_action_marginals[t][s][a];
                limit.push((ps > 0.0).then(|| psa / ps));
                num += psa;
                den += ps;
                dnum += w * psa;
                dden += w * ps;
                w *= gamma;
                total.push((den > 0.0).then(|| num / den));
                disc.push((dden > 0.0).then(|| dnum / dden));
            }
            let discounted = dv.action_given_state(s).map(|row| row[a]);
            series.push(CandidateSeries {
                state: s,
                joint_action: a,
                limit_converged: tail_converged(&limit),
                total_converged: tail_converged(&total),
                discounted_converged: discounted.is_some(),
                limit,
                total,
                discounted_prefix: disc,
                discounted,
            });
        }
    }
    Ok(CandidateTables { n_cap, gamma, series })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains;
    use crate::model::{Policy, TabularPolicy};

    #[test]
    fn stationary_chain_candidates_agree() {
        let b = domains::oscillating_chain();
        let pol = PolicySet::Decentralized(vec![
            Policy::Tabular(TabularPolicy { n_actions: 2, rows: Default::default(), default: Some(vec![0.0, 1.0]) }),
            Policy::Tabular(TabularPolicy { n_actions: 2, rows: Default::default(), default: Some(vec![1.0, 0.0]) }),
        ]);
        let c = candidate_action_distributions(&b.model, &pol, 64, 100_000).unwrap();
        let mixed = b.model.actions.encode(&[1, 0]);
        let s = c.get(0, mixed).unwrap();
        let expected = 1.0;
        assert!(s.limit_converged && s.total_converged && s.discounted_converged);
        assert!((s.limit.last().unwrap().unwrap() - expected).abs() < 1e-12);
        assert!((s.total.last().unwrap().unwrap() - expected).abs() < 1e-12);
        assert!((s.discounted.unwrap() - expected).abs() < 1e-12);
    }
}
