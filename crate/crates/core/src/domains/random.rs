//! Seeded random Dec-POMDPs and policies for property suites.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{DecPomdp, IndividualHistory, ModelBuilder, Policy, PolicySet, SoftmaxPolicy, TabularPolicy};

#[derive(Debug, Clone, Copy)]
pub struct RandomModelSpec {
    pub agents: usize,
    pub max_states: usize,
    pub max_actions: usize,
    pub max_observations: usize,
    pub max_horizon: usize,
    /// Upper bound on the number of joint histories the full tree may contain.
    pub history_budget: usize,
}

impl Default for RandomModelSpec {
    fn default() -> Self {
        Self { agents: 2, max_states: 4, max_actions: 3, max_observations: 3, max_horizon: 4, history_budget: 6000 }
    }
}

fn random_row(rng: &mut ChaCha8Rng, n: usize, sparsity: f64) -> Vec<f64> {
    let mut row: Vec<f64> = (0..n).map(|_| if rng.gen_bool(sparsity) { 0.0 } else { rng.gen_range(0.05..1.0) }).collect();
    if row.iter().all(|&x| x == 0.0) {
        row[rng.gen_range(0..n)] = 1.0;
    }
    let z: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= z);
    row
}

fn tree_size(branching: usize, horizon: usize, roots: usize) -> usize {
    let mut total = 0usize;
    let mut layer = roots;
    for _ in 0..horizon {
        total = total.saturating_add(layer);
        layer = layer.saturating_mul(branching);
    }
    total
}

/// Draws a model within `spec`; the last state is terminal and horizons keep the history tree within budget.
pub fn random_model(seed: u64, spec: &RandomModelSpec) -> DecPomdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = rng.gen_range(1..=spec.max_states);
    let acts: Vec<usize> = (0..spec.agents).map(|_| rng.gen_range(2..=spec.max_actions)).collect();
    let obs: Vec<usize> = (0..spec.agents).map(|_| rng.gen_range(1..=spec.max_observations)).collect();
    let na: usize = acts.iter().product();
    let no: usize = obs.iter().product();
    let with_initial = rng.gen_bool(0.5);
    let roots = if with_initial { no } else { 1 };
    let mut horizon = rng.gen_range(1..=spec.max_horizon);
    while horizon > 1 && tree_size(na * no, horizon, roots) > spec.history_budget {
        horizon -= 1;
    }
    let discount = [0.5, 0.9, 0.95, 1.0][rng.gen_range(0..4)];

    let mut states: Vec<String> = (0..ns).map(|i| format!("s{i}")).collect();
    states.push("end".into());
    let actions = acts.iter().enumerate().map(|(i, &n)| (0..n).map(|a| format!("a{i}{a}")).collect()).collect();
    let observations = obs.iter().enumerate().map(|(i, &n)| (0..n).map(|o| format!("o{i}{o}")).collect()).collect();
    let mut b = ModelBuilder::new(states, actions, observations);
    let mut start = random_row(&mut rng, ns, 0.3);
    start.push(0.0);
    b.start(start).terminal(ns).default_observation(0).discount(discount).horizon(Some(horizon));
    let term_p = rng.gen_range(0.0..0.4);
    for s in 0..ns {
        for a in 0..na {
            let row = random_row(&mut rng, ns, 0.4);
            let stop = if rng.gen_bool(0.5) { term_p } else { 0.0 };
            for (n, p) in row.into_iter().enumerate() {
                if p > 0.0 {
                    b.transition(s, a, n, p * (1.0 - stop));
                }
            }
            if stop > 0.0 {
                b.transition(s, a, ns, stop);
            }
            b.reward(s, a, rng.gen_range(-10i32..=10) as f64);
        }
    }
    for a in 0..na {
        for n in 0..ns {
            for (o, p) in random_row(&mut rng, no, 0.3).into_iter().enumerate() {
                if p > 0.0 {
                    b.observation(a, n, o, p);
                }
            }
        }
    }
    if with_initial {
        for s in 0..ns {
            for (o, p) in random_row(&mut rng, no, 0.3).into_iter().enumerate() {
                if p > 0.0 {
                    b.initial_observation(s, o, p);
                }
            }
        }
    }
    b.build()
}

/// All individual histories of `agent` shorter than `horizon`.
pub fn individual_histories(model: &DecPomdp, agent: usize, horizon: usize) -> Vec<IndividualHistory> {
    let firsts: Vec<Option<usize>> = match &model.initial_observation {
        Some(_) => (0..model.observations.size(agent)).map(Some).collect(),
        None => vec![None],
    };
    let mut layer: Vec<IndividualHistory> = firsts.into_iter().map(IndividualHistory::rooted).collect();
    let mut out = Vec::new();
    for _ in 0..horizon {
        let mut next = Vec::new();
        for h in &layer {
            for a in 0..model.actions.size(agent) {
                for o in 0..model.observations.size(agent) {
                    next.push(h.extended(a, o));
                }
            }
        }
        out.append(&mut layer);
        layer = next;
    }
    out
}

/// Random full-support policies on every history up to the model horizon.
///
/// Even seeds give softmax policies with Gaussian-ish logits, odd seeds tabular ones.
pub fn random_policies(model: &DecPomdp, seed: u64) -> PolicySet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let horizon = model.horizon.unwrap_or(3);
    let tabular = seed % 2 == 1;
    let mut out = Vec::new();
    for i in 0..model.n_agents() {
        let n = model.actions.size(i);
        let mut rows = HashMap::new();
        for h in individual_histories(model, i, horizon) {
            let row: Vec<f64> = if tabular {
                random_row(&mut rng, n, 0.0)
            } else {
                (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
            };
            rows.insert(h, row);
        }
        out.push(if tabular {
            Policy::Tabular(TabularPolicy { n_actions: n, rows, default: None })
        } else {
            Policy::Softmax(SoftmaxPolicy { n_actions: n, logits: rows })
        });
    }
    PolicySet::Decentralized(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_models_validate_and_respect_limits() {
        let spec = RandomModelSpec::default();
        for seed in 0..50 {
            let m = random_model(seed, &spec);
            assert!(m.validate().is_valid(), "seed {seed}: {}", m.validate());
            assert!(m.n_states() <= spec.max_states + 1);
            assert!(m.horizon.unwrap() <= spec.max_horizon);
            for i in 0..2 {
                assert!(m.actions.size(i) <= spec.max_actions);
                assert!(m.observations.size(i) <= spec.max_observations);
            }
        }
    }

    #[test]
    fn same_seed_same_model() {
        let spec = RandomModelSpec::default();
        assert_eq!(random_model(7, &spec).to_json(), random_model(7, &spec).to_json());
    }
}
