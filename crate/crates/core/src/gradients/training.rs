//! Exact-gradient ascent and single-episode stochastic ascent with exact critics.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actor_critic::sample_episode;
use crate::error::{Error, Result};
use crate::model::policy::{score_from_probs, softmax_score};
use crate::model::{DecPomdp, IndividualHistory, JointHistory, Policy, PolicySet};
use crate::visitation::{compute_visitations, Visitation, VisitationConfig};

use super::{build_critic, critic_value, expected_gradient, Convention, Critic, Draw, GradientStats, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepSchedule {
    Constant { lr: f64 },
    /// `lr / sqrt(k + 1)`.
    InverseSqrt { lr: f64 },
}

impl StepSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Constant { lr } => lr,
            StepSchedule::InverseSqrt { lr } => lr / ((k + 1) as f64).sqrt(),
        }
    }
}

/// Parameter row addressed by history.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RowKey {
    Individual(usize, IndividualHistory),
    Joint(JointHistory),
}

/// Adds `step · g` to each addressed row; tabular rows are projected back onto the simplex.
pub fn apply_rows(policies: &mut PolicySet, rows: &HashMap<RowKey, Vec<f64>>, step: f64) -> Result<()> {
    for (key, g) in rows {
        match (key, &mut *policies) {
            (RowKey::Joint(h), PolicySet::Centralized(p)) => {
                let n = p.n_joint_actions;
                let row = p.logits.entry(h.clone()).or_insert_with(|| vec![0.0; n]);
                row.iter_mut().zip(g).for_each(|(x, d)| *x += step * d);
            }
            (RowKey::Individual(i, h), PolicySet::Decentralized(ps)) => match &mut ps[*i] {
                Policy::Softmax(p) => {
                    let n = p.n_actions;
                    let row = p.logits.entry(h.clone()).or_insert_with(|| vec![0.0; n]);
                    row.iter_mut().zip(g).for_each(|(x, d)| *x += step * d);
                }
                Policy::Tabular(p) => {
                    let base = p
                        .row(h)
                        .cloned()
                        .ok_or_else(|| Error::MissingPolicyEntry { agent: *i, history: format!("{h:?}") })?;
                    let moved: Vec<f64> = base.iter().zip(g).map(|(x, d)| x + step * d).collect();
                    p.rows.insert(h.clone(), project_simplex(&moved));
                }
                Policy::Rule(r) => {
                    return Err(Error::UnsupportedParameterization(format!("rule policy '{}' cannot be updated", r.name)))
                }
            },
            _ => return Err(Error::UnsupportedParameterization("gradient row does not match policy kind".into())),
        }
    }
    Ok(())
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn stats_rows(vis: &Visitation, stats: &[GradientStats], centralized: bool) -> HashMap<RowKey, Vec<f64>> {
    let mut rows: HashMap<RowKey, Vec<f64>> = HashMap::new();
    for g in stats {
        for (k, &(row, a)) in g.dims.entries.iter().enumerate() {
            let key = if centralized {
                RowKey::Joint(vis.arena.joint_history(row))
            } else {
                RowKey::Individual(g.agent, vis.arena.individual(g.agent, row).clone())
            };
            let entry = rows.entry(key).or_default();
            if entry.len() <= a {
                entry.resize(a + 1, 0.0);
            }
            entry[a] += g.mean[k];
        }
    }
    rows
}

/// Applies exact gradient statistics as one synchronous update of all agents.
pub fn apply_gradient(policies: &mut PolicySet, vis: &Visitation, stats: &[GradientStats], step: f64) -> Result<()> {
    let rows = stats_rows(vis, stats, policies.is_centralized());
    apply_rows(policies, &rows, step)
}

/// Action distributions at the root histories: one row per agent and initial observation, or the joint row.
pub fn root_probabilities(model: &DecPomdp, policies: &PolicySet) -> Result<Vec<Vec<f64>>> {
    let n = model.n_agents();
    let roots: Vec<Option<usize>> = match &model.initial_observation {
        Some(_) => (0..model.n_joint_observations()).map(Some).collect(),
        None => vec![None],
    };
    match policies {
        PolicySet::Centralized(p) => Ok(roots
            .iter()
            .map(|o| {
                p.probs(&JointHistory {
                    agents: (0..n).map(|i| IndividualHistory::rooted(o.map(|o| model.observations.component(o, i)))).collect(),
                })
            })
            .collect()),
        PolicySet::Decentralized(ps) => {
            let mut out = Vec::new();
            for (i, p) in ps.iter().enumerate() {
                let firsts: Vec<Option<usize>> = match &model.initial_observation {
                    Some(_) => (0..model.observations.size(i)).map(Some).collect(),
                    None => vec![None],
                };
                for f in firsts {
                    out.push(p.probs(i, &IndividualHistory::rooted(f))?);
                }
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GdConfig {
    pub variant: Variant,
    pub schedule: StepSchedule,
    pub iterations: usize,
    /// Ascent on `J` when true; the descent form flips the sign of every update.
    pub ascent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateRecord {
    pub iterate: usize,
    pub j: f64,
    pub grad_norm: f64,
    pub root_probs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub records: Vec<IterateRecord>,
    pub policies: PolicySet,
}

fn check_finite(norm: f64, iterate: usize) -> Result<()> {
    if norm.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { iterate })
    }
}

/// Synchronous gradient ascent with exact expected gradients; one record per iterate plus the final one.
pub fn gd_train(model: &DecPomdp, init: &PolicySet, cfg: &GdConfig, vcfg: &VisitationConfig) -> Result<TrainingRun> {
    let mut policies = init.clone();
    let sign = if cfg.ascent { 1.0 } else { -1.0 };
    let mut records = Vec::with_capacity(cfg.iterations + 1);
    for k in 0..=cfg.iterations {
        let vis = compute_visitations(model, &policies, vcfg)?;
        let root_probs = root_probabilities(model, &policies)?;
        if k == cfg.iterations {
            records.push(IterateRecord { iterate: k, j: vis.expected_return, grad_norm: f64::NAN, root_probs });
            break;
        }
        let critic = build_critic(cfg.variant, model, &policies, &vis)?;
        let stats = expected_gradient(cfg.variant, model, &policies, &critic, &vis, Convention::Unit)?;
        let norm = stats.iter().flat_map(|g| g.mean.iter()).map(|x| x * x).sum::<f64>().sqrt();
        check_finite(norm, k)?;
        records.push(IterateRecord { iterate: k, j: vis.expected_return, grad_norm: norm, root_probs });
        apply_gradient(&mut policies, &vis, &stats, sign * cfg.schedule.at(k))?;
    }
    Ok(TrainingRun { records, policies })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SgdConfig {
    pub variant: Variant,
    pub schedule: StepSchedule,
    pub iterations: usize,
    pub seed: u64,
    pub ascent: bool,
    /// Critic recomputed every this many iterates; 1 is exact. Larger values are a non-theoretical stale-critic mode.
    pub critic_refresh: usize,
    pub max_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SgdRecord {
    pub iterate: usize,
    pub j: f64,
    pub grad_norm: f64,
    /// Critic value multiplying each agent's first-step score.
    pub used_values: Vec<f64>,
    pub root_probs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SgdRun {
    pub records: Vec<SgdRecord>,
    pub policies: PolicySet,
}

/// Stochastic ascent: each iterate samples one on-policy episode and applies `Σ_t γ^t Q(key_t)·∇log π`.
pub fn sgd_train(model: &DecPomdp, init: &PolicySet, cfg: &SgdConfig, vcfg: &VisitationConfig) -> Result<SgdRun> {
    let mut policies = init.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sign = if cfg.ascent { 1.0 } else { -1.0 };
    let refresh = cfg.critic_refresh.max(1);
    let gamma = model.discount;
    let centralized = policies.is_centralized();
    let n_streams = if centralized { 1 } else { model.n_agents() };
    let mut critic: Option<(Critic, Visitation)> = None;
    let mut records = Vec::with_capacity(cfg.iterations);
    for k in 0..cfg.iterations {
        let vis = compute_visitations(model, &policies, vcfg)?;
        if k % refresh == 0 || critic.is_none() {
            critic = Some((build_critic(cfg.variant, model, &policies, &vis)?, vis.clone()));
        }
        let (crit, cvis) = critic.as_ref().unwrap();
        let episode = sample_episode(model, &policies, &mut rng, cfg.max_len)?;
        let mut rows: HashMap<RowKey, Vec<f64>> = HashMap::new();
        let mut used = vec![f64::NAN; n_streams];
        let mut w = 1.0;
        for (t, step) in episode.steps.iter().enumerate() {
            let node = cvis.find(&step.history);
            for agent in 0..n_streams {
                let q = match node {
                    Some(h) => critic_value(cfg.variant, crit, cvis, agent, &Draw { history: h, state: step.state, action: step.action, weight: 0.0 }),
                    None => Err(Error::Unreachable(format!("episode history at step {t}"))),
                };
                let q = match q {
                    Ok(q) => q,
                    Err(_) if refresh > 1 => 0.0,
                    Err(e) => return Err(e),
                };
                if t == 0 {
                    used[agent] = q;
                }
                let (key, score) = match &policies {
                    PolicySet::Centralized(p) => (RowKey::Joint(step.history.clone()), softmax_score(&p.probs(&step.history), step.action)),
                    PolicySet::Decentralized(ps) => {
                        let h = &step.history.agents[agent];
                        let probs = ps[agent].probs(agent, h)?;
                        let s = score_from_probs(&ps[agent], &probs, model.actions.component(step.action, agent))?;
                        (RowKey::Individual(agent, h.clone()), s)
                    }
                };
                let row = rows.entry(key).or_insert_with(|| vec![0.0; score.len()]);
                row.iter_mut().zip(&score).for_each(|(x, s)| *x += w * q * s);
            }
            w *= gamma;
        }
        let norm = rows.values().flatten().map(|x| x * x).sum::<f64>().sqrt();
        check_finite(norm, k)?;
        records.push(SgdRecord {
            iterate: k,
            j: vis.expected_return,
            grad_norm: norm,
            used_values: used,
            root_probs: root_probabilities(model, &policies)?,
        });
        apply_rows(&mut policies, &rows, sign * cfg.schedule.at(k))?;
    }
    Ok(SgdRun { records, policies })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains;

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.5, 0.6, -0.2]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(p[2], 0.0);
        assert!((p[1] - p[0] - 0.1).abs() < 1e-12);
        assert_eq!(project_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
    }

    #[test]
    fn zero_step_keeps_policy() {
        let b = domains::climb_game();
        let init = domains::uniform_softmax(&b.model);
        let cfg = GdConfig { variant: Variant::Iac, schedule: StepSchedule::Constant { lr: 0.0 }, iterations: 5, ascent: true };
        let run = gd_train(&b.model, &init, &cfg, &VisitationConfig::default()).unwrap();
        let j0 = run.records[0].j;
        assert!(run.records.iter().all(|r| r.j == j0));
    }

    #[test]
    fn sgd_is_deterministic() {
        let b = domains::morning_game();
        let init = domains::uniform_softmax(&b.model);
        let cfg = SgdConfig {
            variant: Variant::IaccH,
            schedule: StepSchedule::Constant { lr: 0.1 },
            iterations: 50,
            seed: 9,
            ascent: true,
            critic_refresh: 1,
            max_len: 5,
        };
        let a = sgd_train(&b.model, &init, &cfg, &VisitationConfig::default()).unwrap();
        let c = sgd_train(&b.model, &init, &cfg, &VisitationConfig::default()).unwrap();
        assert_eq!(a.records, c.records);
    }
}
