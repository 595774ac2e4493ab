use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use critic_lab::domains::{self, RandomModelSpec};
use critic_lab::gradients::{analyze, Variant};
use critic_lab::model::policy::{softmax, softmax_score};
use critic_lab::values::{q_joint_history, random_system};
use critic_lab::visitation::{compute_visitations, VisitationConfig};
use critic_lab::{IndividualHistory, JointHistory, PolicySet};

fn setup(seed: u64) -> (critic_lab::DecPomdp, PolicySet) {
    let m = domains::random_model(seed, &RandomModelSpec::default());
    let p = domains::random_policies(&m, seed);
    (m, p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn softmax_score_has_zero_mean(logits in prop::collection::vec(-5.0f64..5.0, 2..6)) {
        let p = softmax(&logits);
        let n = p.len();
        let mut mean = vec![0.0; n];
        for a in 0..n {
            for (m, s) in mean.iter_mut().zip(softmax_score(&p, a)) {
                *m += p[a] * s;
            }
        }
        prop_assert!(mean.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn joint_policy_factorizes(seed in 0u64..1000) {
        let (m, pol) = setup(seed);
        let vis = compute_visitations(&m, &pol, &VisitationConfig::default()).unwrap();
        let PolicySet::Decentralized(ps) = &pol else { unreachable!() };
        for h in 0..vis.n_histories().min(50) {
            let jh: JointHistory = vis.arena.joint_history(h);
            let rows: Vec<Vec<f64>> = jh.agents.iter().enumerate().map(|(i, hi)| ps[i].probs(i, hi).unwrap()).collect();
            for &(a, p) in &vis.policy[h] {
                let parts = m.actions.decode(a);
                let product: f64 = parts.iter().enumerate().map(|(i, &ai)| rows[i][ai]).product();
                prop_assert!((p - product).abs() < 1e-12);
            }
            let total: f64 = vis.policy[h].iter().map(|x| x.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn terminal_states_absorb(seed in 0u64..1000) {
        let (m, pol) = setup(seed);
        let vis = compute_visitations(&m, &pol, &VisitationConfig::default()).unwrap();
        for s in (0..m.n_states()).filter(|&s| m.terminal[s]) {
            prop_assert_eq!(vis.state[s], 0.0);
            prop_assert!(vis.state_action[s].iter().all(|&x| x == 0.0));
        }
        prop_assert!(vis.history_state.iter().flatten().all(|&(s, _)| !m.terminal[s]));
    }

    #[test]
    fn visitation_marginals_agree(seed in 0u64..1000) {
        let (m, pol) = setup(seed);
        let vis = compute_visitations(&m, &pol, &VisitationConfig::default()).unwrap();
        let tol = 1e-9 * vis.z.max(1.0);
        prop_assert!((vis.state.iter().sum::<f64>() - vis.z).abs() < tol);
        prop_assert!((vis.state_action.iter().flatten().sum::<f64>() - vis.z).abs() < tol);
        for h in 0..vis.n_histories() {
            let from_states: f64 = vis.history_state[h].iter().map(|x| x.1).sum();
            prop_assert!((vis.history[h] - from_states).abs() < 1e-12);
        }
        let ret: f64 = (0..m.n_states())
            .flat_map(|s| (0..m.n_joint_actions()).map(move |a| (s, a)))
            .map(|(s, a)| vis.state_action[s][a] * m.reward[s][a])
            .sum();
        prop_assert!((ret - vis.expected_return).abs() < 1e-9 * ret.abs().max(1.0));
    }

    #[test]
    fn history_value_recovers_return(seed in 0u64..1000) {
        let (m, pol) = setup(seed);
        let vis = compute_visitations(&m, &pol, &VisitationConfig::default()).unwrap();
        let q = q_joint_history(&m, &pol, &vis).unwrap();
        let mut j = 0.0;
        for h in (0..vis.n_histories()).filter(|&h| vis.arena.node(h).depth == 0) {
            for &(a, p) in &vis.policy[h] {
                j += vis.history[h] * p * q.get(h, a).unwrap();
            }
        }
        prop_assert!((j - vis.expected_return).abs() < 1e-9 * j.abs().max(1.0));
    }

    #[test]
    fn centralized_history_critic_is_unbiased(seed in 0u64..1000) {
        let (m, pol) = setup(seed);
        let vis = compute_visitations(&m, &pol, &VisitationConfig::default()).unwrap();
        let gi = analyze(Variant::Iac, &m, &pol, &vis).unwrap();
        let gh = analyze(Variant::IaccH, &m, &pol, &vis).unwrap();
        for (x, y) in gi.iter().zip(&gh) {
            for (p, q) in x.mean.iter().zip(&y.mean) {
                prop_assert!((p - q).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn bellman_operator_contracts(seed in 0u64..10_000, gamma in 0.0f64..1.0, n in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_system(&mut rng, n, 3, gamma);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 7.3 + seed as f64).sin() * 50.0).collect();
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 1.9 - seed as f64).cos() * 50.0).collect();
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(dist(&sys.apply(&x), &sys.apply(&y)) <= gamma * dist(&x, &y) + 1e-9);
    }

    #[test]
    fn individual_history_extension_is_prefix_preserving(steps in prop::collection::vec((0usize..3, 0usize..3), 0..6)) {
        let mut h = IndividualHistory::empty();
        for &(a, o) in &steps {
            let next = h.extended(a, o);
            prop_assert_eq!(next.len(), h.len() + 1);
            prop_assert_eq!(&next.steps[..h.len()], &h.steps[..]);
            h = next;
        }
        prop_assert_eq!(h.actions().collect::<Vec<_>>(), steps.iter().map(|x| x.0).collect::<Vec<_>>());
    }
}
