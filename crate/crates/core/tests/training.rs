use critic_lab::actor_critic::initial_policies;
use critic_lab::domains;
use critic_lab::gradients::{gd_train, sgd_train, GdConfig, SgdConfig, StepSchedule, Variant};
use critic_lab::visitation::VisitationConfig;

const CEREAL: usize = 1;

fn morning_sgd(variant: Variant, seed: u64) -> critic_lab::gradients::SgdRun {
    let b = domains::morning_game();
    let cfg = SgdConfig {
        variant,
        schedule: StepSchedule::Constant { lr: 0.1 },
        iterations: 500,
        seed,
        ascent: true,
        critic_refresh: 1,
        max_len: 1,
    };
    sgd_train(&b.model, &domains::uniform_softmax(&b.model), &cfg, &VisitationConfig::default()).unwrap()
}

#[test]
fn morning_iac_moves_towards_cereal() {
    let run = morning_sgd(Variant::Iac, 0);
    let first = run.records.first().unwrap().root_probs[0][CEREAL];
    let last = run.records.last().unwrap().root_probs[0][CEREAL];
    assert_eq!(first, 0.5);
    assert!(last > 0.9, "π₁(cereal) = {last}");
}

#[test]
fn morning_expected_cereal_probability_rises() {
    let runs: Vec<_> = (0..40).map(|s| morning_sgd(Variant::Iac, s)).collect();
    let mean_at = |k: usize| runs.iter().map(|r| r.records[k].root_probs[0][CEREAL]).sum::<f64>() / runs.len() as f64;
    let checkpoints: Vec<f64> = [0, 25, 50, 100, 200, 499].into_iter().map(mean_at).collect();
    assert!(checkpoints.windows(2).all(|w| w[1] > w[0]), "{checkpoints:?}");
}

#[test]
fn joint_history_critic_values_disperse_more() {
    let dispersion = |variant: Variant| {
        let runs: Vec<_> = (0..40).map(|s| morning_sgd(variant, s)).collect();
        let iterations = runs[0].records.len();
        let per_iterate: Vec<f64> = (0..iterations)
            .map(|k| {
                let xs: Vec<f64> = runs.iter().map(|r| r.records[k].used_values[0]).collect();
                let m = xs.iter().sum::<f64>() / xs.len() as f64;
                (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
            })
            .collect();
        per_iterate.iter().sum::<f64>() / iterations as f64
    };
    let (iac, iacc_h) = (dispersion(Variant::Iac), dispersion(Variant::IaccH));
    assert!(iacc_h > iac, "IACC-H {iacc_h} vs IAC {iac}");
}

#[test]
fn climb_exact_ascent_reaches_a_pure_equilibrium() {
    let b = domains::climb_game();
    for variant in [Variant::Iac, Variant::IaccH] {
        let cfg = GdConfig { variant, schedule: StepSchedule::Constant { lr: 0.5 }, iterations: 400, ascent: true };
        let run = gd_train(&b.model, &initial_policies(&b.model, variant), &cfg, &VisitationConfig::default()).unwrap();
        let last = run.records.last().unwrap();
        assert!((last.j - 6.0).abs() < 0.05, "{variant}: J = {}", last.j);
        assert!(last.root_probs[0][2] > 0.99 && last.root_probs[1][1] > 0.99, "{:?}", last.root_probs);
        assert!(run.records.windows(2).all(|w| w[1].j >= w[0].j - 1e-9));
    }
}

#[test]
fn climb_joint_ascent_finds_the_optimum() {
    let b = domains::climb_game();
    let cfg = GdConfig { variant: Variant::Jac, schedule: StepSchedule::Constant { lr: 0.5 }, iterations: 400, ascent: true };
    let run = gd_train(&b.model, &initial_policies(&b.model, Variant::Jac), &cfg, &VisitationConfig::default()).unwrap();
    assert!((run.records.last().unwrap().j - 11.0).abs() < 0.05);
}

#[test]
fn iac_and_history_critic_ascent_coincide_on_climb() {
    let b = domains::climb_game();
    let run = |variant| {
        let cfg = GdConfig { variant, schedule: StepSchedule::Constant { lr: 0.3 }, iterations: 50, ascent: true };
        gd_train(&b.model, &initial_policies(&b.model, variant), &cfg, &VisitationConfig::default()).unwrap()
    };
    let (a, h) = (run(Variant::Iac), run(Variant::IaccH));
    for (x, y) in a.records.iter().zip(&h.records) {
        assert!((x.j - y.j).abs() < 1e-9);
    }
}
