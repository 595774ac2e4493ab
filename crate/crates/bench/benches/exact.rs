use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use critic_lab::actor_critic::{default_config, train};
use critic_lab::domains;
use critic_lab::gradients::{analyze, Variant};
use critic_lab::values::{q_history_state, q_individual_all, q_joint_history};
use critic_lab::visitation::{compute_visitations, VisitationConfig};

fn visitation(c: &mut Criterion) {
    let mut g = c.benchmark_group("visitation");
    for horizon in [2, 3, 4] {
        let b = domains::dec_tiger_with(1.0, horizon);
        let pol = domains::random_policies(&b.model, 0);
        g.bench_with_input(BenchmarkId::new("dec_tiger", horizon), &horizon, |bench, _| {
            bench.iter(|| compute_visitations(black_box(&b.model), &pol, &VisitationConfig::default()).unwrap())
        });
    }
    g.finish();
}

fn critics(c: &mut Criterion) {
    let b = domains::dec_tiger_with(1.0, 3);
    let pol = domains::random_policies(&b.model, 0);
    let vis = compute_visitations(&b.model, &pol, &VisitationConfig::default()).unwrap();
    let mut g = c.benchmark_group("critics");
    g.bench_function("joint_history", |bench| bench.iter(|| q_joint_history(&b.model, &pol, &vis).unwrap()));
    g.bench_function("history_state", |bench| bench.iter(|| q_history_state(&b.model, &pol, &vis).unwrap()));
    g.bench_function("individual", |bench| bench.iter(|| q_individual_all(&b.model, &pol, &vis).unwrap()));
    g.finish();
}

fn gradients(c: &mut Criterion) {
    let b = domains::dec_tiger_with(1.0, 3);
    let pol = domains::random_policies(&b.model, 0);
    let vis = compute_visitations(&b.model, &pol, &VisitationConfig::default()).unwrap();
    let mut g = c.benchmark_group("gradient_moments");
    for v in Variant::DECENTRALIZED {
        g.bench_function(v.as_str(), |bench| bench.iter(|| analyze(v, &b.model, &pol, &vis).unwrap()));
    }
    g.finish();
}

fn training(c: &mut Criterion) {
    let b = domains::climb_game();
    let d = default_config(b.name).unwrap();
    c.bench_function("train/climb_iac", |bench| bench.iter(|| train(&b.model, &d.to_train_config(Variant::Iac, 0)).unwrap()));
}

criterion_group!(benches, visitation, critics, gradients, training);
criterion_main!(benches);
