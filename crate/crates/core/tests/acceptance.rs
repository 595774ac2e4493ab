use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use critic_lab::actor_critic::{default_config, train, LearningCurve};
use critic_lab::domains::{self, DOMAIN_NAMES};
use critic_lab::export::sig6;
use critic_lab::gradients::{analyze, finite_difference_gradient, Variant};
use critic_lab::suites::{self, Check, Suite, Target};
use critic_lab::values::{random_system, solve_generic, value_iteration};
use critic_lab::visitation::{compute_visitations, VisitationConfig};
use critic_lab::{DecPomdp, PolicySet};

struct Outcome {
    passed: bool,
    detail: String,
}

fn from_checks(checks: &[Check]) -> Outcome {
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.passed()).collect();
    let detail = if failed.is_empty() {
        format!("{} checks", checks.len())
    } else {
        let lines: Vec<String> = failed.iter().map(|c| format!("{}: computed {} vs {}", c.name, sig6(c.computed), sig6(c.expected))).collect();
        format!("{}/{} checks failed [{}]", failed.len(), checks.len(), lines.join("; "))
    };
    Outcome { passed: !checks.is_empty() && failed.is_empty(), detail }
}

fn suite(s: Suite, domain: &str) -> Vec<Check> {
    suites::run(s, &Target::by_name(domain).unwrap()).unwrap()
}

fn named(checks: Vec<Check>, keys: &[&str]) -> Vec<Check> {
    checks.into_iter().filter(|c| keys.iter().any(|k| c.name.contains(k))).collect()
}

fn dec_tiger_tables() -> Outcome {
    from_checks(&suite(Suite::DectigerTables, "dec_tiger"))
}

fn biased_dimensions() -> Outcome {
    from_checks(&named(suite(Suite::Theorems, "dec_tiger"), &["(h1, open-right)", "| h1, open-right]"]))
}

fn climb_values() -> Outcome {
    let mut checks = named(suite(Suite::Values, "climb_game"), &["Q_1(u", "Q_2(u"]);
    checks.extend(named(suite(Suite::Theorems, "climb_game"), &["IACC-H coefficient"]));
    from_checks(&checks)
}

fn variance_witnesses() -> Outcome {
    let mut checks = named(suite(Suite::Values, "morning_game"), &["Q_1(cereal)", "Q_1(pickles)"]);
    checks.extend(named(suite(Suite::Theorems, "guess_game"), &["Var[Q"]));
    checks.extend(named(suite(Suite::Theorems, "beverage"), &["Var_s|ε"]));
    from_checks(&checks)
}

fn theorem_suites() -> Outcome {
    let start = Instant::now();
    let mut targets: Vec<Target> = DOMAIN_NAMES.iter().map(|n| Target::by_name(n).unwrap()).collect();
    targets.push(Target::Random(suites::RANDOM_MODELS));
    let mut checks = Vec::new();
    for t in &targets {
        checks.extend(named(
            suites::run(Suite::Theorems, t).unwrap(),
            &["‖E[ĝ_h] − E[ĝ_i]‖", "‖E[ĝ_hs] − E[ĝ_h]‖", "tr Cov", "witness"],
        ));
        checks.extend(named(suites::run(Suite::Values, t).unwrap(), &["Q_i(h_i,a_i) = E[Q(h,a)", "Q(h,a) = E_s|h"]));
    }
    let secs = start.elapsed().as_secs_f64();
    checks.push(Check {
        suite: Suite::Theorems,
        target: "all".into(),
        name: "runtime (s)".into(),
        relation: suites::Relation::AtMost,
        computed: secs,
        expected: 60.0,
        tolerance: 0.0,
    });
    from_checks(&checks)
}

fn fd_error(model: &DecPomdp, pol: &PolicySet) -> f64 {
    let cfg = VisitationConfig::default();
    let vis = compute_visitations(model, pol, &cfg).unwrap();
    let mut worst: f64 = 0.0;
    for (agent, g) in analyze(Variant::Iac, model, pol, &vis).unwrap().iter().enumerate() {
        let fd = finite_difference_gradient(model, pol, &vis, agent, 1e-5, &cfg).unwrap();
        let scale = g.mean.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let err = fd.iter().zip(&g.mean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(err / scale);
    }
    worst
}

fn finite_differences() -> Outcome {
    let climb = domains::climb_game();
    let tiger = domains::dec_tiger_with(1.0, 3);
    let errs = [
        fd_error(&climb.model, &domains::random_policies(&climb.model, 0)),
        fd_error(&climb.model, &domains::uniform_softmax(&climb.model)),
        fd_error(&tiger.model, &domains::random_policies(&tiger.model, 0)),
        fd_error(&tiger.model, &domains::random_policies(&tiger.model, 2)),
    ];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Outcome { passed: worst <= 1e-5, detail: format!("max relative error {} (tol 1e-5)", sig6(worst)) }
}

fn counterexample() -> Outcome {
    from_checks(&suite(Suite::Counterexample, "oscillating_chain"))
}

fn bellman_fixed_point() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut gap, mut violations): (f64, usize) = (0.0, 0);
    for _ in 0..20 {
        let n = rng.gen_range(2..12);
        let m = rng.gen_range(1..8);
        let gamma = rng.gen_range(0.05..0.95);
        let sys = random_system(&mut rng, n, m, gamma);
        let exact = solve_generic(&sys).unwrap().q;
        let iterated = value_iteration(&sys, 10_000);
        gap = gap.max(exact.iter().zip(&iterated).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        for _ in 0..50 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            if d(&sys.apply(&x), &sys.apply(&y)) > gamma * d(&x, &y) + 1e-9 {
                violations += 1;
            }
        }
    }
    Outcome {
        passed: gap <= 1e-8 && violations == 0,
        detail: format!("max |linear − iterated| {} (tol 1e-8), contraction violations {violations}", sig6(gap)),
    }
}

const SEEDS: u64 = 50;

fn curves(domain: &str, variant: Variant) -> Vec<LearningCurve> {
    let b = domains::by_name(domain).unwrap();
    let d = default_config(b.name).unwrap();
    (0..SEEDS).map(|s| train(&b.model, &d.to_train_config(variant, s)).unwrap()).collect()
}

fn argmax(row: &[f64]) -> usize {
    row.iter().enumerate().fold(0, |best, (i, &p)| if p > row[best] { i } else { best })
}

fn training_behaviour() -> Outcome {
    let mut parts = Vec::new();
    let mut passed = true;
    for variant in [Variant::Iac, Variant::IaccH] {
        let cs = curves("climb", variant);
        let mean = cs.iter().map(|c| c.final_point().greedy).sum::<f64>() / cs.len() as f64;
        let mut counts = std::collections::BTreeMap::new();
        for c in &cs {
            let p = &c.final_point().root_probs;
            *counts.entry((argmax(&p[0]), argmax(&p[1]))).or_insert(0usize) += 1;
        }
        let (&modal, &n) = counts.iter().max_by_key(|x| *x.1).unwrap();
        let ok = (4.5..=5.5).contains(&mean) && modal == (2, 2);
        passed &= ok;
        parts.push(format!(
            "climb {variant}: mean final return {} (want [4.5, 5.5]), modal ⟨u{},u{}⟩ in {n}/{SEEDS} (want ⟨u3,u3⟩)",
            sig6(mean),
            modal.0 + 1,
            modal.1 + 1
        ));
    }
    let jac = curves("climb", Variant::Jac).iter().filter(|c| (c.final_point().greedy - 11.0).abs() < 1e-9).count();
    passed &= jac >= 45;
    parts.push(format!("climb jac: return 11 in {jac}/{SEEDS} (want ≥ 45)"));
    for variant in Variant::DECENTRALIZED {
        let cs = curves("guess", variant);
        let mean = cs.iter().map(|c| c.final_point().greedy).sum::<f64>() / cs.len() as f64;
        passed &= mean.abs() <= 1.0;
        parts.push(format!("guess {variant}: mean final return {} (want |·| ≤ 1)", sig6(mean)));
    }
    Outcome { passed, detail: parts.join("; ") }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("dec-tiger probability and value tables", dec_tiger_tables),
        ("biased state-gradient dimensions", biased_dimensions),
        ("climb exact values and coefficients", climb_values),
        ("morning/guess/beverage variance witnesses", variance_witnesses),
        ("theorem suites on bundled and random models", theorem_suites),
        ("finite-difference gradient oracle", finite_differences),
        ("visitation candidate counter-example", counterexample),
        ("bellman fixed point and contraction", bellman_fixed_point),
        ("training behaviour over 50 seeds", training_behaviour),
    ];
    let mut failures = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let o = f();
        if !o.passed {
            failures += 1;
        }
        println!("{} {name} ({:.1}s): {}", if o.passed { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64(), o.detail);
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
