use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use critic_lab::values::bellman::{random_system, solve_generic, value_iteration, SolveMethod};

#[test]
fn linear_solve_matches_value_iteration_on_random_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 0..20 {
        let n = rng.gen_range(2..12);
        let m = rng.gen_range(1..8);
        let gamma = rng.gen_range(0.05..0.95);
        let sys = random_system(&mut rng, n, m, gamma);
        let exact = solve_generic(&sys).unwrap();
        assert_eq!(exact.method, SolveMethod::LinearSolve);
        let iterated = value_iteration(&sys, 10_000);
        let gap = exact.q.iter().zip(&iterated).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap <= 1e-8, "system {k}: gap {gap}");
        assert!(exact.residual <= 1e-9);
    }
}

#[test]
fn bellman_operator_is_a_gamma_contraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let n = rng.gen_range(2..10);
        let gamma = rng.gen_range(0.0..1.0);
        let sys = random_system(&mut rng, n, 3, gamma);
        for _ in 0..50 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            let lhs = dist(&sys.apply(&x), &sys.apply(&y));
            assert!(lhs <= gamma * dist(&x, &y) + 1e-9);
        }
    }
}
