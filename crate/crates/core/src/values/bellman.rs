//! Generic system `Q = P0·R + γ·P1·Q` and its exact solver.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

/// Sparse rows of `P0` (n×m) and `P1` (n×n).
///
/// Rows may be substochastic; missing mass stands for termination.
#[derive(Debug, Clone)]
pub struct BellmanSystem {
    pub p0: Vec<Vec<(usize, f64)>>,
    pub reward: Vec<f64>,
    pub p1: Vec<Vec<(usize, f64)>>,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    BackSubstitution,
    LinearSolve,
}

#[derive(Debug, Clone)]
pub struct BellmanSolution {
    pub q: Vec<f64>,
    pub method: SolveMethod,
    /// `‖Q − P0·R − γ·P1·Q‖∞`.
    pub residual: f64,
}

impl BellmanSystem {
    pub fn len(&self) -> usize {
        self.p1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p1.is_empty()
    }

    pub fn immediate(&self) -> Vec<f64> {
        self.p0.iter().map(|row| row.iter().map(|&(j, p)| p * self.reward[j]).sum()).collect()
    }

    /// One application of the Bellman operator `B(Q) = P0·R + γ·P1·Q`.
    pub fn apply(&self, q: &[f64]) -> Vec<f64> {
        let r = self.immediate();
        self.p1
            .iter()
            .zip(r)
            .map(|(row, ri)| ri + self.gamma * row.iter().map(|&(j, p)| p * q[j]).sum::<f64>())
            .collect()
    }

    pub fn residual(&self, q: &[f64]) -> f64 {
        self.apply(q).iter().zip(q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidArgument(format!("discount {} outside [0, 1]", self.gamma)));
        }
        if self.p0.len() != self.p1.len() {
            return Err(Error::InvalidArgument("P0 and P1 row counts differ".into()));
        }
        let n = self.p1.len();
        let m = self.reward.len();
        for (row0, row1) in self.p0.iter().zip(&self.p1) {
            if row0.iter().any(|&(j, p)| j >= m || p < 0.0) || row1.iter().any(|&(j, p)| j >= n || p < 0.0) {
                return Err(Error::InvalidArgument("matrix entry out of range or negative".into()));
            }
        }
        Ok(())
    }

    /// Topological order (successors first) if the `P1` graph is acyclic.
    fn reverse_topological(&self) -> Option<Vec<usize>> {
        let n = self.len();
        let mut indegree = vec![0usize; n];
        for row in &self.p1 {
            for &(j, p) in row {
                if p > 0.0 {
                    indegree[j] += 1;
                }
            }
        }
        let mut stack: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = stack.pop() {
            order.push(i);
            for &(j, p) in &self.p1[i] {
                if p > 0.0 {
                    indegree[j] -= 1;
                    if indegree[j] == 0 {
                        stack.push(j);
                    }
                }
            }
        }
        (order.len() == n).then(|| {
            order.reverse();
            order
        })
    }

    /// Rows from which no leaking (row sum < 1) row is reachable; these make `I − P1` singular at `γ = 1`.
    fn closed_rows(&self) -> Vec<usize> {
        let n = self.len();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut leaks = Vec::new();
        for (i, row) in self.p1.iter().enumerate() {
            let mut sum = 0.0;
            for &(j, p) in row {
                if p > 0.0 {
                    preds[j].push(i);
                    sum += p;
                }
            }
            if sum < 1.0 - 1e-12 {
                leaks.push(i);
            }
        }
        let mut open = vec![false; n];
        let mut stack = leaks;
        for &i in &stack {
            open[i] = true;
        }
        while let Some(i) = stack.pop() {
            for &k in &preds[i] {
                if !open[k] {
                    open[k] = true;
                    stack.push(k);
                }
            }
        }
        (0..n).filter(|&i| !open[i]).collect()
    }
}

/// Unique fixed point of the system: back-substitution when `P1` is acyclic, dense LU otherwise.
pub fn solve_generic(sys: &BellmanSystem) -> Result<BellmanSolution> {
    sys.check()?;
    let n = sys.len();
    let r = sys.immediate();
    if sys.gamma == 0.0 {
        return Ok(BellmanSolution { residual: 0.0, q: r, method: SolveMethod::BackSubstitution });
    }
    if let Some(order) = sys.reverse_topological() {
        let mut q = vec![0.0; n];
        for i in order {
            q[i] = r[i] + sys.gamma * sys.p1[i].iter().map(|&(j, p)| p * q[j]).sum::<f64>();
        }
        let residual = sys.residual(&q);
        return Ok(BellmanSolution { q, method: SolveMethod::BackSubstitution, residual });
    }
    if sys.gamma >= 1.0 {
        let closed = sys.closed_rows();
        if !closed.is_empty() {
            return Err(Error::NoUniqueSolution(format!(
                "{} rows never reach termination at discount 1 (first: {})",
                closed.len(),
                closed[0]
            )));
        }
    }
    let mut a = DMatrix::<f64>::identity(n, n);
    for (i, row) in sys.p1.iter().enumerate() {
        for &(j, p) in row {
            a[(i, j)] -= sys.gamma * p;
        }
    }
    let b = DVector::from_vec(r);
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NoUniqueSolution("I - γ·P1 is singular".into()))?;
    let q: Vec<f64> = x.iter().copied().collect();
    let residual = sys.residual(&q);
    Ok(BellmanSolution { q, method: SolveMethod::LinearSolve, residual })
}

/// Plain fixed-point iteration from `Q = 0`; kept as a test oracle.
pub fn value_iteration(sys: &BellmanSystem, iterations: usize) -> Vec<f64> {
    let mut q = vec![0.0; sys.len()];
    for _ in 0..iterations {
        q = sys.apply(&q);
    }
    q
}

/// Dense random system with stochastic rows.
pub fn random_system<R: Rng>(rng: &mut R, n: usize, m: usize, gamma: f64) -> BellmanSystem {
    let row = |rng: &mut R, k: usize| -> Vec<(usize, f64)> {
        let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().enumerate().map(|(j, x)| (j, x / z)).collect()
    };
    BellmanSystem {
        p0: (0..n).map(|_| row(rng, m)).collect(),
        reward: (0..m).map(|_| rng.gen_range(-10.0..10.0)).collect(),
        p1: (0..n).map(|_| row(rng, n)).collect(),
        gamma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity(n: usize) -> Vec<Vec<(usize, f64)>> {
        (0..n).map(|i| vec![(i, 1.0)]).collect()
    }

    #[test]
    fn zero_discount_is_immediate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut sys = random_system(&mut rng, 4, 3, 0.0);
        sys.gamma = 0.0;
        let sol = solve_generic(&sys).unwrap();
        assert_eq!(sol.q, sys.immediate());
    }

    #[test]
    fn absorbing_chain() {
        let sys = BellmanSystem {
            p0: identity(2),
            reward: vec![1.0, 0.0],
            p1: vec![vec![(1, 1.0)], vec![(1, 1.0)]],
            gamma: 0.5,
        };
        let sol = solve_generic(&sys).unwrap();
        let vi = value_iteration(&sys, 50);
        for i in 0..2 {
            assert!((sol.q[i] - vi[i]).abs() < 1e-12);
        }
        assert!((sol.q[0] - 1.0).abs() < 1e-12 && sol.q[1].abs() < 1e-12);
    }

    #[test]
    fn random_system_matches_value_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sys = random_system(&mut rng, 5, 5, 0.9);
        let sol = solve_generic(&sys).unwrap();
        assert_eq!(sol.method, SolveMethod::LinearSolve);
        let vi = value_iteration(&sys, 2000);
        for (a, b) in sol.q.iter().zip(&vi) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(sol.residual <= 1e-10 * 10.0);
    }

    #[test]
    fn undiscounted_closed_loop_has_no_solution() {
        let sys = BellmanSystem { p0: identity(2), reward: vec![1.0, 1.0], p1: vec![vec![(1, 1.0)], vec![(0, 1.0)]], gamma: 1.0 };
        assert!(matches!(solve_generic(&sys), Err(Error::NoUniqueSolution(_))));
    }

    #[test]
    fn undiscounted_leaking_loop_is_solved() {
        let sys = BellmanSystem { p0: identity(1), reward: vec![-2.0], p1: vec![vec![(0, 2.0 / 3.0)]], gamma: 1.0 };
        let sol = solve_generic(&sys).unwrap();
        assert!((sol.q[0] + 6.0).abs() < 1e-12);
    }

    #[test]
    fn acyclic_uses_back_substitution() {
        let sys = BellmanSystem {
            p0: identity(3),
            reward: vec![1.0, 2.0, 3.0],
            p1: vec![vec![(1, 0.5), (2, 0.5)], vec![(2, 1.0)], vec![]],
            gamma: 1.0,
        };
        let sol = solve_generic(&sys).unwrap();
        assert_eq!(sol.method, SolveMethod::BackSubstitution);
        assert_eq!(sol.q, vec![1.0 + 0.5 * 5.0 + 0.5 * 3.0, 5.0, 3.0]);
    }
}
