//! Bundled toy domains and their reference policies.

pub mod random;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{
    DecPomdp, IndividualHistory, JointHistory, ModelBuilder, Policy, PolicySet, RulePolicy, SoftmaxPolicy, TabularPolicy,
};

pub use random::{random_model, random_policies, RandomModelSpec};

#[derive(Debug, Clone)]
pub struct DomainBundle {
    pub name: &'static str,
    pub model: DecPomdp,
    pub reference_policies: Option<PolicySet>,
    pub notes: &'static str,
}

pub const DOMAIN_NAMES: [&str; 7] =
    ["climb_game", "morning_game", "guess_game", "dec_tiger", "beverage", "oscillating_chain", "observable_climb"];

/// Looks a bundle up by name; a few short aliases are accepted.
pub fn by_name(name: &str) -> Result<DomainBundle> {
    match name {
        "climb_game" | "climb" => Ok(climb_game()),
        "morning_game" | "morning" => Ok(morning_game()),
        "guess_game" | "guess" => Ok(guess_game()),
        "dec_tiger" | "dectiger" | "tiger" => Ok(dec_tiger()),
        "beverage" => Ok(beverage()),
        "oscillating_chain" | "oscillating" => Ok(oscillating_chain()),
        "observable_climb" => Ok(observable_climb()),
        other => Err(Error::InvalidArgument(format!("unknown domain '{other}'"))),
    }
}

pub fn all() -> Vec<DomainBundle> {
    DOMAIN_NAMES.iter().map(|n| by_name(n).expect("bundled name")).collect()
}

fn names(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Climb Game payoff indexed `[agent 2 action][agent 1 action]`.
pub const CLIMB_PAYOFF: [[f64; 3]; 3] = [[11.0, -30.0, 0.0], [-30.0, 7.0, 6.0], [0.0, 0.0, 5.0]];

/// Morning Game payoff indexed `[agent 1 action][agent 2 action]`.
pub const MORNING_PAYOFF: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 3.0]];

/// One-shot cooperative game: decide at t=0, absorb at t=1.
fn matrix_game(actions: Vec<Vec<String>>, payoff: impl Fn(&[usize]) -> f64) -> DecPomdp {
    let agents = actions.len();
    let mut b = ModelBuilder::new(names(&["play", "end"]), actions, vec![names(&["none"]); agents]);
    b.start(vec![1.0, 0.0]).terminal(1).default_observation(0).discount(0.0).horizon(Some(1));
    for a in 0..b.actions().len() {
        let parts = b.actions().decode(a);
        b.transition(0, a, 1, 1.0).reward(0, a, payoff(&parts));
    }
    b.build()
}

fn uniform_tabular(model: &DecPomdp) -> PolicySet {
    PolicySet::Decentralized(
        (0..model.n_agents()).map(|i| Policy::Tabular(TabularPolicy::uniform(model.actions.size(i)))).collect(),
    )
}

pub fn uniform_softmax(model: &DecPomdp) -> PolicySet {
    PolicySet::Decentralized(
        (0..model.n_agents()).map(|i| Policy::Softmax(SoftmaxPolicy::uniform(model.actions.size(i)))).collect(),
    )
}

pub fn climb_game() -> DomainBundle {
    let model = matrix_game(vec![names(&["u1", "u2", "u3"]); 2], |a| CLIMB_PAYOFF[a[1]][a[0]]);
    DomainBundle {
        name: "climb_game",
        reference_policies: Some(uniform_tabular(&model)),
        model,
        notes: "Climb Game payoff matrix; agent 1 picks the column, agent 2 the row; uniform reference policies",
    }
}

pub fn morning_game() -> DomainBundle {
    let model = matrix_game(vec![names(&["pickles", "cereal"]), names(&["vodka", "milk"])], |a| MORNING_PAYOFF[a[0]][a[1]]);
    DomainBundle {
        name: "morning_game",
        reference_policies: Some(uniform_tabular(&model)),
        model,
        notes: "Morning Game: (pickles, vodka) = 1, (cereal, milk) = 3; uniform reference policies",
    }
}

pub fn guess_game() -> DomainBundle {
    let states = names(&["00", "01", "10", "11", "end"]);
    let bits = names(&["0", "1"]);
    let mut b = ModelBuilder::new(states, vec![bits.clone(); 2], vec![bits.clone(); 2]);
    b.start(vec![0.25, 0.25, 0.25, 0.25, 0.0]).terminal(4).default_observation(0).discount(0.0).horizon(Some(1));
    for s in 0..4 {
        let (b1, b2) = (s >> 1, s & 1);
        let o = b.observations().encode(&[b1, b2]);
        b.initial_observation(s, o, 1.0);
        for a in 0..4 {
            let parts = b.actions().decode(a);
            let m1 = parts[0] == b2;
            let m2 = parts[1] == b1;
            let r = match (m1, m2) {
                (true, true) => 10.0,
                (false, false) => -10.0,
                _ => 0.0,
            };
            b.transition(s, a, 4, 1.0).reward(s, a, r);
        }
    }
    let model = b.build();
    DomainBundle {
        name: "guess_game",
        reference_policies: Some(uniform_tabular(&model)),
        model,
        notes: "Guess Game: private fair bits, each agent guesses the other's bit; +10 both right, -10 both wrong",
    }
}

pub const TIGER_LEFT: usize = 0;
pub const TIGER_RIGHT: usize = 1;
pub const LISTEN: usize = 0;
pub const OPEN_LEFT: usize = 1;
pub const OPEN_RIGHT: usize = 2;
pub const HEAR_LEFT: usize = 0;
pub const HEAR_RIGHT: usize = 1;

fn tiger_reward(tiger: usize, a1: usize, a2: usize) -> f64 {
    let tiger_door = if tiger == TIGER_LEFT { OPEN_LEFT } else { OPEN_RIGHT };
    match (a1, a2) {
        (LISTEN, LISTEN) => -2.0,
        (LISTEN, x) | (x, LISTEN) => {
            if x == tiger_door {
                -101.0
            } else {
                9.0
            }
        }
        (x, y) if x == y => {
            if x == tiger_door {
                -50.0
            } else {
                20.0
            }
        }
        _ => -100.0,
    }
}

/// Dec-Tiger at `γ = 1` with a 25-step episode cap.
pub fn dec_tiger() -> DomainBundle {
    dec_tiger_with(1.0, 25)
}

/// Dec-Tiger with explicit discount and episode cap.
pub fn dec_tiger_with(discount: f64, horizon: usize) -> DomainBundle {
    let mut b = ModelBuilder::new(
        names(&["tiger-left", "tiger-right", "done"]),
        vec![names(&["listen", "open-left", "open-right"]); 2],
        vec![names(&["hear-left", "hear-right"]); 2],
    );
    b.start(vec![0.5, 0.5, 0.0]).terminal(2).default_observation(0).discount(discount).horizon(Some(horizon));
    let listen2 = b.actions().encode(&[LISTEN, LISTEN]);
    for s in [TIGER_LEFT, TIGER_RIGHT] {
        for a in 0..9 {
            let parts = b.actions().decode(a);
            b.reward(s, a, tiger_reward(s, parts[0], parts[1]));
            if a == listen2 {
                b.transition(s, a, s, 1.0);
            } else {
                b.transition(s, a, 2, 1.0);
            }
        }
        let correct = if s == TIGER_LEFT { HEAR_LEFT } else { HEAR_RIGHT };
        for o1 in 0..2 {
            for o2 in 0..2 {
                let p1 = if o1 == correct { 0.85 } else { 0.15 };
                let p2 = if o2 == correct { 0.85 } else { 0.15 };
                let o = b.observations().encode(&[o1, o2]);
                b.observation(listen2, s, o, p1 * p2);
            }
        }
    }
    let model = b.build();
    let reference = PolicySet::Decentralized(vec![Policy::Rule(tiger_reference_rule()); 2]);
    DomainBundle {
        name: "dec_tiger",
        model,
        reference_policies: Some(reference),
        notes: "Dec-Tiger, hearing accuracy 0.85; reference policy listens twice then opens opposite the majority side",
    }
}

/// Joint history of repeated joint listening, one comma-separated pair of `L`/`R` hearings per step
/// (`"LL,RL"`: agent 1 heard left twice; agent 2 heard left, then right).
pub fn tiger_history(spec: &str) -> Result<JointHistory> {
    let steps: Vec<Vec<char>> = spec.split(',').map(|p| p.chars().collect()).collect();
    let hear = |c: char| match c {
        'L' => Ok(HEAR_LEFT),
        'R' => Ok(HEAR_RIGHT),
        other => Err(Error::InvalidArgument(format!("hearing must be L or R, got '{other}'"))),
    };
    let mut agents = vec![IndividualHistory::empty(); 2];
    for step in &steps {
        if step.len() != 2 {
            return Err(Error::InvalidArgument(format!("expected two hearings per step in '{spec}'")));
        }
        for (i, h) in agents.iter_mut().enumerate() {
            *h = h.extended(LISTEN, hear(step[i])?);
        }
    }
    Ok(JointHistory { agents })
}

/// Listen while fewer than two steps were taken, then open the door opposite the
/// majority-heard side; uniform over both doors on a tie.
pub fn tiger_reference_rule() -> RulePolicy {
    RulePolicy {
        name: "listen-twice-then-open".into(),
        n_actions: 3,
        rule: Arc::new(|h: &IndividualHistory| {
            if h.len() < 2 {
                return vec![1.0, 0.0, 0.0];
            }
            let left = h.steps.iter().filter(|&&(a, o)| a == LISTEN && o == HEAR_LEFT).count();
            let right = h.steps.iter().filter(|&&(a, o)| a == LISTEN && o == HEAR_RIGHT).count();
            match left.cmp(&right) {
                std::cmp::Ordering::Greater => vec![0.0, 0.0, 1.0],
                std::cmp::Ordering::Less => vec![0.0, 1.0, 0.0],
                std::cmp::Ordering::Equal => vec![0.0, 0.5, 0.5],
            }
        }),
    }
}

pub fn beverage() -> DomainBundle {
    let mut b = ModelBuilder::new(names(&["coffee", "tea", "end"]), vec![names(&["coffee", "tea"])], vec![names(&["none"])]);
    b.start(vec![0.5, 0.5, 0.0]).terminal(2).default_observation(0).discount(0.0).horizon(Some(1));
    for s in 0..2 {
        for a in 0..2 {
            b.transition(s, a, 2, 1.0).reward(s, a, if s == a { 1.0 } else { -1.0 });
        }
    }
    let model = b.build();
    DomainBundle {
        name: "beverage",
        reference_policies: Some(uniform_tabular(&model)),
        model,
        notes: "Barista serving coffee or tea without observing the order; +1 right, -1 wrong",
    }
}

/// Action at timestep `t` of the doubling-block sequence `0,1,0,1,0,0,1,1,0⁴,1⁴,…`.
pub fn oscillating_action(t: usize) -> usize {
    if t < 2 {
        return t;
    }
    let k = usize::BITS - 1 - t.leading_zeros();
    let base = 1usize << k;
    usize::from(t >= base + base / 2)
}

pub fn oscillating_chain() -> DomainBundle {
    let bits = names(&["0", "1"]);
    let mut b = ModelBuilder::new(names(&["zeta"]), vec![bits.clone(); 2], vec![names(&["omega"]); 2]);
    b.start(vec![1.0]).default_observation(0).discount(0.9).horizon(None);
    for a in 0..4 {
        b.transition(0, a, 0, 1.0);
    }
    let both = b.actions().encode(&[1, 1]);
    b.reward(0, both, 1.0);
    let model = b.build();
    let rule = RulePolicy {
        name: "doubling-blocks".into(),
        n_actions: 2,
        rule: Arc::new(|h: &IndividualHistory| {
            let mut p = vec![0.0, 0.0];
            p[oscillating_action(h.len())] = 1.0;
            p
        }),
    };
    DomainBundle {
        name: "oscillating_chain",
        model,
        reference_policies: Some(PolicySet::Decentralized(vec![Policy::Rule(rule); 2])),
        notes: "Singleton-state chain with time-varying deterministic policies in doubling blocks",
    }
}

/// Climb Game whose payoff orientation is drawn at random and revealed to both agents.
pub fn observable_climb() -> DomainBundle {
    let acts = names(&["u1", "u2", "u3"]);
    let mut b = ModelBuilder::new(
        names(&["climb", "climb-transposed", "end"]),
        vec![acts.clone(); 2],
        vec![names(&["climb", "climb-transposed"]); 2],
    );
    b.start(vec![0.5, 0.5, 0.0]).terminal(2).default_observation(0).discount(0.0).horizon(Some(1));
    for s in 0..2 {
        let o = b.observations().encode(&[s, s]);
        b.initial_observation(s, o, 1.0);
        for a in 0..9 {
            let p = b.actions().decode(a);
            let r = if s == 0 { CLIMB_PAYOFF[p[1]][p[0]] } else { CLIMB_PAYOFF[p[0]][p[1]] };
            b.transition(s, a, 2, 1.0).reward(s, a, r);
        }
    }
    let model = b.build();
    DomainBundle {
        name: "observable_climb",
        reference_policies: Some(uniform_tabular(&model)),
        model,
        notes: "Control domain: both agents observe which Climb orientation is in play, so histories identify the state",
    }
}
