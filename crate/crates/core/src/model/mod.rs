//! Dec-POMDP data model: the tuple itself, histories, policies, and validation.

pub mod history;
pub mod json;
pub mod policy;
pub mod space;

use std::fmt;

pub use history::{HistoryArena, IndividualHistory, JointHistory, JointLink, JointNode};
pub use policy::{
    joint_policy_prob, score, softmax, JointSoftmax, Policy, PolicySet, Rule, RulePolicy, ScoreVector, SoftmaxPolicy,
    TabularPolicy,
};
pub use space::JointSpace;

pub const ROW_TOLERANCE: f64 = 1e-9;

/// Sparse distribution `[(index, probability)]`.
pub type Sparse = Vec<(usize, f64)>;

/// Finite Dec-POMDP `⟨I, S, A⃗, Ω⃗, T, O, R, γ⟩` with terminal markers.
#[derive(Debug, Clone)]
pub struct DecPomdp {
    pub state_names: Vec<String>,
    pub action_names: Vec<Vec<String>>,
    pub observation_names: Vec<Vec<String>>,
    pub actions: JointSpace,
    pub observations: JointSpace,
    pub start: Vec<f64>,
    /// `transition[s][a⃗]` is the distribution over next states.
    pub transition: Vec<Vec<Sparse>>,
    /// `observation[a⃗][s']` is the distribution over joint observations.
    pub observation: Vec<Vec<Sparse>>,
    /// Optional joint observation emitted before the first decision, per start state.
    pub initial_observation: Option<Vec<Sparse>>,
    pub reward: Vec<Vec<f64>>,
    pub discount: f64,
    pub terminal: Vec<bool>,
    /// Episode length cap: decisions happen at `t < horizon`.
    pub horizon: Option<usize>,
}

impl DecPomdp {
    pub fn n_agents(&self) -> usize {
        self.actions.agents()
    }

    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn n_joint_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn n_joint_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn new_arena(&self) -> HistoryArena {
        HistoryArena::new(self.actions.clone(), self.observations.clone())
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_names.iter().position(|s| s == name)
    }

    pub fn action_index(&self, agent: usize, name: &str) -> Option<usize> {
        self.action_names.get(agent)?.iter().position(|s| s == name)
    }

    pub fn observation_index(&self, agent: usize, name: &str) -> Option<usize> {
        self.observation_names.get(agent)?.iter().position(|s| s == name)
    }

    /// Joint action index from per-agent action names.
    pub fn joint_action(&self, names: &[&str]) -> Option<usize> {
        let parts: Option<Vec<usize>> = names.iter().enumerate().map(|(i, n)| self.action_index(i, n)).collect();
        Some(self.actions.encode(&parts?))
    }

    pub fn joint_observation(&self, names: &[&str]) -> Option<usize> {
        let parts: Option<Vec<usize>> = names.iter().enumerate().map(|(i, n)| self.observation_index(i, n)).collect();
        Some(self.observations.encode(&parts?))
    }

    pub fn joint_action_label(&self, a: usize) -> String {
        self.actions.decode(a).iter().enumerate().map(|(i, &x)| self.action_names[i][x].as_str()).collect::<Vec<_>>().join("+")
    }

    pub fn joint_observation_label(&self, o: usize) -> String {
        self.observations
            .decode(o)
            .iter()
            .enumerate()
            .map(|(i, &x)| self.observation_names[i][x].as_str())
            .collect::<Vec<_>>()
            .join("+")
    }

    pub fn history_label(&self, agent: usize, h: &IndividualHistory) -> String {
        let mut parts = Vec::new();
        if let Some(o) = h.first {
            parts.push(self.observation_names[agent][o].clone());
        }
        for &(a, o) in &h.steps {
            parts.push(self.action_names[agent][a].clone());
            parts.push(self.observation_names[agent][o].clone());
        }
        if parts.is_empty() {
            "ε".to_string()
        } else {
            parts.join(",")
        }
    }

    pub fn joint_history_label(&self, h: &JointHistory) -> String {
        h.agents.iter().enumerate().map(|(i, x)| format!("({})", self.history_label(i, x))).collect::<Vec<_>>().join("")
    }

    /// Number of decision steps enumerated for exact analyses.
    ///
    /// Episodic models use their horizon; discounted ones truncate once `γ^T` falls below `tol`.
    pub fn analysis_depth(&self, tol: f64, cap: usize) -> usize {
        if let Some(h) = self.horizon {
            return h.min(cap);
        }
        if self.discount <= 0.0 {
            return 1;
        }
        if self.discount >= 1.0 {
            return cap;
        }
        let t = (tol.ln() / self.discount.ln()).ceil() as usize;
        t.clamp(1, cap)
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Shape(String),
    NegativeProbability(String),
    StartRow { sum: f64 },
    TransitionRow { state: usize, joint_action: usize, sum: f64 },
    ObservationRow { joint_action: usize, next_state: usize, sum: f64 },
    InitialObservationRow { state: usize, sum: f64 },
    TerminalNotAbsorbing { state: usize, joint_action: usize },
    TerminalReward { state: usize, joint_action: usize, reward: f64 },
    DiscountOutOfRange(f64),
    EpisodicWithoutHorizon,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape(m) => write!(f, "shape: {m}"),
            Violation::NegativeProbability(m) => write!(f, "negative probability: {m}"),
            Violation::StartRow { sum } => write!(f, "start distribution sums to {sum}"),
            Violation::TransitionRow { state, joint_action, sum } => {
                write!(f, "transition row (s={state}, a={joint_action}) sums to {sum}")
            }
            Violation::ObservationRow { joint_action, next_state, sum } => {
                write!(f, "observation row (a={joint_action}, s'={next_state}) sums to {sum}")
            }
            Violation::InitialObservationRow { state, sum } => {
                write!(f, "initial observation row (s={state}) sums to {sum}")
            }
            Violation::TerminalNotAbsorbing { state, joint_action } => {
                write!(f, "terminal state {state} does not self-loop under a={joint_action}")
            }
            Violation::TerminalReward { state, joint_action, reward } => {
                write!(f, "terminal state {state} has reward {reward} under a={joint_action}")
            }
            Violation::DiscountOutOfRange(g) => write!(f, "discount {g} outside [0, 1]"),
            Violation::EpisodicWithoutHorizon => write!(f, "discount 1 requires a declared horizon"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

fn row_sum(row: &Sparse, what: impl Fn() -> String, out: &mut Vec<Violation>) -> f64 {
    let mut sum = 0.0;
    for &(_, p) in row {
        if p < 0.0 || !p.is_finite() {
            out.push(Violation::NegativeProbability(what()));
        }
        sum += p;
    }
    sum
}

pub fn validate(m: &DecPomdp) -> ValidationReport {
    let mut v = Vec::new();
    let ns = m.n_states();
    let na = m.n_joint_actions();
    let no = m.n_joint_observations();
    if m.action_names.len() != m.actions.agents() || m.observation_names.len() != m.observations.agents() {
        v.push(Violation::Shape("agent count mismatch".into()));
    }
    if m.start.len() != ns || m.transition.len() != ns || m.reward.len() != ns || m.terminal.len() != ns {
        v.push(Violation::Shape("per-state tables have wrong length".into()));
        return ValidationReport { violations: v };
    }
    if m.observation.len() != na || m.observation.iter().any(|r| r.len() != ns) {
        v.push(Violation::Shape("observation table has wrong shape".into()));
        return ValidationReport { violations: v };
    }
    if m.transition.iter().any(|r| r.len() != na) || m.reward.iter().any(|r| r.len() != na) {
        v.push(Violation::Shape("transition or reward table has wrong shape".into()));
        return ValidationReport { violations: v };
    }
    let out_of_range = |row: &Sparse, n: usize| row.iter().any(|&(i, _)| i >= n);
    if m.start.iter().any(|&p| p < 0.0) {
        v.push(Violation::NegativeProbability("start".into()));
    }
    let s: f64 = m.start.iter().sum();
    if (s - 1.0).abs() > ROW_TOLERANCE {
        v.push(Violation::StartRow { sum: s });
    }
    for st in 0..ns {
        for a in 0..na {
            let row = &m.transition[st][a];
            if out_of_range(row, ns) {
                v.push(Violation::Shape(format!("transition (s={st}, a={a}) indexes past the state set")));
                continue;
            }
            let sum = row_sum(row, || format!("transition (s={st}, a={a})"), &mut v);
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                v.push(Violation::TransitionRow { state: st, joint_action: a, sum });
            }
            if m.terminal[st] {
                let self_mass: f64 = row.iter().filter(|&&(n, _)| n == st).map(|x| x.1).sum();
                if (self_mass - 1.0).abs() > ROW_TOLERANCE {
                    v.push(Violation::TerminalNotAbsorbing { state: st, joint_action: a });
                }
                if m.reward[st][a] != 0.0 {
                    v.push(Violation::TerminalReward { state: st, joint_action: a, reward: m.reward[st][a] });
                }
            }
        }
    }
    for a in 0..na {
        for sn in 0..ns {
            let row = &m.observation[a][sn];
            if out_of_range(row, no) {
                v.push(Violation::Shape(format!("observation (a={a}, s'={sn}) indexes past the observation set")));
                continue;
            }
            let sum = row_sum(row, || format!("observation (a={a}, s'={sn})"), &mut v);
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                v.push(Violation::ObservationRow { joint_action: a, next_state: sn, sum });
            }
        }
    }
    if let Some(init) = &m.initial_observation {
        if init.len() != ns {
            v.push(Violation::Shape("initial observation table has wrong length".into()));
        } else {
            for (st, row) in init.iter().enumerate() {
                if m.start[st] == 0.0 && row.is_empty() {
                    continue;
                }
                if out_of_range(row, no) {
                    v.push(Violation::Shape(format!("initial observation (s={st}) indexes past the observation set")));
                    continue;
                }
                let sum = row_sum(row, || format!("initial observation (s={st})"), &mut v);
                if (sum - 1.0).abs() > ROW_TOLERANCE {
                    v.push(Violation::InitialObservationRow { state: st, sum });
                }
            }
        }
    }
    if !(0.0..=1.0).contains(&m.discount) || m.discount.is_nan() {
        v.push(Violation::DiscountOutOfRange(m.discount));
    }
    if m.discount >= 1.0 && m.horizon.is_none() {
        v.push(Violation::EpisodicWithoutHorizon);
    }
    ValidationReport { violations: v }
}

/// Incremental constructor used by the bundled domains and the JSON loader.
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    model: DecPomdp,
    default_observation: Option<usize>,
}

impl ModelBuilder {
    pub fn new(states: Vec<String>, actions: Vec<Vec<String>>, observations: Vec<Vec<String>>) -> Self {
        let aspace = JointSpace::new(actions.iter().map(Vec::len).collect());
        let ospace = JointSpace::new(observations.iter().map(Vec::len).collect());
        let ns = states.len();
        let na = aspace.len();
        Self {
            model: DecPomdp {
                state_names: states,
                action_names: actions,
                observation_names: observations,
                start: vec![0.0; ns],
                transition: vec![vec![Vec::new(); na]; ns],
                observation: vec![vec![Vec::new(); ns]; na],
                initial_observation: None,
                reward: vec![vec![0.0; na]; ns],
                discount: 1.0,
                terminal: vec![false; ns],
                horizon: None,
                actions: aspace,
                observations: ospace,
            },
            default_observation: None,
        }
    }

    pub fn actions(&self) -> &JointSpace {
        &self.model.actions
    }

    pub fn observations(&self) -> &JointSpace {
        &self.model.observations
    }

    pub fn start(&mut self, probs: Vec<f64>) -> &mut Self {
        self.model.start = probs;
        self
    }

    pub fn transition(&mut self, s: usize, a: usize, next: usize, p: f64) -> &mut Self {
        add_mass(&mut self.model.transition[s][a], next, p);
        self
    }

    pub fn observation(&mut self, a: usize, next: usize, o: usize, p: f64) -> &mut Self {
        add_mass(&mut self.model.observation[a][next], o, p);
        self
    }

    pub fn initial_observation(&mut self, s: usize, o: usize, p: f64) -> &mut Self {
        let ns = self.model.state_names.len();
        let init = self.model.initial_observation.get_or_insert_with(|| vec![Vec::new(); ns]);
        add_mass(&mut init[s], o, p);
        self
    }

    pub fn reward(&mut self, s: usize, a: usize, r: f64) -> &mut Self {
        self.model.reward[s][a] = r;
        self
    }

    /// Marks a state terminal; empty transition rows become self-loops at build time.
    pub fn terminal(&mut self, s: usize) -> &mut Self {
        self.model.terminal[s] = true;
        self
    }

    pub fn discount(&mut self, g: f64) -> &mut Self {
        self.model.discount = g;
        self
    }

    pub fn horizon(&mut self, h: Option<usize>) -> &mut Self {
        self.model.horizon = h;
        self
    }

    /// Joint observation used for every observation row left empty.
    pub fn default_observation(&mut self, o: usize) -> &mut Self {
        self.default_observation = Some(o);
        self
    }

    pub fn build(mut self) -> DecPomdp {
        let m = &mut self.model;
        for s in 0..m.state_names.len() {
            if m.terminal[s] {
                for row in &mut m.transition[s] {
                    if row.is_empty() {
                        row.push((s, 1.0));
                    }
                }
            }
        }
        if let Some(o) = self.default_observation {
            for rows in &mut m.observation {
                for row in rows.iter_mut() {
                    if row.is_empty() {
                        row.push((o, 1.0));
                    }
                }
            }
        }
        for rows in m.transition.iter_mut().chain(m.observation.iter_mut()) {
            for row in rows.iter_mut() {
                row.sort_by_key(|x| x.0);
            }
        }
        self.model
    }
}

fn add_mass(row: &mut Sparse, idx: usize, p: f64) {
    if let Some(e) = row.iter_mut().find(|e| e.0 == idx) {
        e.1 += p;
    } else {
        row.push((idx, p));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn tiny(discount: f64, horizon: Option<usize>) -> ModelBuilder {
        let mut b = ModelBuilder::new(names(&["a", "end"]), vec![names(&["x", "y"])], vec![names(&["o"])]);
        b.start(vec![1.0, 0.0]).terminal(1).default_observation(0).discount(discount).horizon(horizon);
        b.transition(0, 0, 0, 1.0).transition(0, 1, 1, 1.0).reward(0, 1, 1.0);
        b
    }

    #[test]
    fn valid_model_has_empty_report() {
        assert!(tiny(0.9, None).build().validate().is_valid());
        assert!(tiny(1.0, Some(3)).build().validate().is_valid());
    }

    #[test]
    fn short_transition_row_is_reported() {
        let mut b = tiny(0.9, None);
        b.transition(0, 0, 0, -0.1);
        let report = b.build().validate();
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(report.violations[0], Violation::TransitionRow { state: 0, joint_action: 0, .. }));
    }

    #[test]
    fn undiscounted_without_horizon_is_reported() {
        let report = tiny(1.0, None).build().validate();
        assert_eq!(report.violations, vec![Violation::EpisodicWithoutHorizon]);
    }

    #[test]
    fn terminal_must_absorb_without_reward() {
        let mut b = tiny(0.5, None);
        b.transition(1, 0, 0, 1.0).reward(1, 1, 2.0);
        let report = b.build().validate();
        assert!(report.violations.iter().any(|v| matches!(v, Violation::TerminalNotAbsorbing { state: 1, .. })));
        assert!(report.violations.iter().any(|v| matches!(v, Violation::TerminalReward { state: 1, .. })));
    }

    #[test]
    fn analysis_depth_rules() {
        assert_eq!(tiny(1.0, Some(3)).build().analysis_depth(1e-10, 1000), 3);
        assert_eq!(tiny(0.0, None).build().analysis_depth(1e-10, 1000), 1);
        let d = tiny(0.9, None).build().analysis_depth(1e-10, 1000);
        assert!(0.9f64.powi(d as i32) <= 1e-10 && 0.9f64.powi(d as i32 - 1) > 1e-10);
    }
}
