//! Named property suites: each check records computed vs expected values and its tolerance.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::domains::{self, DomainBundle, RandomModelSpec, OPEN_LEFT, OPEN_RIGHT, LISTEN, TIGER_LEFT, TIGER_RIGHT};
use crate::error::{Error, Result};
use crate::export::sig6;
use crate::gradients::{
    analyze, bias_report, build_critic, critic_value, expected_gradient, score_reward_lemma, state_value_variance,
    tabularize, value_variance, Convention, Draw, GradientStats, Variant,
};
use crate::model::{DecPomdp, IndividualHistory, JointHistory, Policy, PolicySet, TabularPolicy};
use crate::values::{
    advantage, q_history_state, q_individual_all, q_joint_history, q_state, q_state_timed, v_baseline, QKey, QTable, VKey,
};
use crate::visitation::{
    belief_filter, candidate_action_distributions, compute_visitations, RhoQuery, Visitation, VisitationConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Visitation,
    Values,
    Theorems,
    DectigerTables,
    Counterexample,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Visitation, Suite::Values, Suite::Theorems, Suite::DectigerTables, Suite::Counterexample];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Visitation => "visitation",
            Suite::Values => "values",
            Suite::Theorems => "theorems",
            Suite::DectigerTables => "dectiger-tables",
            Suite::Counterexample => "counterexample",
        }
    }

    /// Whether the suite is defined for a bundled domain name.
    pub fn applies_to(self, domain: &str) -> bool {
        match self {
            Suite::DectigerTables => domain == "dec_tiger",
            Suite::Counterexample => domain == "oscillating_chain",
            _ => true,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relation {
    /// `|computed − expected| ≤ tolerance`
    Near,
    /// `computed ≥ expected − tolerance`
    AtLeast,
    /// `computed ≤ expected + tolerance`
    AtMost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: Suite,
    pub target: String,
    pub name: String,
    pub relation: Relation,
    pub computed: f64,
    pub expected: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        let (c, e, t) = (self.computed, self.expected, self.tolerance);
        if !c.is_finite() {
            return false;
        }
        match self.relation {
            Relation::Near => (c - e).abs() <= t,
            Relation::AtLeast => c >= e - t,
            Relation::AtMost => c <= e + t,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.relation {
            Relation::Near => "≈",
            Relation::AtLeast => "≥",
            Relation::AtMost => "≤",
        };
        write!(
            f,
            "{} [{}/{}] {}: computed {} {} expected {} (tol {})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.suite,
            self.target,
            self.name,
            sig6(self.computed),
            rel,
            sig6(self.expected),
            sig6(self.tolerance)
        )
    }
}

/// What a suite runs on.
#[derive(Debug, Clone)]
pub enum Target {
    Bundle(DomainBundle),
    /// `count` seeded random 2-agent models.
    Random(usize),
    /// A user-supplied model, analyzed under generated policies.
    Model(String, DecPomdp),
}

impl Target {
    pub fn name(&self) -> String {
        match self {
            Target::Bundle(b) => b.name.to_string(),
            Target::Random(_) => "random".into(),
            Target::Model(name, _) => name.clone(),
        }
    }

    /// Resolves a domain name, `random`, or (via [`Target::Model`]) nothing else.
    pub fn by_name(name: &str) -> Result<Target> {
        if name == "random" {
            Ok(Target::Random(RANDOM_MODELS))
        } else {
            Ok(Target::Bundle(domains::by_name(name)?))
        }
    }
}

pub const RANDOM_MODELS: usize = 20;

/// One model/policy pair a suite is evaluated on.
#[derive(Debug, Clone)]
pub struct Setup {
    pub label: String,
    pub model: DecPomdp,
    pub policies: PolicySet,
}

const ANALYSIS_HORIZON: usize = 3;

fn truncated(model: &DecPomdp) -> DecPomdp {
    let mut m = model.clone();
    m.horizon = Some(model.horizon.map_or(ANALYSIS_HORIZON, |h| h.min(ANALYSIS_HORIZON)));
    m
}

/// Differentiable form of a policy set: rule-based policies become tables over histories up to length 3.
pub fn analysis_policies(model: &DecPomdp, policies: &PolicySet) -> Result<PolicySet> {
    if policies.is_differentiable() {
        Ok(policies.clone())
    } else {
        tabularize(model, policies, model.horizon.map_or(ANALYSIS_HORIZON, |h| h.min(ANALYSIS_HORIZON)))
    }
}

/// Reference policies (tabularized when rule-based and finite), plus softmax and tabular random policies.
pub fn setups(target: &Target) -> Result<Vec<Setup>> {
    let mut out = Vec::new();
    match target {
        Target::Bundle(b) => {
            if let Some(reference) = &b.reference_policies {
                let policies = if b.name == "oscillating_chain" { reference.clone() } else { analysis_policies(&b.model, reference)? };
                out.push(Setup { label: "reference".into(), model: b.model.clone(), policies });
            }
            let m = truncated(&b.model);
            for seed in 0..2 {
                out.push(Setup { label: format!("random-{seed}"), policies: domains::random_policies(&m, seed), model: m.clone() });
            }
        }
        Target::Random(n) => {
            let spec = RandomModelSpec::default();
            for seed in 0..*n as u64 {
                let m = domains::random_model(seed, &spec);
                out.push(Setup { label: format!("model-{seed}"), policies: domains::random_policies(&m, seed), model: m });
            }
        }
        Target::Model(_, model) => {
            let m = truncated(model);
            out.push(Setup { label: "uniform".into(), policies: domains::uniform_softmax(&m), model: m.clone() });
            for seed in 0..2 {
                out.push(Setup { label: format!("random-{seed}"), policies: domains::random_policies(&m, seed), model: m.clone() });
            }
        }
    }
    Ok(out)
}

struct Sink<'a> {
    suite: Suite,
    target: &'a str,
    checks: Vec<Check>,
}

impl Sink<'_> {
    fn push(&mut self, name: impl Into<String>, relation: Relation, computed: f64, expected: f64, tolerance: f64) {
        self.checks.push(Check {
            suite: self.suite,
            target: self.target.to_string(),
            name: name.into(),
            relation,
            computed,
            expected,
            tolerance,
        });
    }

    fn near(&mut self, name: impl Into<String>, computed: f64, expected: f64, tol: f64) {
        self.push(name, Relation::Near, computed, expected, tol);
    }

    fn at_most(&mut self, name: impl Into<String>, computed: f64, bound: f64, tol: f64) {
        self.push(name, Relation::AtMost, computed, bound, tol);
    }

    fn at_least(&mut self, name: impl Into<String>, computed: f64, bound: f64, tol: f64) {
        self.push(name, Relation::AtLeast, computed, bound, tol);
    }

    fn flag(&mut self, name: impl Into<String>, value: bool, expected: bool) {
        self.near(name, f64::from(u8::from(value)), f64::from(u8::from(expected)), 0.0);
    }
}

/// Runs `suite` on `target`; suites tied to one domain reject other targets.
pub fn run(suite: Suite, target: &Target) -> Result<Vec<Check>> {
    let name = target.name();
    let domain_ok = match target {
        Target::Bundle(b) => suite.applies_to(b.name),
        _ => suite.applies_to(""),
    };
    if !domain_ok {
        return Err(Error::InvalidArgument(format!("suite '{suite}' is not defined for '{name}'")));
    }
    let mut sink = Sink { suite, target: &name, checks: Vec::new() };
    match suite {
        Suite::Visitation => {
            for s in setups(target)? {
                visitation_checks(&mut sink, &s)?;
            }
            if let Target::Bundle(b) = target {
                visitation_domain(&mut sink, b)?;
            }
        }
        Suite::Values => {
            for s in setups(target)? {
                values_checks(&mut sink, &s)?;
            }
            if let Target::Bundle(b) = target {
                values_domain(&mut sink, b)?;
            }
        }
        Suite::Theorems => {
            for s in setups(target)? {
                if s.policies.is_differentiable() {
                    theorem_checks(&mut sink, &s)?;
                }
            }
            if let Target::Bundle(b) = target {
                theorems_domain(&mut sink, b)?;
            }
        }
        Suite::DectigerTables => dectiger_tables(&mut sink)?,
        Suite::Counterexample => counterexample(&mut sink)?,
    }
    Ok(sink.checks)
}

fn max_abs(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

fn root(vis: &Visitation, model: &DecPomdp) -> Option<usize> {
    let n = model.n_agents();
    if model.initial_observation.is_none() {
        vis.find(&JointHistory::empty(n))
    } else {
        None
    }
}

fn visitation_checks(k: &mut Sink, s: &Setup) -> Result<()> {
    let (m, l) = (&s.model, &s.label);
    let vis = compute_visitations(m, &s.policies, &VisitationConfig::default())?;
    let z = vis.z;
    let tol = 1e-9 * z.max(1.0);
    let sum_s: f64 = vis.state.iter().sum();
    let sum_h: f64 = vis.history.iter().sum();
    let sum_hs: f64 = vis.history_state.iter().flatten().map(|x| x.1).sum();
    k.near(format!("{l}: Σ η(s) = Z"), sum_s, z, tol);
    k.near(format!("{l}: Σ η(h) = Z"), sum_h, z, tol);
    k.near(format!("{l}: Σ η(h,s) = Z"), sum_hs, z, tol);
    let mut by_state = vec![0.0; vis.n_states()];
    let mut by_state_action = vec![vec![0.0; vis.n_joint_actions()]; vis.n_states()];
    let mut hist_err: f64 = 0.0;
    for h in 0..vis.n_histories() {
        let mut total = 0.0;
        for &(st, e) in &vis.history_state[h] {
            by_state[st] += e;
            total += e;
            for &(a, p) in &vis.policy[h] {
                by_state_action[st][a] += e * p;
            }
        }
        hist_err = hist_err.max((vis.history[h] - total).abs());
    }
    k.at_most(format!("{l}: max |η(s) − Σ_h η(h,s)|"), max_abs(vis.state.iter().zip(&by_state).map(|(a, b)| a - b)), 0.0, 1e-9);
    k.at_most(format!("{l}: max |η(h) − Σ_s η(h,s)|"), hist_err, 0.0, 1e-9);
    let sa_err = max_abs((0..vis.n_states()).flat_map(|st| {
        let row = &vis.state_action[st];
        let other = &by_state_action[st];
        row.iter().zip(other).map(|(a, b)| a - b).collect::<Vec<_>>()
    }));
    k.at_most(format!("{l}: max |η(s,a) − Σ_h η(h,s)π(a|h)|"), sa_err, 0.0, 1e-9);
    let mut belief_err: f64 = 0.0;
    for h in 0..vis.n_histories() {
        if let (Some(b), Some(f)) = (vis.belief(h), belief_filter(m, &vis.arena.joint_history(h))) {
            belief_err = belief_err.max(max_abs(b.iter().zip(&f).map(|(x, y)| x - y)));
        }
    }
    k.at_most(format!("{l}: max |ρ(s|h) − filtered belief|"), belief_err, 0.0, 1e-9);
    let mut row_err: f64 = 0.0;
    for st in 0..vis.n_states() {
        if let Some(row) = vis.action_given_state(st) {
            row_err = row_err.max((row.iter().sum::<f64>() - 1.0).abs());
        }
        if let Some(row) = vis.history_given_state(st) {
            row_err = row_err.max((row.iter().map(|x| x.1).sum::<f64>() - 1.0).abs());
        }
    }
    k.at_most(format!("{l}: conditional rows sum to 1"), row_err, 0.0, 1e-9);
    if m.horizon.is_none() && m.discount < 1.0 && !m.terminal.iter().any(|&t| t) {
        k.near(format!("{l}: Z = 1/(1−γ)"), z, 1.0 / (1.0 - m.discount), 1e-9 * z);
        let deeper = compute_visitations(m, &s.policies, &VisitationConfig { truncation_tol: 1e-14, ..Default::default() })?;
        let bound = m.discount.powi(vis.depth as i32) * z;
        let diff = max_abs(vis.state.iter().zip(&deeper.state).map(|(a, b)| a - b));
        k.at_most(format!("{l}: deeper truncation moves η(s) by ≤ γ^T·Z"), diff, bound, 0.0);
    }
    Ok(())
}

fn visitation_domain(k: &mut Sink, b: &DomainBundle) -> Result<()> {
    let Some(pol) = &b.reference_policies else { return Ok(()) };
    if b.model.horizon == Some(1) {
        let vis = compute_visitations(&b.model, pol, &VisitationConfig::default())?;
        k.near("matrix game: Z", vis.z, 1.0, 1e-12);
        let reachable = (0..vis.n_histories()).filter(|&h| vis.history[h] > 0.0).count();
        let roots = vis.arena.nodes().iter().filter(|n| n.depth == 0).count();
        k.near("matrix game: reachable histories = decision roots", reachable as f64, roots as f64, 0.0);
        if let Some(r) = root(&vis, &b.model) {
            k.near("matrix game: η(ε)", vis.history[r], 1.0, 1e-12);
        }
    }
    if b.name == "dec_tiger" {
        for g in [0.5, 0.9, 1.0] {
            let t = domains::dec_tiger_with(g, 25);
            let vis = compute_visitations(&t.model, t.reference_policies.as_ref().unwrap(), &VisitationConfig::default())?;
            let listen = t.model.actions.encode(&[LISTEN, LISTEN]);
            k.near(format!("γ={g}: η(s=L) = (1+γ+γ²)/2"), vis.eta(RhoQuery::State(TIGER_LEFT)), (1.0 + g + g * g) / 2.0, 1e-12);
            k.near(format!("γ={g}: η(s=L, listen²) = (1+γ)/2"), vis.eta(RhoQuery::StateAction(TIGER_LEFT, listen)), (1.0 + g) / 2.0, 1e-12);
        }
    }
    Ok(())
}

fn individual_root(vis: &Visitation, model: &DecPomdp, agent: usize) -> Option<usize> {
    root(vis, model).map(|r| vis.arena.members(r)[agent])
}

fn values_checks(k: &mut Sink, s: &Setup) -> Result<()> {
    let (m, pol, l) = (&s.model, &s.policies, &s.label);
    let vis = compute_visitations(m, pol, &VisitationConfig::default())?;
    let qh = q_joint_history(m, pol, &vis)?;
    let qhs = q_history_state(m, pol, &vis)?;
    let qi = q_individual_all(m, pol, &vis)?;
    let qs = q_state(m, &vis)?;
    let qt = q_state_timed(m, &vis);
    k.at_most(format!("{l}: Bellman residual Q(h,a)"), qh.residual(), 0.0, 1e-8);
    k.at_most(format!("{l}: Bellman residual Q(h,s,a)"), qhs.residual(), 0.0, 1e-8);
    k.at_most(format!("{l}: Bellman residual Q_i(h,a)"), max_abs(qi.iter().map(|q| q.residual())), 0.0, 1e-8);
    k.at_most(format!("{l}: Bellman residual Q(s,a)"), qs.residual(), 0.0, 1e-8);
    k.at_most(format!("{l}: Bellman residual Q_t(s,a)"), qt.residual(), 0.0, 1e-8);

    let mut lemma1: f64 = 0.0;
    for (agent, q) in qi.iter().enumerate() {
        let mut groups: HashMap<(usize, usize), (f64, f64)> = HashMap::new();
        for h in 0..vis.n_histories() {
            for &(a, p) in &vis.policy[h] {
                let w = vis.history[h] * p;
                if w <= 0.0 {
                    continue;
                }
                let g = groups.entry((vis.arena.members(h)[agent], m.actions.component(a, agent))).or_insert((0.0, 0.0));
                g.0 += w;
                g.1 += w * qh.get(h, a).unwrap_or(f64::NAN);
            }
        }
        for ((hi, ai), (w, sum)) in groups {
            lemma1 = lemma1.max((q.get(hi, ai).unwrap_or(f64::NAN) - sum / w).abs());
        }
    }
    k.at_most(format!("{l}: Q_i(h_i,a_i) = E[Q(h,a) | h_i,a_i]"), lemma1, 0.0, 1e-8);

    let mut hs_lemma: f64 = 0.0;
    for h in 0..vis.n_histories() {
        let Some(b) = vis.belief(h) else { continue };
        for a in 0..m.n_joint_actions() {
            let mix: f64 = b.iter().enumerate().filter(|x| *x.1 > 0.0).map(|(st, p)| p * qhs.get(h, st, a).unwrap_or(f64::NAN)).sum();
            hs_lemma = hs_lemma.max((qh.get(h, a).unwrap_or(f64::NAN) - mix).abs());
        }
    }
    k.at_most(format!("{l}: Q(h,a) = E_s|h[Q(h,s,a)]"), hs_lemma, 0.0, 1e-8);

    let v = v_baseline(&qh);
    let adv = advantage(&qh, &v)?;
    let mut sums: HashMap<VKey, f64> = HashMap::new();
    for (key, x) in adv {
        let (vk, a) = key.split();
        let w = qh.baseline_weights(vk).and_then(|ws| ws.iter().find(|p| p.0 == a).map(|p| p.1)).unwrap_or(0.0);
        *sums.entry(vk).or_insert(0.0) += w * x;
    }
    k.at_most(format!("{l}: Σ_a π(a|h)·A(h,a) = 0"), max_abs(sums.into_values()), 0.0, 1e-9);

    if m.discount == 0.0 {
        let err = max_abs(qhs.keys.iter().map(|&(h, st, a)| qhs.get(h, st, a).unwrap() - m.reward[st][a]));
        k.at_most(format!("{l}: γ=0 gives Q(h,s,a) = R(s,a)"), err, 0.0, 1e-12);
    }
    Ok(())
}

fn reference_vis(b: &DomainBundle) -> Result<(PolicySet, Visitation)> {
    let pol = b.reference_policies.clone().ok_or_else(|| Error::InvalidArgument(format!("{} has no reference policy", b.name)))?;
    let vis = compute_visitations(&b.model, &pol, &VisitationConfig::default())?;
    Ok((pol, vis))
}

fn values_domain(k: &mut Sink, b: &DomainBundle) -> Result<()> {
    let m = &b.model;
    match b.name {
        "climb_game" => {
            let (pol, vis) = reference_vis(b)?;
            let qi = q_individual_all(m, &pol, &vis)?;
            let expected = [[-19.0 / 3.0, -23.0 / 3.0, 11.0 / 3.0], [-19.0 / 3.0, -17.0 / 3.0, 5.0 / 3.0]];
            for (agent, row) in expected.iter().enumerate() {
                let h = individual_root(&vis, m, agent).unwrap();
                for (a, &e) in row.iter().enumerate() {
                    k.near(format!("Q_{}(u{})", agent + 1, a + 1), qi[agent].get(h, a).unwrap_or(f64::NAN), e, 1e-9);
                }
            }
            let v = v_baseline(&qi[0]);
            let adv = advantage(&qi[0], &v)?;
            let h = individual_root(&vis, m, 0).unwrap();
            let a3 = adv.iter().find(|(key, _)| *key == QKey::Individual { agent: 0, h, a: 2 }).map_or(f64::NAN, |x| x.1);
            k.near("A_1(u3)", a3, 64.0 / 9.0, 1e-9);
        }
        "morning_game" => {
            let (pol, vis) = reference_vis(b)?;
            let qi = q_individual_all(m, &pol, &vis)?;
            let h = individual_root(&vis, m, 0).unwrap();
            let cereal = m.action_index(0, "cereal").unwrap();
            let pickles = m.action_index(0, "pickles").unwrap();
            k.near("Q_1(cereal)", qi[0].get(h, cereal).unwrap_or(f64::NAN), 1.5, 1e-12);
            k.near("Q_1(pickles)", qi[0].get(h, pickles).unwrap_or(f64::NAN), 0.5, 1e-12);
        }
        "guess_game" => {
            for (label, pol) in [("uniform", b.reference_policies.clone().unwrap()), ("random", domains::random_policies(m, 4))] {
                let vis = compute_visitations(m, &pol, &VisitationConfig::default())?;
                let qi = q_individual_all(m, &pol, &vis)?;
                let worst = max_abs(qi.iter().flat_map(|q| q.rows().into_iter().map(|r| r.1)));
                k.at_most(format!("{label}: max |Q_i(h,a)|"), worst, 0.0, 1e-12);
                let mut closed: f64 = 0.0;
                for (i, q) in qi.iter().enumerate() {
                    let j = 1 - i;
                    let other = |o: usize| pol.agent(j).unwrap().probs(j, &IndividualHistory::rooted(Some(o)));
                    for (&(h, a), &v) in q.keys.iter().zip(&q.values) {
                        let oi = q.arena.individual(i, h).first.unwrap_or(0);
                        let e = 5.0 * (other(a)?[oi] - other(1 - a)?[1 - oi]);
                        closed = closed.max((v - e).abs());
                    }
                }
                k.at_most(format!("{label}: Q_i(o_i,a_i) = 5(π_j(o_i|a_i) − π_j(1−o_i|1−a_i))"), closed, 0.0, 1e-12);
            }
        }
        "beverage" => {
            let (pol, vis) = reference_vis(b)?;
            let qs = q_state(m, &vis)?;
            let qh = q_joint_history(m, &pol, &vis)?;
            let (coffee, tea) = (m.state_index("coffee").unwrap(), m.state_index("tea").unwrap());
            let serve_tea = m.joint_action(&["tea"]).unwrap();
            k.near("Q(s=coffee, tea)", qs.get(coffee, serve_tea).unwrap_or(f64::NAN), -1.0, 1e-12);
            k.near("Q(s=tea, tea)", qs.get(tea, serve_tea).unwrap_or(f64::NAN), 1.0, 1e-12);
            k.near("Q(h=ε, tea)", qh.get(root(&vis, m).unwrap(), serve_tea).unwrap_or(f64::NAN), 0.0, 1e-12);
        }
        "observable_climb" => {
            let (pol, vis) = reference_vis(b)?;
            let rep = bias_report(m, &pol, &vis)?;
            k.at_most("max |Q(h,a) − E_s|h[Q(s,a)]|", rep.max_value_gap(), 0.0, 1e-8);
        }
        _ => {}
    }
    Ok(())
}

fn stats_by_agent(v: Variant, s: &Setup, vis: &Visitation) -> Result<Vec<GradientStats>> {
    analyze(v, &s.model, &s.policies, vis)
}

fn is_softmax(pol: &PolicySet) -> bool {
    matches!(pol, PolicySet::Decentralized(ps) if ps.iter().all(|p| matches!(p, Policy::Softmax(_))))
}

fn theorem_checks(k: &mut Sink, s: &Setup) -> Result<()> {
    let (m, pol, l) = (&s.model, &s.policies, &s.label);
    let vis = compute_visitations(m, pol, &VisitationConfig::default())?;
    let gi = stats_by_agent(Variant::Iac, s, &vis)?;
    let gh = stats_by_agent(Variant::IaccH, s, &vis)?;
    let ghs = stats_by_agent(Variant::IaccHs, s, &vis)?;
    let diff = |a: &[GradientStats], b: &[GradientStats]| {
        max_abs(a.iter().zip(b).flat_map(|(x, y)| x.mean.iter().zip(&y.mean).map(|(p, q)| p - q).collect::<Vec<_>>()))
    };
    k.at_most(format!("{l}: ‖E[ĝ_h] − E[ĝ_i]‖∞"), diff(&gh, &gi), 0.0, 1e-8);
    k.at_most(format!("{l}: ‖E[ĝ_hs] − E[ĝ_h]‖∞"), diff(&ghs, &gh), 0.0, 1e-8);
    let trace = |g: &GradientStats| g.cov_trace.unwrap_or(f64::NAN);
    let min_gap = |a: &[GradientStats], b: &[GradientStats]| {
        a.iter().zip(b).map(|(x, y)| trace(x) - trace(y)).fold(f64::INFINITY, f64::min)
    };
    k.at_least(format!("{l}: tr Cov[ĝ_hs] − tr Cov[ĝ_h]"), min_gap(&ghs, &gh), 0.0, 1e-9);
    k.at_least(format!("{l}: tr Cov[ĝ_h] − tr Cov[ĝ_i]"), min_gap(&gh, &gi), 0.0, 1e-9);
    let min_diag = |a: &[GradientStats], b: &[GradientStats]| {
        a.iter()
            .zip(b)
            .flat_map(|(x, y)| {
                let (dx, dy) = (x.covariance_diagonal().unwrap_or_default(), y.covariance_diagonal().unwrap_or_default());
                dx.iter().zip(&dy).map(|(p, q)| p - q).collect::<Vec<_>>()
            })
            .fold(f64::INFINITY, f64::min)
    };
    k.at_least(format!("{l}: min diag(Cov[ĝ_h] − Cov[ĝ_i])"), min_diag(&gh, &gi), 0.0, 1e-9);
    k.at_least(format!("{l}: min diag(Cov[ĝ_hs] − Cov[ĝ_h])"), min_diag(&ghs, &gh), 0.0, 1e-9);
    let unbiased = bias_report(m, pol, &vis).is_ok_and(|r| r.max_value_gap() <= 1e-8);
    let gs = if unbiased { stats_by_agent(Variant::IaccS, s, &vis).ok() } else { None };
    if let Some(gs) = gs {
        k.at_least(format!("{l}: unbiased state values ⇒ tr Cov[ĝ_s] ≥ tr Cov[ĝ_h]"), min_gap(&gs, &gh), 0.0, 1e-9);
    }
    if vis.depth >= 2 && is_softmax(pol) {
        k.at_most(format!("{l}: max |E[∇log π(a_k) R_t]|, t < k"), score_reward_lemma(m, pol, vis.depth)?, 0.0, 1e-10);
    }
    Ok(())
}

/// `h₁ = (listen, hear-left, listen, hear-left)` for agent 1.
fn tiger_h1() -> IndividualHistory {
    IndividualHistory { first: None, steps: vec![(LISTEN, domains::HEAR_LEFT), (LISTEN, domains::HEAR_LEFT)] }
}

fn theorems_domain(k: &mut Sink, b: &DomainBundle) -> Result<()> {
    let m = &b.model;
    match b.name {
        "climb_game" => {
            let (pol, vis) = reference_vis(b)?;
            let critic = build_critic(Variant::IaccH, m, &pol, &vis)?;
            let g = expected_gradient(Variant::IaccH, m, &pol, &critic, &vis, Convention::Unit)?;
            let h = individual_root(&vis, m, 0).unwrap();
            for (a, e) in [-19.0 / 9.0, -23.0 / 9.0, 11.0 / 9.0].into_iter().enumerate() {
                let coef = g[0].get(h, a).unwrap_or(f64::NAN) / 3.0;
                k.near(format!("IACC-H coefficient of ∇log π_1(u{})", a + 1), coef, e, 1e-9);
            }
        }
        "morning_game" => {
            let (pol, vis) = reference_vis(b)?;
            let r = root(&vis, m).unwrap();
            let a = m.joint_action(&["cereal", "vodka"]).unwrap();
            let d = Draw { history: r, state: 0, action: a, weight: 0.0 };
            let ci = build_critic(Variant::Iac, m, &pol, &vis)?;
            let ch = build_critic(Variant::IaccH, m, &pol, &vis)?;
            k.near("draw (cereal, vodka): IAC value", critic_value(Variant::Iac, &ci, &vis, 0, &d)?, 1.5, 1e-12);
            k.near("draw (cereal, vodka): IACC-H value", critic_value(Variant::IaccH, &ch, &vis, 0, &d)?, 0.0, 1e-12);
        }
        "guess_game" => {
            let (pol, vis) = reference_vis(b)?;
            for v in value_variance(m, &pol, &vis)? {
                k.near(format!("agent {}: Var[Q(h,a)]", v.agent + 1), v.centralized, 50.0, 1e-9);
                k.near(format!("agent {}: Var[Q_i(h_i,a_i)]", v.agent + 1), v.decentralized, 0.0, 1e-9);
            }
        }
        "beverage" => {
            let (_, vis) = reference_vis(b)?;
            let qs = q_state(m, &vis)?;
            let tea = m.joint_action(&["tea"]).unwrap();
            let var = state_value_variance(&vis, &qs, root(&vis, m).unwrap(), tea).unwrap_or(f64::NAN);
            k.near("Var_s|ε[Q(s, tea)]", var, 1.0, 1e-12);
        }
        "dec_tiger" => tiger_bias(k, m, b.reference_policies.as_ref().unwrap())?,
        "observable_climb" => {
            let (pol, vis) = reference_vis(b)?;
            let rep = bias_report(m, &pol, &vis)?;
            k.at_most("max |g_s − g_h|", rep.max_gradient_gap(), 0.0, 1e-8);
        }
        _ => {}
    }
    Ok(())
}

fn tiger_bias(k: &mut Sink, m: &DecPomdp, reference: &PolicySet) -> Result<()> {
    let pol = analysis_policies(m, reference)?;
    let vis = compute_visitations(m, &pol, &VisitationConfig::default())?;
    let hid = vis
        .arena
        .find_individual(0, &tiger_h1())
        .ok_or_else(|| Error::Unreachable("h1 not reachable".into()))?;
    let mass = vis.individual_eta(0)[&hid];
    let pi = match &pol {
        PolicySet::Decentralized(ps) => ps[0].probs(0, &tiger_h1())?[OPEN_RIGHT],
        PolicySet::Centralized(_) => unreachable!("tabularized policies are decentralized"),
    };
    k.near("ρ(h1, open-right) per unit (1−γ)", mass * pi, 0.373, 1e-3);
    let ch = build_critic(Variant::IaccH, m, &pol, &vis)?;
    let cs = build_critic(Variant::IaccS, m, &pol, &vis)?;
    let gh = expected_gradient(Variant::IaccH, m, &pol, &ch, &vis, Convention::Unit)?[0].get(hid, OPEN_RIGHT).unwrap_or(f64::NAN);
    let gs = expected_gradient(Variant::IaccS, m, &pol, &cs, &vis, Convention::Unit)?[0].get(hid, OPEN_RIGHT).unwrap_or(f64::NAN);
    k.near("[g_h](h1, open-right) per unit (1−γ)", gh, -0.319, 1e-3);
    k.near("[g_s](h1, open-right) per unit (1−γ)", gs, 1.665, 1e-3);
    k.near("E[Q(h,a) | h1, open-right]", gh * pi / (mass * pi), -0.854, 1e-3);
    k.near("E[Q(s,a) | h1, open-right]", gs * pi / (mass * pi), 4.465, 1e-3);
    k.near("[g_s] − [g_h] at (h1, open-right)", gs - gh, 1.984, 1e-3);

    let rep = bias_report(m, &pol, &vis)?;
    let h_ll = vis.find(&domains::tiger_history("LL,LL")?).ok_or_else(|| Error::Unreachable("h_LL".into()))?;
    let listen = m.actions.encode(&[LISTEN, LISTEN]);
    let w = rep.witnesses.iter().find(|w| w.history == h_ll && w.action == listen);
    k.near("witness |Q(h_LL, listen²) − E_s|h[Q(s, listen²)]|", w.map_or(f64::NAN, |w| w.gap()), 38.105, 0.01);
    k.at_least("some history has value gap > 1", rep.max_value_gap(), 1.0, 0.0);
    Ok(())
}

const TIGER_TABLE: [(&str, f64, f64); 16] = [
    ("LL,LL", -49.93, 19.93),
    ("LL,LR", -47.89, 17.89),
    ("LL,RL", -47.89, 17.89),
    ("LL,RR", -15.00, -15.00),
    ("LR,LL", -47.89, 17.89),
    ("LR,LR", -15.00, -15.00),
    ("LR,RL", -15.00, -15.00),
    ("LR,RR", 17.89, -47.89),
    ("RL,LL", -47.89, 17.89),
    ("RL,LR", -15.00, -15.00),
    ("RL,RL", -15.00, -15.00),
    ("RL,RR", 17.89, -47.89),
    ("RR,LL", -15.00, -15.00),
    ("RR,LR", 17.89, -47.89),
    ("RR,RL", 17.89, -47.89),
    ("RR,RR", 19.93, -49.93),
];

fn dectiger_tables(k: &mut Sink) -> Result<()> {
    let start = Instant::now();
    let b = domains::dec_tiger();
    let (m, pol) = (&b.model, b.reference_policies.as_ref().unwrap());
    let vis = compute_visitations(m, pol, &VisitationConfig::default())?;
    for g in [0.5, 0.9, 1.0] {
        let t = domains::dec_tiger_with(g, 25);
        let v = compute_visitations(&t.model, t.reference_policies.as_ref().unwrap(), &VisitationConfig::default())?;
        let rr = t.model.actions.encode(&[OPEN_RIGHT, OPEN_RIGHT]);
        k.near(format!("γ={g}: η(s=L) = (1+γ+γ²)/2"), v.eta(RhoQuery::State(TIGER_LEFT)), (1.0 + g + g * g) / 2.0, 1e-9);
        let rho = v.rho(RhoQuery::ActionGivenState { action: rr, state: TIGER_LEFT }).value().unwrap_or(f64::NAN);
        k.near(format!("γ={g}: ρ(RR | s=L) = 0.7225γ²/(1+γ+γ²)"), rho, 0.7225 * g * g / (1.0 + g + g * g), 1e-9);
    }
    let doors = [(OPEN_LEFT, OPEN_LEFT), (OPEN_LEFT, OPEN_RIGHT), (OPEN_RIGHT, OPEN_LEFT), (OPEN_RIGHT, OPEN_RIGHT)];
    let names = ["LL", "LR", "RL", "RR"];
    let left = vis.timed_action_given_state(2, TIGER_LEFT).unwrap_or_default();
    for (j, (&(x, y), e)) in doors.iter().zip([0.0225, 0.1275, 0.1275, 0.7225]).enumerate() {
        let a = m.actions.encode(&[x, y]);
        k.near(format!("Pr(a={} | s=L, t=2)", names[j]), left.get(a).copied().unwrap_or(f64::NAN), e, 1e-6);
    }
    for (spec, e) in [("LL,LL", 0.999), ("LL,LR", 0.970), ("LL,RR", 0.500), ("LR,RR", 0.030), ("RR,RR", 0.001)] {
        let h = vis.find(&domains::tiger_history(spec)?);
        let p = h.and_then(|h| vis.belief(h)).map_or(f64::NAN, |b| b[TIGER_LEFT]);
        k.near(format!("Pr(s=L | {spec})"), p, e, 1e-3);
    }
    let h_ll = vis.find(&domains::tiger_history("LL,LL")?).unwrap();
    let given = vis.rho(RhoQuery::HistoryGivenState { history: h_ll, state: TIGER_LEFT }).value().unwrap_or(f64::NAN);
    k.near("Pr(h_LL | s=L)", given * vis.state[TIGER_LEFT] / m.start[TIGER_LEFT], 0.522, 1e-3);

    let qs = q_state(m, &vis)?;
    let listen = m.actions.encode(&[LISTEN, LISTEN]);
    for (j, (&(x, y), e)) in doors.iter().zip([-50.0, -100.0, -100.0, 20.0]).enumerate() {
        let a = m.actions.encode(&[x, y]);
        k.near(format!("Q(s=L, {})", names[j]), qs.get(TIGER_LEFT, a).unwrap_or(f64::NAN), e, 1e-3);
    }
    k.near("Q(s=L, listen²)", qs.get(TIGER_LEFT, listen).unwrap_or(f64::NAN), -18.175, 1e-3);
    k.near("Q(s=R, listen²)", qs.get(TIGER_RIGHT, listen).unwrap_or(f64::NAN), -18.175, 1e-3);
    let qh = q_joint_history(m, pol, &vis)?;
    let qhs = q_history_state(m, pol, &vis)?;
    let eps = vis.find(&JointHistory::empty(2)).unwrap();
    k.near("Q(h=ε, listen²)", qh.get(eps, listen).unwrap_or(f64::NAN), -16.175, 1e-3);
    for (st, name) in [(TIGER_LEFT, "L"), (TIGER_RIGHT, "R")] {
        k.near(format!("Q(h=ε, s={name}, listen²)"), qhs.get(eps, st, listen).unwrap_or(f64::NAN), -16.175, 1e-3);
    }
    let door_err = max_abs(
        qhs.keys
            .iter()
            .filter(|&&(_, _, a)| a != listen)
            .map(|&(h, st, a)| qhs.get(h, st, a).unwrap() - m.reward[st][a]),
    );
    k.at_most("door actions: Q(h,s,a) = R(s,a)", door_err, 0.0, 1e-9);
    let mut table_err: f64 = 0.0;
    for (spec, ll, rr) in TIGER_TABLE {
        let h = vis.find(&domains::tiger_history(spec)?).unwrap();
        let got = |x: usize, y: usize| qh.get(h, m.actions.encode(&[x, y])).unwrap_or(f64::NAN);
        table_err = table_err
            .max((got(OPEN_LEFT, OPEN_LEFT) - ll).abs())
            .max((got(OPEN_RIGHT, OPEN_RIGHT) - rr).abs())
            .max((got(OPEN_LEFT, OPEN_RIGHT) + 100.0).abs())
            .max((got(OPEN_RIGHT, OPEN_LEFT) + 100.0).abs());
    }
    k.at_most("16×4 history-value table, max error", table_err, 0.0, 1e-2);
    let mut pattern = 0;
    for h in 0..vis.n_histories() {
        if vis.arena.node(h).depth == 2 {
            let p: Vec<f64> = vis.policy[h].iter().map(|x| x.1).collect();
            if p == [1.0] || p == [0.5, 0.5] || p == [0.25; 4] {
                pattern += 1;
            }
        }
    }
    k.near("depth-2 histories with the 1 / 0.5 / 0.25 action pattern", pattern as f64, 16.0, 0.0);
    k.at_most("runtime (s)", start.elapsed().as_secs_f64(), 5.0, 0.0);
    Ok(())
}

fn counterexample(k: &mut Sink) -> Result<()> {
    let b = domains::oscillating_chain();
    let both = b.model.actions.encode(&[1, 1]);
    let c = candidate_action_distributions(&b.model, b.reference_policies.as_ref().unwrap(), 400, 1_000_000)?;
    let s = c.get(0, both).ok_or_else(|| Error::Unreachable("state ζ".into()))?;
    for n in [2, 4, 8, 16, 32] {
        k.near(format!("p_TV((1,1)|ζ) at N={n}"), s.total[n - 1].unwrap_or(f64::NAN), 0.5, 1e-12);
    }
    for n in [3, 6, 12, 24, 48] {
        k.near(format!("p_TV((1,1)|ζ) at N={n}"), s.total[n - 1].unwrap_or(f64::NAN), 1.0 / 3.0, 1e-12);
    }
    k.flag("p_TV converged", s.total_converged, false);
    k.flag("p_L converged", s.limit_converged, false);
    k.flag("p_DV converged", s.discounted_converged, true);
    let tail: Vec<f64> = s.discounted_prefix[300..].iter().map(|x| x.unwrap_or(f64::NAN)).collect();
    let cauchy = max_abs(tail.windows(2).map(|w| w[1] - w[0]));
    k.at_most("p_DV successive partial sums beyond depth 300", cauchy, 0.0, 1e-10);
    let last = tail.last().copied().unwrap_or(f64::NAN);
    k.near("p_DV prefix limit = ρ((1,1)|ζ)", last, s.discounted.unwrap_or(f64::NAN), 1e-10);

    let constant = PolicySet::Decentralized(vec![
        Policy::Tabular(TabularPolicy { n_actions: 2, rows: Default::default(), default: Some(vec![0.0, 1.0]) }),
        Policy::Tabular(TabularPolicy { n_actions: 2, rows: Default::default(), default: Some(vec![0.0, 1.0]) }),
    ]);
    let c = candidate_action_distributions(&b.model, &constant, 12, 1_000_000)?;
    let s = c.get(0, both).ok_or_else(|| Error::Unreachable("state ζ".into()))?;
    let pl = s.limit.last().copied().flatten().unwrap_or(f64::NAN);
    let ptv = s.total.last().copied().flatten().unwrap_or(f64::NAN);
    let pdv = s.discounted.unwrap_or(f64::NAN);
    k.near("constant policy: p_DV((1,1)|ζ)", pdv, 1.0, 1e-12);
    k.near("constant policy: p_L = p_DV", pl, pdv, 1e-12);
    k.near("constant policy: p_TV = p_DV", ptv, pdv, 1e-12);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.as_str().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn relations() {
        let c = |relation, computed| Check {
            suite: Suite::Values,
            target: "t".into(),
            name: "n".into(),
            relation,
            computed,
            expected: 1.0,
            tolerance: 0.1,
        };
        assert!(c(Relation::Near, 1.05).passed());
        assert!(!c(Relation::Near, 1.2).passed());
        assert!(c(Relation::AtLeast, 0.95).passed());
        assert!(!c(Relation::AtMost, 1.2).passed());
        assert!(!c(Relation::Near, f64::NAN).passed());
    }

    #[test]
    fn domain_restricted_suites_reject_other_targets() {
        let t = Target::by_name("climb").unwrap();
        assert!(run(Suite::DectigerTables, &t).is_err());
        assert!(run(Suite::Counterexample, &t).is_err());
    }
}
