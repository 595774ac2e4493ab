//! CSV and JSON writers for visitation tables, value tables, gradient moments, and training traces.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::actor_critic::{EvalMethod, LearningCurve};
use crate::error::Result;
use crate::gradients::{GradientStats, SgdRun, TrainingRun};
use crate::model::{DecPomdp, HistoryArena};
use crate::values::{QKey, QTable};
use crate::visitation::{RhoQuery, Visitation};

/// Formats with 6 significant digits, dropping trailing zeros.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".into()
    } else {
        t.into()
    }
}

fn opt(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// History-id to label dictionary written next to every history-keyed CSV.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct HistorySidecar {
    pub joint: BTreeMap<usize, String>,
    pub individual: BTreeMap<usize, BTreeMap<usize, String>>,
}

impl HistorySidecar {
    pub fn from_arena(model: &DecPomdp, arena: &HistoryArena) -> Self {
        let mut out = Self::default();
        for id in 0..arena.joint_len() {
            out.joint.insert(id, model.joint_history_label(&arena.joint_history(id)));
        }
        for agent in 0..arena.n_agents() {
            out.add_individuals(model, arena, agent);
        }
        out
    }

    /// Adds (or overwrites) the labels of one agent's individual histories from `arena`.
    pub fn add_individuals(&mut self, model: &DecPomdp, arena: &HistoryArena, agent: usize) {
        let row = self.individual.entry(agent).or_default();
        for id in 0..arena.individual_len(agent) {
            row.insert(id, model.history_label(agent, arena.individual(agent, id)));
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("string maps serialize")
    }
}

/// `(kind, history_id, state, action_id, eta, rho)` rows for all six joint forms.
pub fn write_visitation_csv<W: Write>(out: W, vis: &Visitation) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "history_id", "state", "action_id", "eta", "rho"])?;
    let mut row = |kind: &str, h: Option<usize>, s: Option<usize>, a: Option<usize>, q: RhoQuery| -> Result<()> {
        let eta = vis.eta(q);
        let rho = vis.rho(q).value().map(sig6).unwrap_or_default();
        w.write_record([kind.to_string(), opt(h), opt(s), opt(a), sig6(eta), rho])?;
        Ok(())
    };
    for s in 0..vis.n_states() {
        if vis.state[s] > 0.0 {
            row("state", None, Some(s), None, RhoQuery::State(s))?;
        }
    }
    for s in 0..vis.n_states() {
        for a in 0..vis.n_joint_actions() {
            if vis.state_action[s][a] > 0.0 {
                row("state-action", None, Some(s), Some(a), RhoQuery::StateAction(s, a))?;
            }
        }
    }
    for h in 0..vis.n_histories() {
        if vis.history[h] <= 0.0 {
            continue;
        }
        row("history", Some(h), None, None, RhoQuery::History(h))?;
        for &(a, _) in &vis.policy[h] {
            row("history-action", Some(h), None, Some(a), RhoQuery::HistoryAction(h, a))?;
        }
        for &(s, _) in &vis.history_state[h] {
            row("history-state", Some(h), Some(s), None, RhoQuery::HistoryState(h, s))?;
            for &(a, _) in &vis.policy[h] {
                row("history-state-action", Some(h), Some(s), Some(a), RhoQuery::HistoryStateAction(h, s, a))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `(variant, agent, time, history_id, state, action_id, value)`; key columns a variant lacks are left blank.
pub fn write_qtable_csv<W: Write>(out: W, tables: &[&dyn QTable]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["variant", "agent", "time", "history_id", "state", "action_id", "value"])?;
    for table in tables {
        for (key, v) in table.rows() {
            let (agent, t, h, s, a) = match key {
                QKey::JointHistory { h, a } => (None, None, Some(h), None, a),
                QKey::Individual { agent, h, a } => (Some(agent), None, Some(h), None, a),
                QKey::State { s, a } => (None, None, None, Some(s), a),
                QKey::StateTimed { t, s, a } => (None, Some(t), None, Some(s), a),
                QKey::HistoryState { h, s, a } => (None, None, Some(h), Some(s), a),
            };
            w.write_record([
                table.variant().as_str().to_string(),
                opt(agent),
                opt(t),
                opt(h),
                opt(s),
                a.to_string(),
                sig6(v),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `(variant, agent, mean_norm, cov_trace)`.
pub fn write_moments_csv<W: Write>(out: W, stats: &[GradientStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["variant", "agent", "mean_norm", "cov_trace"])?;
    for g in stats {
        w.write_record([
            g.variant.to_string(),
            g.agent.to_string(),
            sig6(g.mean_norm()),
            g.cov_trace.map(sig6).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-dimension expected gradients: `(variant, agent, history_id, action_id, mean, variance)`.
pub fn write_gradient_csv<W: Write>(out: W, stats: &[GradientStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["variant", "agent", "history_id", "action_id", "mean", "variance"])?;
    for g in stats {
        let diag = g.covariance_diagonal();
        for (k, &(h, a)) in g.dims.entries.iter().enumerate() {
            w.write_record([
                g.variant.to_string(),
                g.agent.to_string(),
                h.to_string(),
                a.to_string(),
                sig6(g.mean[k]),
                diag.as_ref().map(|d| sig6(d[k])).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row of a training trace; the learning-curve schema shared by all training loops.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub run_id: String,
    pub seed: u64,
    pub iterate: usize,
    pub agent: usize,
    pub j_exact: String,
    pub grad_norm: String,
    pub j_greedy: String,
    pub eval_method: String,
    pub used_value: String,
    /// Root-history action probabilities, `;`-separated.
    pub probs: String,
}

fn probs_field(row: &[f64]) -> String {
    row.iter().map(|&p| sig6(p)).collect::<Vec<_>>().join(";")
}

fn finite_or_blank(x: f64) -> String {
    if x.is_finite() {
        sig6(x)
    } else {
        String::new()
    }
}

fn method(m: EvalMethod) -> &'static str {
    match m {
        EvalMethod::Exact => "exact",
        EvalMethod::MonteCarlo => "monte-carlo",
    }
}

pub fn gd_rows(run_id: &str, seed: u64, run: &TrainingRun) -> Vec<TraceRow> {
    let mut out = Vec::new();
    for r in &run.records {
        for (agent, p) in r.root_probs.iter().enumerate() {
            out.push(TraceRow {
                run_id: run_id.into(),
                seed,
                iterate: r.iterate,
                agent,
                j_exact: sig6(r.j),
                grad_norm: finite_or_blank(r.grad_norm),
                j_greedy: String::new(),
                eval_method: "exact".into(),
                used_value: String::new(),
                probs: probs_field(p),
            });
        }
    }
    out
}

pub fn sgd_rows(run_id: &str, seed: u64, run: &SgdRun) -> Vec<TraceRow> {
    let mut out = Vec::new();
    for r in &run.records {
        for (agent, p) in r.root_probs.iter().enumerate() {
            let used = r.used_values.get(agent).or(r.used_values.first()).copied().unwrap_or(f64::NAN);
            out.push(TraceRow {
                run_id: run_id.into(),
                seed,
                iterate: r.iterate,
                agent,
                j_exact: sig6(r.j),
                grad_norm: finite_or_blank(r.grad_norm),
                j_greedy: String::new(),
                eval_method: "exact".into(),
                used_value: finite_or_blank(used),
                probs: probs_field(p),
            });
        }
    }
    out
}

/// Learning-curve rows; `j_exact` holds the stochastic-policy return and `eval_method` says how it was measured.
pub fn curve_rows(run_id: &str, curve: &LearningCurve) -> Vec<TraceRow> {
    let mut out = Vec::new();
    for pt in &curve.points {
        for (agent, p) in pt.root_probs.iter().enumerate() {
            out.push(TraceRow {
                run_id: run_id.into(),
                seed: curve.config.seed,
                iterate: pt.episode,
                agent,
                j_exact: sig6(pt.stochastic),
                grad_norm: String::new(),
                j_greedy: sig6(pt.greedy),
                eval_method: method(pt.stochastic_method).into(),
                used_value: String::new(),
                probs: probs_field(p),
            });
        }
    }
    out
}

pub fn write_trace_csv<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["run_id", "seed", "iterate", "agent", "j_exact", "grad_norm", "j_greedy", "eval_method", "used_value", "probs"])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and population standard deviation over seeds at one evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub variant: String,
    pub episode: usize,
    pub mean: f64,
    pub std: f64,
    pub greedy_mean: f64,
    pub greedy_std: f64,
    pub runs: usize,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

fn as_written(x: f64) -> f64 {
    sig6(x).parse().unwrap_or(f64::NAN)
}

/// Aggregates curves of one variant across seeds, point by point; curves must share evaluation episodes.
///
/// Statistics are taken over the per-seed values as they appear in the trace CSV.
pub fn aggregate(variant: &str, curves: &[LearningCurve]) -> Vec<AggregateRow> {
    let Some(first) = curves.first() else { return Vec::new() };
    (0..first.points.len())
        .map(|k| {
            let s: Vec<f64> = curves.iter().map(|c| as_written(c.points[k].stochastic)).collect();
            let g: Vec<f64> = curves.iter().map(|c| as_written(c.points[k].greedy)).collect();
            let (mean, std) = mean_std(&s);
            let (greedy_mean, greedy_std) = mean_std(&g);
            AggregateRow { variant: variant.into(), episode: first.points[k].episode, mean, std, greedy_mean, greedy_std, runs: curves.len() }
        })
        .collect()
}

/// Aggregate rows; full precision so downstream recomputation can be compared tightly.
pub fn write_aggregate_csv<W: Write>(out: W, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["variant", "episode", "mean", "std", "greedy_mean", "greedy_std", "runs"])?;
    for r in rows {
        w.write_record([
            r.variant.clone(),
            r.episode.to_string(),
            format!("{:?}", r.mean),
            format!("{:?}", r.std),
            format!("{:?}", r.greedy_mean),
            format!("{:?}", r.greedy_std),
            r.runs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(-16.175), "-16.175");
        assert_eq!(sig6(19.9347891), "19.9348");
        assert_eq!(sig6(1.0 / 3.0), "0.333333");
        assert_eq!(sig6(11.0), "11");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(1.5e-7), "1.5e-7");
        assert_eq!(sig6(-1e-20), "-1e-20");
        assert_eq!(sig6(9.9999996), "10");
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[5.0, 6.0]);
        assert_eq!(m, 5.5);
        assert_eq!(s, 0.5);
    }
}
