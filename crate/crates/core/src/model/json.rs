//! JSON schema for models.
//!
//! ```json
//! {
//!   "agents": 2,
//!   "states": ["s0", "end"],
//!   "actions": [["a", "b"], ["a", "b"]],
//!   "observations": [["o"], ["o"]],
//!   "start": [1.0, 0.0],
//!   "transition": [{"state": "s0", "actions": ["a", "a"], "next": "end", "p": 1.0}],
//!   "observation": [{"actions": ["a", "a"], "next": "end", "obs": ["o", "o"], "p": 1.0}],
//!   "initial_observation": [{"state": "s0", "obs": ["o", "o"], "p": 1.0}],
//!   "reward": [{"state": "s0", "actions": ["a", "a"], "r": 1.0}],
//!   "discount": 0.0,
//!   "terminal": ["end"],
//!   "horizon": 1
//! }
//! ```
//!
//! Rewards not listed are zero. `initial_observation` and `horizon` are optional.

use serde::{Deserialize, Serialize};

use super::{DecPomdp, ModelBuilder};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub state: String,
    pub actions: Vec<String>,
    pub next: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationEntry {
    pub actions: Vec<String>,
    pub next: String,
    pub obs: Vec<String>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialObservationEntry {
    pub state: String,
    pub obs: Vec<String>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardEntry {
    pub state: String,
    pub actions: Vec<String>,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub agents: usize,
    pub states: Vec<String>,
    pub actions: Vec<Vec<String>>,
    pub observations: Vec<Vec<String>>,
    pub start: Vec<f64>,
    pub transition: Vec<TransitionEntry>,
    pub observation: Vec<ObservationEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_observation: Vec<InitialObservationEntry>,
    pub reward: Vec<RewardEntry>,
    pub discount: f64,
    pub terminal: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

impl From<&DecPomdp> for ModelJson {
    fn from(m: &DecPomdp) -> Self {
        let joint_actions = |a: usize| -> Vec<String> {
            m.actions.decode(a).iter().enumerate().map(|(i, &x)| m.action_names[i][x].clone()).collect()
        };
        let joint_obs = |o: usize| -> Vec<String> {
            m.observations.decode(o).iter().enumerate().map(|(i, &x)| m.observation_names[i][x].clone()).collect()
        };
        let mut transition = Vec::new();
        let mut reward = Vec::new();
        for s in 0..m.n_states() {
            for a in 0..m.n_joint_actions() {
                for &(n, p) in &m.transition[s][a] {
                    transition.push(TransitionEntry {
                        state: m.state_names[s].clone(),
                        actions: joint_actions(a),
                        next: m.state_names[n].clone(),
                        p,
                    });
                }
                if m.reward[s][a] != 0.0 {
                    reward.push(RewardEntry { state: m.state_names[s].clone(), actions: joint_actions(a), r: m.reward[s][a] });
                }
            }
        }
        let mut observation = Vec::new();
        for a in 0..m.n_joint_actions() {
            for n in 0..m.n_states() {
                for &(o, p) in &m.observation[a][n] {
                    observation.push(ObservationEntry {
                        actions: joint_actions(a),
                        next: m.state_names[n].clone(),
                        obs: joint_obs(o),
                        p,
                    });
                }
            }
        }
        let initial_observation = m
            .initial_observation
            .iter()
            .flat_map(|rows| {
                rows.iter().enumerate().flat_map(|(s, row)| {
                    row.iter().map(move |&(o, p)| (s, o, p))
                })
            })
            .map(|(s, o, p)| InitialObservationEntry { state: m.state_names[s].clone(), obs: joint_obs(o), p })
            .collect();
        ModelJson {
            agents: m.n_agents(),
            states: m.state_names.clone(),
            actions: m.action_names.clone(),
            observations: m.observation_names.clone(),
            start: m.start.clone(),
            transition,
            observation,
            initial_observation,
            reward,
            discount: m.discount,
            terminal: m.state_names.iter().zip(&m.terminal).filter(|x| *x.1).map(|x| x.0.clone()).collect(),
            horizon: m.horizon,
        }
    }
}

impl ModelJson {
    /// Builds the model without validating probabilities; see [`DecPomdp::from_json_str`].
    pub fn to_model(&self) -> Result<DecPomdp> {
        if self.actions.len() != self.agents || self.observations.len() != self.agents {
            return Err(Error::Schema(format!(
                "agents = {} but {} action sets and {} observation sets",
                self.agents,
                self.actions.len(),
                self.observations.len()
            )));
        }
        if self.start.len() != self.states.len() {
            return Err(Error::Schema("start must have one entry per state".into()));
        }
        let mut b = ModelBuilder::new(self.states.clone(), self.actions.clone(), self.observations.clone());
        let state = |name: &str| -> Result<usize> {
            self.states.iter().position(|s| s == name).ok_or_else(|| Error::Schema(format!("unknown state '{name}'")))
        };
        let joint = |names: &[String], sets: &[Vec<String>], what: &str| -> Result<Vec<usize>> {
            if names.len() != self.agents {
                return Err(Error::Schema(format!("{what} tuple {names:?} has wrong arity")));
            }
            names
                .iter()
                .zip(sets)
                .map(|(n, set)| set.iter().position(|x| x == n).ok_or_else(|| Error::Schema(format!("unknown {what} '{n}'"))))
                .collect()
        };
        b.start(self.start.clone());
        for e in &self.transition {
            let a = b.actions().encode(&joint(&e.actions, &self.actions, "action")?);
            b.transition(state(&e.state)?, a, state(&e.next)?, e.p);
        }
        for e in &self.observation {
            let a = b.actions().encode(&joint(&e.actions, &self.actions, "action")?);
            let o = b.observations().encode(&joint(&e.obs, &self.observations, "observation")?);
            b.observation(a, state(&e.next)?, o, e.p);
        }
        for e in &self.initial_observation {
            let o = b.observations().encode(&joint(&e.obs, &self.observations, "observation")?);
            b.initial_observation(state(&e.state)?, o, e.p);
        }
        for e in &self.reward {
            let a = b.actions().encode(&joint(&e.actions, &self.actions, "action")?);
            b.reward(state(&e.state)?, a, e.r);
        }
        for t in &self.terminal {
            b.terminal(state(t)?);
        }
        b.discount(self.discount).horizon(self.horizon);
        Ok(b.build())
    }
}

impl DecPomdp {
    pub fn to_json(&self) -> ModelJson {
        ModelJson::from(self)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("model serializes");
        s.push('\n');
        s
    }

    /// Parses and validates a model.
    pub fn from_json_str(text: &str) -> Result<DecPomdp> {
        let json: ModelJson = serde_json::from_str(text)?;
        let model = json.to_model()?;
        let report = model.validate();
        if !report.is_valid() {
            return Err(Error::InvalidModel(report.to_string()));
        }
        Ok(model)
    }
}
