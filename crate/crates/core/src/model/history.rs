use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::space::JointSpace;

/// One agent's action-observation history.
///
/// `first` is the observation received before the first decision, when the
/// model emits one; `steps` holds the later `(action, observation)` pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndividualHistory {
    pub first: Option<usize>,
    pub steps: Vec<(usize, usize)>,
}

impl IndividualHistory {
    /// The unique empty history.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn rooted(first: Option<usize>) -> Self {
        Self { first, steps: Vec::new() }
    }

    /// Number of decisions already taken, i.e. the timestep at which this history is observed.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_none() && self.steps.is_empty()
    }

    pub fn extended(&self, action: usize, observation: usize) -> Self {
        let mut steps = self.steps.clone();
        steps.push((action, observation));
        Self { first: self.first, steps }
    }

    pub fn actions(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().map(|&(a, _)| a)
    }

    pub fn observations(&self) -> impl Iterator<Item = usize> + '_ {
        self.first.into_iter().chain(self.steps.iter().map(|&(_, o)| o))
    }
}

/// Tuple of equal-length individual histories.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JointHistory {
    pub agents: Vec<IndividualHistory>,
}

impl JointHistory {
    pub fn empty(agents: usize) -> Self {
        Self { agents: vec![IndividualHistory::empty(); agents] }
    }

    pub fn len(&self) -> usize {
        self.agents.first().map_or(0, IndividualHistory::len)
    }

    pub fn is_empty(&self) -> bool {
        self.agents.iter().all(IndividualHistory::is_empty)
    }

    pub fn is_consistent(&self) -> bool {
        let t = self.len();
        self.agents.iter().all(|h| h.len() == t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointLink {
    Root(Option<usize>),
    Step { action: usize, observation: usize },
}

#[derive(Debug, Clone)]
pub struct JointNode {
    pub parent: Option<usize>,
    pub depth: usize,
    pub link: JointLink,
    /// Individual-history id of each agent.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct IndividualNode {
    pub parent: Option<usize>,
    pub history: IndividualHistory,
}

#[derive(Debug, Clone, Default)]
struct IndividualArena {
    nodes: Vec<IndividualNode>,
    roots: HashMap<Option<usize>, usize>,
    children: HashMap<(usize, usize, usize), usize>,
}

impl IndividualArena {
    fn root(&mut self, first: Option<usize>) -> usize {
        if let Some(&id) = self.roots.get(&first) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(IndividualNode { parent: None, history: IndividualHistory::rooted(first) });
        self.roots.insert(first, id);
        id
    }

    fn child(&mut self, parent: usize, action: usize, observation: usize) -> usize {
        if let Some(&id) = self.children.get(&(parent, action, observation)) {
            return id;
        }
        let id = self.nodes.len();
        let history = self.nodes[parent].history.extended(action, observation);
        self.nodes.push(IndividualNode { parent: Some(parent), history });
        self.children.insert((parent, action, observation), id);
        id
    }
}

/// Append-only interning table for joint and individual histories.
///
/// Ids never change once assigned, so a clone can be extended with extra
/// (e.g. counterfactual) histories while staying index-compatible with the original.
#[derive(Debug, Clone)]
pub struct HistoryArena {
    actions: JointSpace,
    observations: JointSpace,
    agents: Vec<IndividualArena>,
    joint: Vec<JointNode>,
    joint_roots: HashMap<Option<usize>, usize>,
    joint_children: HashMap<(usize, usize, usize), usize>,
}

impl HistoryArena {
    pub fn new(actions: JointSpace, observations: JointSpace) -> Self {
        let n = actions.agents();
        Self {
            actions,
            observations,
            agents: vec![IndividualArena::default(); n],
            joint: Vec::new(),
            joint_roots: HashMap::new(),
            joint_children: HashMap::new(),
        }
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn joint_len(&self) -> usize {
        self.joint.len()
    }

    pub fn individual_len(&self, agent: usize) -> usize {
        self.agents[agent].nodes.len()
    }

    /// Interns the root joint history for an (optional) initial joint observation.
    pub fn root(&mut self, observation: Option<usize>) -> usize {
        if let Some(&id) = self.joint_roots.get(&observation) {
            return id;
        }
        let members = (0..self.agents.len())
            .map(|i| {
                let first = observation.map(|o| self.observations.component(o, i));
                self.agents[i].root(first)
            })
            .collect();
        let id = self.joint.len();
        self.joint.push(JointNode { parent: None, depth: 0, link: JointLink::Root(observation), members });
        self.joint_roots.insert(observation, id);
        id
    }

    pub fn child(&mut self, parent: usize, action: usize, observation: usize) -> usize {
        if let Some(&id) = self.joint_children.get(&(parent, action, observation)) {
            return id;
        }
        let members = (0..self.agents.len())
            .map(|i| {
                let a = self.actions.component(action, i);
                let o = self.observations.component(observation, i);
                let p = self.joint[parent].members[i];
                self.agents[i].child(p, a, o)
            })
            .collect();
        let id = self.joint.len();
        let depth = self.joint[parent].depth + 1;
        self.joint.push(JointNode {
            parent: Some(parent),
            depth,
            link: JointLink::Step { action, observation },
            members,
        });
        self.joint_children.insert((parent, action, observation), id);
        id
    }

    pub fn lookup_child(&self, parent: usize, action: usize, observation: usize) -> Option<usize> {
        self.joint_children.get(&(parent, action, observation)).copied()
    }

    pub fn lookup_root(&self, observation: Option<usize>) -> Option<usize> {
        self.joint_roots.get(&observation).copied()
    }

    pub fn node(&self, id: usize) -> &JointNode {
        &self.joint[id]
    }

    pub fn nodes(&self) -> &[JointNode] {
        &self.joint
    }

    pub fn individual(&self, agent: usize, id: usize) -> &IndividualHistory {
        &self.agents[agent].nodes[id].history
    }

    pub fn individual_parent(&self, agent: usize, id: usize) -> Option<usize> {
        self.agents[agent].nodes[id].parent
    }

    pub fn members(&self, id: usize) -> &[usize] {
        &self.joint[id].members
    }

    pub fn joint_history(&self, id: usize) -> JointHistory {
        JointHistory {
            agents: self.joint[id]
                .members
                .iter()
                .enumerate()
                .map(|(i, &m)| self.individual(i, m).clone())
                .collect(),
        }
    }

    pub fn individual_histories(&self, id: usize) -> Vec<&IndividualHistory> {
        self.joint[id].members.iter().enumerate().map(|(i, &m)| self.individual(i, m)).collect()
    }

    /// Finds the id of an already-interned joint history.
    pub fn find(&self, history: &JointHistory) -> Option<usize> {
        let first = if history.agents.iter().all(|h| h.first.is_some()) {
            let parts: Vec<usize> = history.agents.iter().map(|h| h.first.unwrap_or(0)).collect();
            Some(self.observations.encode(&parts))
        } else if history.agents.iter().all(|h| h.first.is_none()) {
            None
        } else {
            return None;
        };
        let mut id = self.lookup_root(first)?;
        for t in 0..history.len() {
            let a: Vec<usize> = history.agents.iter().map(|h| h.steps[t].0).collect();
            let o: Vec<usize> = history.agents.iter().map(|h| h.steps[t].1).collect();
            id = self.lookup_child(id, self.actions.encode(&a), self.observations.encode(&o))?;
        }
        Some(id)
    }

    pub fn find_individual(&self, agent: usize, history: &IndividualHistory) -> Option<usize> {
        let arena = &self.agents[agent];
        let mut id = *arena.roots.get(&history.first)?;
        for &(a, o) in &history.steps {
            id = *arena.children.get(&(id, a, o))?;
        }
        Some(id)
    }

    /// Interns an individual history without a matching joint node.
    pub fn intern_individual_child(&mut self, agent: usize, parent: usize, action: usize, observation: usize) -> usize {
        self.agents[agent].child(parent, action, observation)
    }

    pub fn action_space(&self) -> &JointSpace {
        &self.actions
    }

    pub fn observation_space(&self) -> &JointSpace {
        &self.observations
    }
}
