use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::assignment::ControllerAssignment;
use super::validate::{self, ValidationReport};
use super::{ModelError, STOCHASTIC_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for StateId {
    fn from(i: usize) -> Self {
        StateId(i as u32)
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// What the controller sees of the environment in a given state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observation {
    /// Perfect perception: the true class.
    True(u32),
    /// Classifier output together with the verifier verdicts.
    Perceived { khat: u32, v: Vec<bool> },
}

/// Projection of a state onto `(z, k, [khat, v], t, c)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateTuple {
    pub z: Vec<i64>,
    pub k: u32,
    pub t: u8,
    pub c: Vec<i64>,
    /// Predicted class and verdicts; present only in augmented models.
    pub perception: Option<(u32, Vec<bool>)>,
}

impl StateTuple {
    pub fn new(z: Vec<i64>, k: u32, t: u8, c: Vec<i64>) -> Self {
        StateTuple { z, k, t, c, perception: None }
    }

    pub fn with_perception(mut self, khat: u32, v: Vec<bool>) -> Self {
        self.perception = Some((khat, v));
        self
    }

    /// The perfect-perception tuple obtained by dropping `khat` and `v`.
    pub fn base(&self) -> StateTuple {
        StateTuple { perception: None, ..self.clone() }
    }

    pub fn observation(&self) -> Observation {
        match &self.perception {
            Some((khat, v)) => Observation::Perceived { khat: *khat, v: v.clone() },
            None => Observation::True(self.k),
        }
    }

    pub fn family_key(&self) -> FamilyKey {
        FamilyKey { z: self.z.clone(), obs: self.observation(), c: self.c.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId(pub u32);

impl ParamId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// `coeff`, or `coeff * param` when a parameter is attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weight {
    pub coeff: f64,
    pub param: Option<ParamId>,
}

impl Weight {
    pub fn constant(value: f64) -> Self {
        Weight { coeff: value, param: None }
    }

    pub fn param(id: ParamId) -> Self {
        Weight { coeff: 1.0, param: Some(id) }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Weight { coeff: self.coeff * factor, ..self }
    }

    pub fn is_constant(&self) -> bool {
        self.param.is_none()
    }

    /// Whether the entry may carry probability mass.
    pub fn is_possible(&self) -> bool {
        self.coeff != 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionEntry {
    pub target: StateId,
    pub weight: Weight,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RewardStructure {
    pub name: String,
    pub state_rewards: BTreeMap<StateId, f64>,
    pub transition_rewards: BTreeMap<(StateId, StateId), f64>,
}

impl RewardStructure {
    pub fn new(name: impl Into<String>) -> Self {
        RewardStructure { name: name.into(), ..Default::default() }
    }

    pub fn state_reward(&self, s: StateId) -> f64 {
        self.state_rewards.get(&s).copied().unwrap_or(0.0)
    }

    pub fn transition_reward(&self, s: StateId, t: StateId) -> f64 {
        self.transition_rewards.get(&(s, t)).copied().unwrap_or(0.0)
    }
}

/// Context `(z, observation, c)` of a controller decision.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FamilyKey {
    pub z: Vec<i64>,
    pub obs: Observation,
    pub c: Vec<i64>,
}

/// A place where a parameter occurs: decision context and chosen next configuration.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamSlot {
    pub key: FamilyKey,
    pub target: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamInfo {
    pub name: String,
    pub slots: Vec<ParamSlot>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyMember {
    pub param: ParamId,
    pub target: Vec<i64>,
}

/// Parameters that share rows and therefore must sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamFamily {
    pub members: Vec<FamilyMember>,
    pub contexts: Vec<FamilyKey>,
}

#[derive(Debug, Clone)]
pub struct ExplicitPdtmc {
    pub(crate) states: Arc<Vec<StateTuple>>,
    pub(crate) initial: StateId,
    pub(crate) rows: Vec<Vec<TransitionEntry>>,
    pub(crate) labels: Arc<BTreeMap<String, Vec<StateId>>>,
    pub(crate) rewards: Arc<Vec<RewardStructure>>,
    pub(crate) params: Arc<Vec<ParamInfo>>,
    pub(crate) families: Arc<Vec<ParamFamily>>,
    pub(crate) index: Arc<OnceLock<HashMap<StateTuple, StateId>>>,
}

impl ExplicitPdtmc {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn state(&self, s: StateId) -> &StateTuple {
        &self.states[s.index()]
    }

    pub fn states(&self) -> &[StateTuple] {
        &self.states
    }

    pub fn row(&self, s: StateId) -> &[TransitionEntry] {
        &self.rows[s.index()]
    }

    pub fn rows(&self) -> &[Vec<TransitionEntry>] {
        &self.rows
    }

    pub fn labels(&self) -> &BTreeMap<String, Vec<StateId>> {
        &self.labels
    }

    pub fn label(&self, name: &str) -> Option<&[StateId]> {
        self.labels.get(name).map(Vec::as_slice)
    }

    pub fn rewards(&self) -> &[RewardStructure] {
        &self.rewards
    }

    pub fn reward(&self, name: &str) -> Option<&RewardStructure> {
        self.rewards.iter().find(|r| r.name == name)
    }

    pub fn params(&self) -> &[ParamInfo] {
        &self.params
    }

    pub fn param_name(&self, id: ParamId) -> &str {
        &self.params[id.index()].name
    }

    pub fn param_id(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(|i| ParamId(i as u32))
    }

    pub fn families(&self) -> &[ParamFamily] {
        &self.families
    }

    pub fn is_parametric(&self) -> bool {
        !self.params.is_empty()
    }

    /// Whether states carry a predicted class and verdicts.
    pub fn is_augmented(&self) -> bool {
        self.states.iter().any(|s| s.perception.is_some())
    }

    /// Number of environment classes, taken as the largest `k` in the state set.
    pub fn num_classes(&self) -> usize {
        self.states.iter().map(|s| s.k as usize).max().unwrap_or(0)
    }

    pub fn find_state(&self, tuple: &StateTuple) -> Option<StateId> {
        let index = self
            .index
            .get_or_init(|| self.states.iter().enumerate().map(|(i, t)| (t.clone(), StateId::from(i))).collect());
        index.get(tuple).copied()
    }

    pub fn validate(&self) -> ValidationReport {
        validate::validate(self)
    }

    /// Forward-reachable states from the initial state.
    pub fn reachable(&self) -> BTreeSet<StateId> {
        let mut seen = vec![false; self.num_states()];
        let mut queue = VecDeque::from([self.initial]);
        seen[self.initial.index()] = true;
        while let Some(s) = queue.pop_front() {
            for e in self.row(s) {
                if e.weight.is_possible() && !seen[e.target.index()] {
                    seen[e.target.index()] = true;
                    queue.push_back(e.target);
                }
            }
        }
        seen.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| StateId::from(i)).collect()
    }

    /// The sub-model on the states reachable from the initial state, numbered
    /// in breadth-first order. Parameters that only occur elsewhere are dropped.
    pub fn reachable_submodel(&self) -> ExplicitPdtmc {
        let mut order = vec![self.initial];
        let mut new_id: HashMap<StateId, StateId> = HashMap::from([(self.initial, StateId(0))]);
        let mut i = 0;
        while i < order.len() {
            for e in self.row(order[i]) {
                if e.weight.is_possible() && !new_id.contains_key(&e.target) {
                    new_id.insert(e.target, StateId::from(order.len()));
                    order.push(e.target);
                }
            }
            i += 1;
        }
        let mut b = super::ModelBuilder::new().with_state_cap(usize::MAX);
        for &s in &order {
            b.add_state(self.state(s).clone()).expect("no cap");
        }
        for (&s, &n) in &new_id {
            for e in self.row(s).iter().filter(|e| e.weight.is_possible()) {
                let weight = match e.weight.param {
                    Some(p) => Weight { param: Some(b.param(self.param_name(p))), ..e.weight },
                    None => e.weight,
                };
                b.add_transition(n, new_id[&e.target], weight).expect("weights were valid");
            }
        }
        for (name, states) in self.labels.iter() {
            b.declare_label(name);
            for s in states.iter().filter_map(|s| new_id.get(s)) {
                b.add_label(name, *s);
            }
        }
        for r in self.rewards.iter() {
            let idx = b.reward(&r.name);
            for (s, &v) in &r.state_rewards {
                if let Some(&n) = new_id.get(s) {
                    b.add_state_reward(idx, n, v).expect("rewards were valid");
                }
            }
            for ((s, t), &v) in &r.transition_rewards {
                if let (Some(&n), Some(&m)) = (new_id.get(s), new_id.get(t)) {
                    b.add_transition_reward(idx, n, m, v).expect("rewards were valid");
                }
            }
        }
        b.set_initial(StateId(0));
        b.finish().expect("sub-model of a valid model")
    }

    /// Substitutes parameter values from `assignment`.
    ///
    /// Values are looked up by parameter name first and by decision slot
    /// otherwise, so an assignment produced for a different model with the
    /// same decision structure can be applied.
    pub fn instantiate(&self, assignment: &ControllerAssignment) -> Result<ExplicitPdtmc, ModelError> {
        let mut values = Vec::with_capacity(self.params.len());
        for p in self.params.iter() {
            let value = match assignment.value(&p.name) {
                Some(v) => v,
                None => {
                    let mut found: Option<f64> = None;
                    for slot in &p.slots {
                        if let Some(v) = assignment.slot_value(&slot.key, &slot.target) {
                            match found {
                                Some(prev) if (prev - v).abs() > STOCHASTIC_TOLERANCE => {
                                    return Err(ModelError::InconsistentAssignment {
                                        name: p.name.clone(),
                                        first: prev,
                                        second: v,
                                    })
                                }
                                Some(_) => {}
                                None => found = Some(v),
                            }
                        } else if found.is_some() {
                            return Err(ModelError::MissingParameter(p.name.clone()));
                        }
                    }
                    found.ok_or_else(|| ModelError::MissingParameter(p.name.clone()))?
                }
            };
            values.push(value);
        }
        self.instantiate_values(&values)
    }

    /// Substitutes `values[i]` for parameter `i`, after checking ranges and family sums.
    pub fn instantiate_values(&self, values: &[f64]) -> Result<ExplicitPdtmc, ModelError> {
        if values.len() != self.params.len() {
            let missing = self.params.get(values.len()).map(|p| p.name.clone()).unwrap_or_default();
            return Err(ModelError::MissingParameter(missing));
        }
        for (p, &v) in self.params.iter().zip(values) {
            if !(0.0..=1.0).contains(&v) {
                return Err(ModelError::ValueOutOfRange { name: p.name.clone(), value: v });
            }
        }
        for fam in self.families.iter() {
            let sum: f64 = fam.members.iter().map(|m| values[m.param.index()]).sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                let members = fam.members.iter().map(|m| self.param_name(m.param)).collect::<Vec<_>>().join(", ");
                return Err(ModelError::SimplexViolation { members, sum });
            }
        }
        Ok(self.instantiate_unchecked(values))
    }

    /// Substitution without range or simplex checks; zero-weight entries are dropped.
    pub fn instantiate_unchecked(&self, values: &[f64]) -> ExplicitPdtmc {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .filter_map(|e| {
                        let w = match e.weight.param {
                            Some(p) => e.weight.coeff * values[p.index()],
                            None => e.weight.coeff,
                        };
                        (w != 0.0).then_some(TransitionEntry { target: e.target, weight: Weight::constant(w) })
                    })
                    .collect()
            })
            .collect();
        ExplicitPdtmc {
            states: Arc::clone(&self.states),
            initial: self.initial,
            rows,
            labels: Arc::clone(&self.labels),
            rewards: Arc::clone(&self.rewards),
            params: Arc::new(Vec::new()),
            families: Arc::new(Vec::new()),
            index: Arc::clone(&self.index),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::ModelBuilder;

    #[test]
    fn reachable_submodel_drops_orphans() {
        let mut b = ModelBuilder::new();
        let orphan = b.add_state(StateTuple::new(vec![9], 1, 3, vec![0])).unwrap();
        let s = b.add_state(StateTuple::new(vec![0], 1, 3, vec![0])).unwrap();
        let t = b.add_state(StateTuple::new(vec![1], 1, 1, vec![1])).unwrap();
        let (x, y) = (b.param("x"), b.param("y"));
        b.add_transition(orphan, t, Weight::param(y)).unwrap();
        b.add_transition(s, t, Weight::param(x)).unwrap();
        b.add_transition(t, t, Weight::constant(1.0)).unwrap();
        b.add_label("end", t);
        let r = b.reward("r");
        b.add_transition_reward(r, s, t, 2.0).unwrap();
        b.set_initial(s);
        let sub = b.finish().unwrap().reachable_submodel();
        assert_eq!(sub.num_states(), 2);
        assert_eq!(sub.params().len(), 1);
        assert_eq!(sub.param_name(ParamId(0)), "x");
        assert_eq!(sub.label("end").unwrap(), &[StateId(1)]);
        assert_eq!(sub.rewards()[0].transition_reward(StateId(0), StateId(1)), 2.0);
    }
}
