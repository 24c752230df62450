use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock};

use super::model::{
    ExplicitPdtmc, FamilyKey, FamilyMember, ParamFamily, ParamId, ParamInfo, ParamSlot, RewardStructure, StateId,
    StateTuple, TransitionEntry, Weight,
};
use super::{ModelError, DEFAULT_STATE_CAP};

/// Incremental constructor for [`ExplicitPdtmc`].
///
/// States are interned by tuple, so adding the same tuple twice returns
/// the same id. Duplicate edges are merged in [`ModelBuilder::finish`].
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    states: Vec<StateTuple>,
    index: HashMap<StateTuple, StateId>,
    initial: Option<StateId>,
    edges: Vec<Vec<TransitionEntry>>,
    params: Vec<String>,
    param_index: HashMap<String, ParamId>,
    labels: BTreeMap<String, Vec<StateId>>,
    rewards: Vec<RewardStructure>,
    cap: usize,
}

impl Default for ModelBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl ModelBuilder {
    pub fn new() -> Self {
        ModelBuilder {
            states: Vec::new(),
            index: HashMap::new(),
            initial: None,
            edges: Vec::new(),
            params: Vec::new(),
            param_index: HashMap::new(),
            labels: BTreeMap::new(),
            rewards: Vec::new(),
            cap: DEFAULT_STATE_CAP,
        }
    }

    pub fn with_state_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_tuple(&self, s: StateId) -> &StateTuple {
        &self.states[s.index()]
    }

    /// Returns the id of `tuple`, adding it if new. The flag reports whether it was added.
    pub fn intern(&mut self, tuple: StateTuple) -> Result<(StateId, bool), ModelError> {
        if let Some(&id) = self.index.get(&tuple) {
            return Ok((id, false));
        }
        if self.states.len() >= self.cap {
            return Err(ModelError::StateExplosion { cap: self.cap });
        }
        let id = StateId::from(self.states.len());
        self.index.insert(tuple.clone(), id);
        self.states.push(tuple);
        self.edges.push(Vec::new());
        Ok((id, true))
    }

    pub fn add_state(&mut self, tuple: StateTuple) -> Result<StateId, ModelError> {
        self.intern(tuple).map(|(id, _)| id)
    }

    pub fn find_state(&self, tuple: &StateTuple) -> Option<StateId> {
        self.index.get(tuple).copied()
    }

    pub fn set_initial(&mut self, s: StateId) {
        self.initial = Some(s);
    }

    pub fn param(&mut self, name: &str) -> ParamId {
        if let Some(&id) = self.param_index.get(name) {
            return id;
        }
        let id = ParamId(self.params.len() as u32);
        self.params.push(name.to_string());
        self.param_index.insert(name.to_string(), id);
        id
    }

    pub fn has_param(&self, name: &str) -> bool {
        self.param_index.contains_key(name)
    }

    pub fn add_transition(&mut self, src: StateId, dst: StateId, weight: Weight) -> Result<(), ModelError> {
        if !weight.coeff.is_finite() || weight.coeff < 0.0 {
            return Err(ModelError::InvalidWeight {
                src: src.index(),
                dst: dst.index(),
                reason: format!("coefficient {} is not a finite non-negative number", weight.coeff),
            });
        }
        if src.index() >= self.states.len() {
            return Err(ModelError::DanglingTarget(src.index()));
        }
        self.edges[src.index()].push(TransitionEntry { target: dst, weight });
        Ok(())
    }

    pub fn declare_label(&mut self, name: &str) {
        self.labels.entry(name.to_string()).or_default();
    }

    pub fn add_label(&mut self, name: &str, s: StateId) {
        self.labels.entry(name.to_string()).or_default().push(s);
    }

    /// Index of the reward structure `name`, creating it on first use.
    pub fn reward(&mut self, name: &str) -> usize {
        if let Some(i) = self.rewards.iter().position(|r| r.name == name) {
            return i;
        }
        self.rewards.push(RewardStructure::new(name));
        self.rewards.len() - 1
    }

    fn check_reward(&self, idx: usize, value: f64) -> Result<(), ModelError> {
        if !value.is_finite() || value < 0.0 {
            return Err(ModelError::InvalidReward { name: self.rewards[idx].name.clone(), value });
        }
        Ok(())
    }

    /// Adds `value` to the state reward of `s`.
    pub fn add_state_reward(&mut self, idx: usize, s: StateId, value: f64) -> Result<(), ModelError> {
        self.check_reward(idx, value)?;
        *self.rewards[idx].state_rewards.entry(s).or_insert(0.0) += value;
        Ok(())
    }

    /// Adds `value` to the transition reward of `(s, t)`.
    pub fn add_transition_reward(&mut self, idx: usize, s: StateId, t: StateId, value: f64) -> Result<(), ModelError> {
        self.check_reward(idx, value)?;
        *self.rewards[idx].transition_rewards.entry((s, t)).or_insert(0.0) += value;
        Ok(())
    }

    pub fn finish(self) -> Result<ExplicitPdtmc, ModelError> {
        if self.states.is_empty() {
            return Err(ModelError::Empty);
        }
        let n = self.states.len();
        let initial = self.initial.unwrap_or(StateId(0));
        if initial.index() >= n {
            return Err(ModelError::DanglingTarget(initial.index()));
        }

        let mut rows = Vec::with_capacity(n);
        for (src, edges) in self.edges.into_iter().enumerate() {
            rows.push(merge_row(src, edges, n, &self.params)?);
        }

        let mut labels = self.labels;
        for ids in labels.values_mut() {
            ids.sort_unstable();
            ids.dedup();
            if let Some(bad) = ids.iter().find(|s| s.index() >= n) {
                return Err(ModelError::DanglingTarget(bad.index()));
            }
        }
        for r in &self.rewards {
            let bad = r
                .state_rewards
                .keys()
                .map(|s| s.index())
                .chain(r.transition_rewards.keys().flat_map(|(a, b)| [a.index(), b.index()]))
                .find(|&i| i >= n);
            if let Some(i) = bad {
                return Err(ModelError::DanglingTarget(i));
            }
        }

        let (params, families) = derive_families(&self.states, &rows, self.params);
        Ok(ExplicitPdtmc {
            states: Arc::new(self.states),
            initial,
            rows,
            labels: Arc::new(labels),
            rewards: Arc::new(self.rewards),
            params: Arc::new(params),
            families: Arc::new(families),
            index: Arc::new(OnceLock::new()),
        })
    }
}

fn merge_row(
    src: usize,
    mut edges: Vec<TransitionEntry>,
    n: usize,
    params: &[String],
) -> Result<Vec<TransitionEntry>, ModelError> {
    if let Some(e) = edges.iter().find(|e| e.target.index() >= n) {
        return Err(ModelError::DanglingTarget(e.target.index()));
    }
    edges.sort_by_key(|e| e.target);
    let mut out: Vec<TransitionEntry> = Vec::with_capacity(edges.len());
    for e in edges {
        match out.last_mut() {
            Some(last) if last.target == e.target => {
                if last.weight.param != e.weight.param {
                    let show = |w: Weight| match w.param {
                        Some(p) => format!("{}*{}", w.coeff, params[p.index()]),
                        None => format!("{}", w.coeff),
                    };
                    return Err(ModelError::UnmergeableWeights {
                        src,
                        dst: e.target.index(),
                        a: show(last.weight),
                        b: show(e.weight),
                    });
                }
                last.weight.coeff += e.weight.coeff;
            }
            _ => out.push(e),
        }
    }
    Ok(out)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Groups parameters that co-occur in a row and records where each occurs.
fn derive_families(
    states: &[StateTuple],
    rows: &[Vec<TransitionEntry>],
    names: Vec<String>,
) -> (Vec<ParamInfo>, Vec<ParamFamily>) {
    let np = names.len();
    let mut parent: Vec<usize> = (0..np).collect();
    let mut slots: Vec<Vec<ParamSlot>> = vec![Vec::new(); np];
    let mut order: Vec<ParamId> = Vec::new();
    let mut seen = vec![false; np];
    let mut contexts_by_state: Vec<(ParamId, FamilyKey)> = Vec::new();

    for (src, row) in rows.iter().enumerate() {
        let mut first: Option<ParamId> = None;
        let key = states[src].family_key();
        for e in row {
            let Some(p) = e.weight.param else { continue };
            if !seen[p.index()] {
                seen[p.index()] = true;
                order.push(p);
            }
            let slot = ParamSlot { key: key.clone(), target: states[e.target.index()].c.clone() };
            if !slots[p.index()].contains(&slot) {
                slots[p.index()].push(slot);
            }
            match first {
                None => {
                    first = Some(p);
                    contexts_by_state.push((p, key.clone()));
                }
                Some(f) => {
                    let (a, b) = (find(&mut parent, f.index()), find(&mut parent, p.index()));
                    if a != b {
                        parent[b] = a;
                    }
                }
            }
        }
    }

    let mut family_of_root: HashMap<usize, usize> = HashMap::new();
    let mut families: Vec<ParamFamily> = Vec::new();
    for &p in &order {
        let root = find(&mut parent, p.index());
        let fi = *family_of_root.entry(root).or_insert_with(|| {
            families.push(ParamFamily { members: Vec::new(), contexts: Vec::new() });
            families.len() - 1
        });
        let target = slots[p.index()].first().map(|s| s.target.clone()).unwrap_or_default();
        families[fi].members.push(FamilyMember { param: p, target });
    }
    for (p, key) in contexts_by_state {
        let fi = family_of_root[&find(&mut parent, p.index())];
        if !families[fi].contexts.contains(&key) {
            families[fi].contexts.push(key);
        }
    }

    let params = names.into_iter().zip(slots).map(|(name, slots)| ParamInfo { name, slots }).collect();
    (params, families)
}
