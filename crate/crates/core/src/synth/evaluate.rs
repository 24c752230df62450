use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Requirements, SynthError};
use crate::markov::{ControllerAssignment, ExplicitPdtmc};
use crate::pctl::{pmc, Bound, Comparison};

/// Slack granted to non-strict constraint bounds, absorbing solver round-off.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-9;

/// The simplex families of a model, as lists of parameter indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    families: Vec<Vec<usize>>,
    num_params: usize,
}

impl SearchSpace {
    pub fn new(model: &ExplicitPdtmc) -> Result<Self, SynthError> {
        if model.families().is_empty() {
            return Err(SynthError::NoParameters);
        }
        let families = model.families().iter().map(|f| f.members.iter().map(|m| m.param.index()).collect()).collect();
        Ok(SearchSpace { families, num_params: model.params().len() })
    }

    pub fn families(&self) -> &[Vec<usize>] {
        &self.families
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    /// Parameter vector placing `points[f]` on the members of family `f`.
    pub fn values(&self, points: &[Vec<f64>]) -> Vec<f64> {
        let mut values = vec![0.0; self.num_params];
        for (members, point) in self.families.iter().zip(points) {
            for (&p, &v) in members.iter().zip(point) {
                values[p] = v;
            }
        }
        values
    }

    /// Parameter vector choosing member `choices[f]` of each family.
    pub fn one_hot(&self, choices: &[usize]) -> Vec<f64> {
        let mut values = vec![0.0; self.num_params];
        for (members, &c) in self.families.iter().zip(choices) {
            values[members[c]] = 1.0;
        }
        values
    }
}

/// Constraint and objective values of one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub objectives: Vec<f64>,
    pub constraints: Vec<f64>,
    pub feasible: bool,
    /// Sum over constraints of the distance to the bound; zero when feasible.
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub assignment: ControllerAssignment,
    pub objective_values: Vec<f64>,
    pub constraint_values: Vec<f64>,
    pub feasible: bool,
}

impl CandidateResult {
    pub fn new(model: &ExplicitPdtmc, values: &[f64], eval: &Evaluation) -> Self {
        CandidateResult {
            assignment: ControllerAssignment::from_values(model, values),
            objective_values: eval.objectives.clone(),
            constraint_values: eval.constraints.clone(),
            feasible: eval.feasible,
        }
    }

    /// Parameter values in model order.
    pub fn values(&self) -> Vec<(String, f64)> {
        self.assignment.families.iter().flat_map(|f| &f.members).map(|m| (m.param.clone(), m.value)).collect()
    }
}

fn check(cmp: Comparison, value: f64, threshold: f64) -> (bool, f64) {
    let slack = match cmp {
        Comparison::Ge | Comparison::Le => CONSTRAINT_TOLERANCE,
        Comparison::Gt | Comparison::Lt => 0.0,
    };
    let ok = match cmp {
        Comparison::Ge | Comparison::Gt => cmp.holds(value + slack, threshold),
        Comparison::Le | Comparison::Lt => cmp.holds(value - slack, threshold),
    };
    let distance = if ok {
        0.0
    } else if cmp.is_lower_bound() {
        (threshold - value).max(f64::MIN_POSITIVE)
    } else {
        (value - threshold).max(f64::MIN_POSITIVE)
    };
    (ok, distance)
}

/// Evaluates candidates against a requirement set, caching by parameter vector.
pub struct Evaluator<'a> {
    model: &'a ExplicitPdtmc,
    reqs: &'a Requirements,
    cache: Option<Mutex<HashMap<Vec<u64>, Evaluation>>>,
    checks: AtomicU64,
}

impl<'a> Evaluator<'a> {
    pub fn new(model: &'a ExplicitPdtmc, reqs: &'a Requirements) -> Self {
        Evaluator { model, reqs, cache: Some(Mutex::new(HashMap::new())), checks: AtomicU64::new(0) }
    }

    /// An evaluator that never revisits candidates and so keeps no cache.
    pub fn uncached(model: &'a ExplicitPdtmc, reqs: &'a Requirements) -> Self {
        Evaluator { model, reqs, cache: None, checks: AtomicU64::new(0) }
    }

    pub fn model(&self) -> &ExplicitPdtmc {
        self.model
    }

    pub fn requirements(&self) -> &Requirements {
        self.reqs
    }

    /// Number of candidates actually model-checked, excluding cache hits.
    pub fn model_checks(&self) -> u64 {
        self.checks.load(Ordering::Relaxed)
    }

    pub fn evaluate(&self, values: &[f64]) -> Result<Evaluation, SynthError> {
        let key: Vec<u64> = values.iter().map(|v| v.to_bits()).collect();
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.lock().expect("cache lock").get(&key).cloned()) {
            return Ok(hit);
        }
        let dtmc = self.model.instantiate_values(values)?;
        let mut constraints = Vec::with_capacity(self.reqs.constraints.len());
        let mut feasible = true;
        let mut violation = 0.0;
        for c in &self.reqs.constraints {
            let value = pmc(c, &dtmc)?;
            if let Bound::Compare(cmp, threshold) = c.bound() {
                let (ok, distance) = check(cmp, value, threshold);
                feasible &= ok;
                violation += distance;
            }
            constraints.push(value);
        }
        let objectives = self.reqs.objectives.iter().map(|o| pmc(&o.query, &dtmc)).collect::<Result<Vec<_>, _>>()?;
        let eval = Evaluation { objectives, constraints, feasible, violation };
        self.checks.fetch_add(1, Ordering::Relaxed);
        if let Some(cache) = &self.cache {
            cache.lock().expect("cache lock").insert(key, eval.clone());
        }
        Ok(eval)
    }

    /// Evaluates `batch` in parallel; results keep the order of `batch`.
    pub fn evaluate_batch(&self, batch: &[Vec<f64>]) -> Result<Vec<Evaluation>, SynthError> {
        batch.par_iter().map(|v| self.evaluate(v)).collect()
    }
}
