use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::{ExplicitPdtmc, FamilyKey};
use super::{ModelError, STOCHASTIC_TOLERANCE};

/// Whether the controller observes the true class or the classifier output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerceptionKind {
    Perfect,
    Dnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberValue {
    pub param: String,
    /// Configuration chosen when this member fires.
    pub target: Vec<i64>,
    pub value: f64,
}

/// Values for one simplex family together with the decision contexts it governs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyValues {
    pub contexts: Vec<FamilyKey>,
    pub members: Vec<MemberValue>,
}

impl FamilyValues {
    pub fn sum(&self) -> f64 {
        self.members.iter().map(|m| m.value).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerAssignment {
    pub kind: PerceptionKind,
    pub families: Vec<FamilyValues>,
}

impl ControllerAssignment {
    pub fn empty(kind: PerceptionKind) -> Self {
        ControllerAssignment { kind, families: Vec::new() }
    }

    /// Assignment for `model` with `values[i]` for parameter `i`.
    pub fn from_values(model: &ExplicitPdtmc, values: &[f64]) -> Self {
        let kind = if model.is_augmented() { PerceptionKind::Dnn } else { PerceptionKind::Perfect };
        let families = model
            .families()
            .iter()
            .map(|f| FamilyValues {
                contexts: f.contexts.clone(),
                members: f
                    .members
                    .iter()
                    .map(|m| MemberValue {
                        param: model.param_name(m.param).to_string(),
                        target: m.target.clone(),
                        value: values[m.param.index()],
                    })
                    .collect(),
            })
            .collect();
        ControllerAssignment { kind, families }
    }

    /// Assignment for `model` from a name → value map. Unnamed parameters get 0.
    pub fn from_named(model: &ExplicitPdtmc, named: &BTreeMap<String, f64>) -> Self {
        let values: Vec<f64> = model.params().iter().map(|p| named.get(&p.name).copied().unwrap_or(0.0)).collect();
        Self::from_values(model, &values)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.families.iter().flat_map(|f| &f.members).find(|m| m.param == name).map(|m| m.value)
    }

    /// Value of the member choosing `target` in the family that governs `key`.
    pub fn slot_value(&self, key: &FamilyKey, target: &[i64]) -> Option<f64> {
        self.families
            .iter()
            .filter(|f| f.contexts.contains(key))
            .flat_map(|f| &f.members)
            .find(|m| m.target == target)
            .map(|m| m.value)
    }

    pub fn named_values(&self) -> BTreeMap<String, f64> {
        self.families.iter().flat_map(|f| &f.members).map(|m| (m.param.clone(), m.value)).collect()
    }

    pub fn num_params(&self) -> usize {
        self.families.iter().map(|f| f.members.len()).sum()
    }

    pub fn is_deterministic(&self) -> bool {
        self.families.iter().flat_map(|f| &f.members).all(|m| m.value == 0.0 || m.value == 1.0)
    }

    /// Checks value ranges and family sums.
    pub fn check(&self) -> Result<(), ModelError> {
        for f in &self.families {
            for m in &f.members {
                if !(0.0..=1.0).contains(&m.value) {
                    return Err(ModelError::ValueOutOfRange { name: m.param.clone(), value: m.value });
                }
            }
            let sum = f.sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                let members = f.members.iter().map(|m| m.param.as_str()).collect::<Vec<_>>().join(", ");
                return Err(ModelError::SimplexViolation { members, sum });
            }
        }
        Ok(())
    }
}
