use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::transform::perfect_param_name;
use super::AugmentError;
use crate::markov::{
    ControllerAssignment, ExplicitPdtmc, FamilyKey, FamilyValues, MemberValue, Observation, PerceptionKind, StateId,
};
use crate::pctl::{pmc, PctlQuery};
use crate::uncertainty::{verdict_index, ConfusionTensor};

/// Gaps above this are reported as equivalence failures.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-6;

type Context = (Vec<i64>, Vec<i64>);
type Choices = BTreeMap<Vec<i64>, f64>;

/// The perfect-perception controller with the same path measure as `dnn`:
/// `x_{zkcc'} = sum over (khat, v) of p_{k khat v} * x_{z khat v c c'}`.
///
/// One family is produced per decision context `(z, k, c)`. Contexts where
/// `dnn` lacks a value for some perception with non-zero probability are
/// unreachable in the augmented model and are left out.
pub fn fold_controller(
    dnn: &ControllerAssignment,
    tensor: &ConfusionTensor,
) -> Result<ControllerAssignment, AugmentError> {
    let invalid = |reason: String| AugmentError::InvalidAssignment { expected: "DNN-perception", reason };
    if dnn.kind != PerceptionKind::Dnn {
        return Err(invalid("it is a perfect-perception assignment".into()));
    }
    dnn.check().map_err(|e| invalid(e.to_string()))?;

    let mut table: BTreeMap<Context, BTreeMap<(u32, usize), Choices>> = BTreeMap::new();
    for family in &dnn.families {
        for key in &family.contexts {
            let Observation::Perceived { khat, v } = &key.obs else {
                return Err(invalid(format!("context {key:?} observes the true class")));
            };
            if v.len() != tensor.verifiers() || *khat as usize > tensor.classes() || *khat == 0 {
                return Err(invalid(format!("context {key:?} does not fit the tensor")));
            }
            let choices =
                table.entry((key.z.clone(), key.c.clone())).or_default().entry((*khat, verdict_index(v))).or_default();
            for m in &family.members {
                choices.insert(m.target.clone(), m.value);
            }
        }
    }

    let mut families = Vec::new();
    for ((z, c), perceived) in &table {
        let targets: Vec<&Vec<i64>> = {
            let mut t: Vec<&Vec<i64>> = perceived.values().flat_map(|ch| ch.keys()).collect();
            t.sort();
            t.dedup();
            t
        };
        for k in 1..=tensor.classes() as u32 {
            let support = tensor.support(k);
            if support.iter().any(|(kp, vi, _)| !perceived.contains_key(&(*kp, *vi))) {
                continue;
            }
            let members = targets
                .iter()
                .map(|target| MemberValue {
                    param: perfect_param_name("x", z, k, c, target),
                    target: (*target).clone(),
                    value: support
                        .iter()
                        .map(|(kp, vi, p)| p * perceived[&(*kp, *vi)].get(*target).copied().unwrap_or(0.0))
                        .sum(),
                })
                .collect();
            families.push(FamilyValues {
                contexts: vec![FamilyKey { z: z.clone(), obs: Observation::True(k), c: c.clone() }],
                members,
            });
        }
    }
    Ok(ControllerAssignment { kind: PerceptionKind::Perfect, families })
}

/// The DNN-perception controller that acts on `khat` as `perfect` acts on `k`.
///
/// Each parameter of `augmented` takes the value of the perfect-perception
/// decision for the predicted class at the first of its contexts where one exists.
pub fn lift_controller(
    perfect: &ControllerAssignment,
    augmented: &ExplicitPdtmc,
) -> Result<ControllerAssignment, AugmentError> {
    let mut values = Vec::with_capacity(augmented.params().len());
    for p in augmented.params() {
        let value = p.slots.iter().find_map(|slot| {
            let Observation::Perceived { khat, .. } = slot.key.obs else {
                return None;
            };
            let key = FamilyKey { z: slot.key.z.clone(), obs: Observation::True(khat), c: slot.key.c.clone() };
            perfect.slot_value(&key, &slot.target)
        });
        values.push(value.ok_or_else(|| AugmentError::InvalidAssignment {
            expected: "perfect-perception",
            reason: format!("no decision covers `{}`", p.name),
        })?);
    }
    Ok(ControllerAssignment::from_values(augmented, &values))
}

/// Pairs of controller states of an augmented model that differ only in the
/// true class but are governed by different parameters. Empty when every
/// decision depends on `(z, khat, v, c)` alone.
pub fn k_dependence(augmented: &ExplicitPdtmc) -> Vec<(StateId, StateId)> {
    let mut first: BTreeMap<FamilyKey, (StateId, Vec<(String, Vec<i64>)>)> = BTreeMap::new();
    let mut clashes = Vec::new();
    for (i, row) in augmented.rows().iter().enumerate() {
        let s = StateId::from(i);
        let tuple = augmented.state(s);
        if tuple.t != 3 || tuple.perception.is_none() {
            continue;
        }
        let mut params: Vec<(String, Vec<i64>)> = row
            .iter()
            .filter_map(|e| {
                e.weight.param.map(|p| (augmented.param_name(p).to_string(), augmented.state(e.target).c.clone()))
            })
            .collect();
        params.sort();
        match first.get(&tuple.family_key()) {
            Some((other, seen)) if *seen != params => clashes.push((*other, s)),
            Some(_) => {}
            None => {
                first.insert(tuple.family_key(), (s, params));
            }
        }
    }
    clashes
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceRow {
    pub query: String,
    pub augmented: f64,
    pub folded: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub rows: Vec<EquivalenceRow>,
}

impl EquivalenceReport {
    pub fn max_gap(&self) -> f64 {
        self.rows.iter().map(|r| r.gap).fold(0.0, f64::max)
    }

    pub fn flagged(&self) -> impl Iterator<Item = &EquivalenceRow> {
        self.rows.iter().filter(|r| !(r.gap <= EQUIVALENCE_TOLERANCE))
    }

    pub fn holds(&self) -> bool {
        self.flagged().next().is_none()
    }
}

impl fmt::Display for EquivalenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            let mark = if r.gap <= EQUIVALENCE_TOLERANCE { "ok" } else { "GAP" };
            writeln!(f, "{mark:>3}  {}  augmented={} folded={} gap={:.3e}", r.query, r.augmented, r.folded, r.gap)?;
        }
        Ok(())
    }
}

/// Compares every query on `augmented` under `dnn` with the same query on
/// the reachable part of `perfect` under the folded controller.
pub fn check_equivalence(
    perfect: &ExplicitPdtmc,
    augmented: &ExplicitPdtmc,
    dnn: &ControllerAssignment,
    tensor: &ConfusionTensor,
    queries: &[PctlQuery],
) -> Result<EquivalenceReport, AugmentError> {
    let dnn_model = augmented.instantiate(dnn)?;
    let folded = fold_controller(dnn, tensor)?;
    // Decisions the augmented model never reaches have no folded value.
    let perfect_model = perfect.reachable_submodel().instantiate(&folded)?;
    let mut rows = Vec::with_capacity(queries.len());
    for q in queries {
        let a = pmc(q, &dnn_model)?;
        let b = pmc(q, &perfect_model)?;
        let gap = if a == b { 0.0 } else { (a - b).abs() };
        rows.push(EquivalenceRow { query: q.to_string(), augmented: a, folded: b, gap });
    }
    Ok(EquivalenceReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{augment, AugmentationSpec};
    use crate::lang::{build_source, BuildOptions};
    use crate::models;
    use crate::pctl::parse_query;

    fn robot() -> ExplicitPdtmc {
        build_source(models::ROBOT, &BuildOptions::default()).unwrap()
    }

    /// p(2,2,T)=0.9, p(2,2,F)=0.05, p(2,1,T)=0.01, p(2,1,F)=0.04; class 1 is mostly right.
    fn fixture_tensor() -> ConfusionTensor {
        let verdict_false = vec![vec![2, 1], vec![4, 5]];
        let verdict_true = vec![vec![95, 2], vec![1, 90]];
        ConfusionTensor::from_counts(2, 1, &[verdict_false, verdict_true]).unwrap()
    }

    fn named(aug: &ExplicitPdtmc, f: impl Fn(u32, bool, i64) -> f64) -> ControllerAssignment {
        let values: Vec<f64> = aug
            .params()
            .iter()
            .map(|p| {
                let slot = &p.slots[0];
                let Observation::Perceived { khat, v } = &slot.key.obs else { unreachable!() };
                f(*khat, v[0], slot.target[0])
            })
            .collect();
        ControllerAssignment::from_values(aug, &values)
    }

    #[test]
    fn fold_substitutes_the_tensor() {
        let aug = augment(&robot(), &AugmentationSpec::new(fixture_tensor())).unwrap();
        // Wait exactly when a collider is predicted and verified.
        let dnn = named(&aug, |khat, v, wait| {
            let waits = khat == 2 && v;
            if (wait == 1) == waits {
                1.0
            } else {
                0.0
            }
        });
        let folded = fold_controller(&dnn, &fixture_tensor()).unwrap();
        let key = FamilyKey { z: vec![2], obs: Observation::True(2), c: vec![0] };
        assert!((folded.slot_value(&key, &[1]).unwrap() - 0.9).abs() < 1e-15);
        assert!((folded.slot_value(&key, &[0]).unwrap() - 0.1).abs() < 1e-15);
        for f in &folded.families {
            assert!((f.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_tensor_folds_to_identical_decisions() {
        let model = robot();
        let tensor = ConfusionTensor::perfect(2, 1);
        let aug = augment(&model, &AugmentationSpec::new(tensor.clone())).unwrap();
        let dnn = named(&aug, |khat, _, wait| if (wait == 1) == (khat == 2) { 1.0 } else { 0.0 });
        let folded = fold_controller(&dnn, &tensor).unwrap();
        for k in 1..=2u32 {
            let key = FamilyKey { z: vec![2], obs: Observation::True(k), c: vec![0] };
            assert_eq!(folded.slot_value(&key, &[1]), Some(if k == 2 { 1.0 } else { 0.0 }));
        }
        assert!(folded.is_deterministic());
    }

    #[test]
    fn equivalence_on_the_robot() {
        let model = robot();
        let tensor = fixture_tensor();
        let aug = augment(&model, &AugmentationSpec::new(tensor.clone())).unwrap();
        let dnn = named(&aug, |khat, v, wait| {
            let w = match (khat, v) {
                (1, true) => 0.1,
                (1, false) => 0.4,
                (2, true) => 0.8,
                _ => 0.55,
            };
            if wait == 1 {
                w
            } else {
                1.0 - w
            }
        });
        let queries = [
            parse_query(r#"P=? [ !"collision" U "done" ]"#).unwrap(),
            parse_query(r#"R{"time"}=? [ F "done" ]"#).unwrap(),
        ];
        let report = check_equivalence(&model, &aug, &dnn, &tensor, &queries).unwrap();
        assert!(report.holds(), "{report}");
        assert!(report.max_gap() < 1e-9);
    }

    #[test]
    fn lifted_controller_reproduces_the_original_under_a_perfect_tensor() {
        let model = robot();
        let aug = augment(&model, &AugmentationSpec::new(ConfusionTensor::perfect(2, 1))).unwrap();
        let mut values = BTreeMap::new();
        for (name, v) in [("x1_wait", 0.3), ("x1_go", 0.7), ("x2_wait", 0.6), ("x2_go", 0.4)] {
            values.insert(name.to_string(), v);
        }
        let perfect = ControllerAssignment::from_named(&model, &values);
        let dnn = lift_controller(&perfect, &aug).unwrap();
        let q = parse_query(r#"P=? [ !"collision" U "done" ]"#).unwrap();
        let a = pmc(&q, &model.instantiate(&perfect).unwrap()).unwrap();
        let b = pmc(&q, &aug.instantiate(&dnn).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn decisions_do_not_depend_on_the_true_class() {
        let aug = augment(&robot(), &AugmentationSpec::new(fixture_tensor())).unwrap();
        assert!(k_dependence(&aug).is_empty());
    }

    #[test]
    fn perfect_assignment_is_rejected_by_fold() {
        let model = robot();
        let perfect = ControllerAssignment::from_values(&model, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(fold_controller(&perfect, &fixture_tensor()), Err(AugmentError::InvalidAssignment { .. })));
    }
}
