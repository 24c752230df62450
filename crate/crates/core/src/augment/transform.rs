use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::AugmentError;
use crate::lang::check_turn_structure;
use crate::markov::{ExplicitPdtmc, ModelBuilder, StateId, StateTuple, Weight};
use crate::uncertainty::{verdict_bits, verdicts_from_index, ConfusionTensor};

/// Inputs to [`augment`] besides the model itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    pub tensor: ConfusionTensor,
    /// Prefix of the generated controller parameter names.
    pub controller_param_prefix: String,
    /// Whether the controller synthesised later should be deterministic.
    pub deterministic: bool,
}

impl AugmentationSpec {
    pub fn new(tensor: ConfusionTensor) -> Self {
        AugmentationSpec { tensor, controller_param_prefix: "x".into(), deterministic: false }
    }

    pub fn deterministic(mut self, yes: bool) -> Self {
        self.deterministic = yes;
        self
    }
}

fn fmt_vec(v: &[i64]) -> String {
    v.iter().map(|x| if *x < 0 { format!("m{}", -x) } else { x.to_string() }).collect::<Vec<_>>().join("-")
}

fn fmt_set<'a>(vs: impl IntoIterator<Item = &'a Vec<i64>>) -> String {
    vs.into_iter().map(|v| fmt_vec(v)).collect::<Vec<_>>().join(".")
}

/// Name of the perfect-perception parameter for choosing `target` in `(z, k, c)`.
pub fn perfect_param_name(prefix: &str, z: &[i64], k: u32, c: &[i64], target: &[i64]) -> String {
    format!("{prefix}_z{}_k{k}_c{}_{}", fmt_vec(z), fmt_vec(c), fmt_vec(target))
}

/// Name of a DNN-perception parameter. `zs` and `cs` list every system state
/// and configuration whose decisions the parameter governs.
pub fn dnn_param_name(
    prefix: &str,
    zs: &BTreeSet<Vec<i64>>,
    cs: &BTreeSet<Vec<i64>>,
    khat: u32,
    v: &[bool],
    target: &[i64],
) -> String {
    let verdicts = if v.is_empty() { String::new() } else { format!("_v{}", verdict_bits(v)) };
    format!("{prefix}_z{}_k{khat}{verdicts}_c{}_{}", fmt_set(zs), fmt_set(cs), fmt_vec(target))
}

/// Decision contexts `(z, c)` that must share DNN-perception parameters.
///
/// Two contexts are tied when some perfect-perception family governs both;
/// tied contexts with different sets of reachable choices stay apart.
struct Tying {
    group_of: HashMap<(Vec<i64>, Vec<i64>), usize>,
    names: Vec<(BTreeSet<Vec<i64>>, BTreeSet<Vec<i64>>, String)>,
}

impl Tying {
    fn new(model: &ExplicitPdtmc) -> Result<Self, AugmentError> {
        let mut contexts: BTreeMap<(Vec<i64>, Vec<i64>), Vec<Vec<i64>>> = BTreeMap::new();
        for f in model.families() {
            let mut targets: Vec<Vec<i64>> = f.members.iter().map(|m| m.target.clone()).collect();
            targets.sort();
            for key in &f.contexts {
                let ctx = (key.z.clone(), key.c.clone());
                match contexts.get(&ctx) {
                    Some(prev) if *prev != targets => {
                        return Err(AugmentError::ClassDependentTargets { z: key.z.clone(), c: key.c.clone() })
                    }
                    Some(_) => {}
                    None => {
                        contexts.insert(ctx, targets.clone());
                    }
                }
            }
        }
        let ids: HashMap<&(Vec<i64>, Vec<i64>), usize> = contexts.keys().enumerate().map(|(i, c)| (c, i)).collect();
        let mut parent: Vec<usize> = (0..ids.len()).collect();
        for f in model.families() {
            let mut first = None;
            for key in &f.contexts {
                let id = ids[&(key.z.clone(), key.c.clone())];
                match first {
                    None => first = Some(id),
                    Some(a) => {
                        let (ra, rb) = (find(&mut parent, a), find(&mut parent, id));
                        if ra != rb {
                            parent[rb.max(ra)] = rb.min(ra);
                        }
                    }
                }
            }
        }

        // Groups keyed by (component root, choice set), numbered in context order.
        let mut group_ids: BTreeMap<(usize, Vec<Vec<i64>>), usize> = BTreeMap::new();
        let mut members: Vec<(BTreeSet<Vec<i64>>, BTreeSet<Vec<i64>>, usize)> = Vec::new();
        let mut group_of = HashMap::new();
        for (ctx, targets) in &contexts {
            let root = find(&mut parent, ids[ctx]);
            let next = group_ids.len();
            let g = *group_ids.entry((root, targets.clone())).or_insert(next);
            if g == members.len() {
                members.push((BTreeSet::new(), BTreeSet::new(), root));
            }
            members[g].0.insert(ctx.0.clone());
            members[g].1.insert(ctx.1.clone());
            group_of.insert(ctx.clone(), g);
        }
        let mut per_root: BTreeMap<usize, usize> = BTreeMap::new();
        for (_, _, root) in &members {
            *per_root.entry(*root).or_default() += 1;
        }
        let mut seen_in_root: BTreeMap<usize, usize> = BTreeMap::new();
        let names = members
            .into_iter()
            .map(|(zs, cs, root)| {
                let split = if per_root[&root] > 1 {
                    let i = seen_in_root.entry(root).or_default();
                    *i += 1;
                    format!("s{i}")
                } else {
                    String::new()
                };
                (zs, cs, split)
            })
            .collect();
        Ok(Tying { group_of, names })
    }

    fn param_name(&self, prefix: &str, z: &[i64], c: &[i64], khat: u32, v: &[bool], target: &[i64]) -> String {
        let (zs, cs, split) = &self.names[self.group_of[&(z.to_vec(), c.to_vec())]];
        let name = dnn_param_name(prefix, zs, cs, khat, v, target);
        if split.is_empty() {
            return name;
        }
        let cut = name.rfind('_').expect("names end in a target");
        format!("{}{}{}", &name[..cut], split, &name[cut..])
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Builds the DNN-perception pDTMC of `model` under the tensor in `spec`.
///
/// States are `(z, k, khat, v, t, c)` reachable from `(z0, k0, k0, true..true, t0, c0)`.
/// System moves keep `(khat, v)`, environment moves are split over every
/// `(khat', v')` with non-zero probability for the new class, and controller
/// rows get parameters indexed by `(z, khat, v, c, c')`. Labels and rewards are
/// those of the perfect-perception projection.
pub fn augment(model: &ExplicitPdtmc, spec: &AugmentationSpec) -> Result<ExplicitPdtmc, AugmentError> {
    if model.is_augmented() {
        return Err(AugmentError::AlreadyAugmented);
    }
    let tensor = &spec.tensor;
    if tensor.classes() != model.num_classes() {
        return Err(AugmentError::ArityMismatch { model: model.num_classes(), tensor: tensor.classes() });
    }
    if model.families().is_empty() {
        return Err(AugmentError::MissingRoles("the model has no controller parameters".into()));
    }
    let report = model.validate();
    if !report.is_empty() {
        return Err(AugmentError::Invalid(report));
    }
    let report = check_turn_structure(model);
    if !report.is_empty() {
        return Err(AugmentError::NotTurnStructured(report));
    }
    for (i, row) in model.rows().iter().enumerate() {
        let t = model.state(StateId::from(i)).t;
        if t != 3 && row.iter().any(|e| e.weight.param.is_some()) {
            return Err(AugmentError::StrayParameter { state: i, t });
        }
    }
    let tying = Tying::new(model)?;
    let prefix = spec.controller_param_prefix.as_str();
    let n = tensor.verifiers();

    let mut labels_of: Vec<Vec<&str>> = vec![Vec::new(); model.num_states()];
    for (name, states) in model.labels() {
        for s in states {
            labels_of[s.index()].push(name);
        }
    }

    let mut b = ModelBuilder::new();
    for name in model.labels().keys() {
        b.declare_label(name);
    }
    let reward_ids: Vec<usize> = model.rewards().iter().map(|r| b.reward(&r.name)).collect();

    let s0 = model.state(model.initial());
    let (init, _) = b.intern(s0.clone().with_perception(s0.k, vec![true; n]))?;
    b.set_initial(init);
    let mut queue = VecDeque::from([(init, model.initial())]);
    while let Some((hat, base)) = queue.pop_front() {
        let tuple = b.state_tuple(hat).clone();
        let (khat, v) = tuple.perception.clone().expect("augmented states carry perception");
        for &name in &labels_of[base.index()] {
            b.add_label(name, hat);
        }
        let mut successors: Vec<(StateTuple, StateId, Weight)> = Vec::new();
        for e in model.row(base) {
            let next = model.state(e.target);
            match tuple.t {
                2 => {
                    for (kp, vi, p) in tensor.support(next.k) {
                        let perceived = next.clone().with_perception(kp, verdicts_from_index(n, vi));
                        successors.push((perceived, e.target, e.weight.scaled(p)));
                    }
                }
                3 if e.weight.param.is_some() => {
                    let name = tying.param_name(prefix, &tuple.z, &tuple.c, khat, &v, &next.c);
                    let w = Weight::param(b.param(&name)).scaled(e.weight.coeff);
                    successors.push((next.clone().with_perception(khat, v.clone()), e.target, w));
                }
                _ => successors.push((next.clone().with_perception(khat, v.clone()), e.target, e.weight)),
            }
        }
        for (r, &id) in model.rewards().iter().zip(&reward_ids) {
            let rho = r.state_reward(base);
            if rho != 0.0 {
                b.add_state_reward(id, hat, rho)?;
            }
        }
        for (next, next_base, w) in successors {
            let (id, fresh) = b.intern(next)?;
            if fresh {
                queue.push_back((id, next_base));
            }
            b.add_transition(hat, id, w)?;
            for (r, &rid) in model.rewards().iter().zip(&reward_ids) {
                let iota = r.transition_reward(base, next_base);
                if iota != 0.0 {
                    b.add_transition_reward(rid, hat, id, iota)?;
                }
            }
        }
    }
    Ok(b.finish()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{build_source, BuildOptions};
    use crate::markov::Issue;
    use crate::models;

    fn robot() -> ExplicitPdtmc {
        build_source(models::ROBOT, &BuildOptions::default()).unwrap()
    }

    fn fixture_tensor() -> ConfusionTensor {
        // v = false: [k=1: (1,1) 3, (1,2) 1], [k=2: (2,1) 4, (2,2) 5]; v = true: the rest out of 100.
        let f = vec![vec![3, 1], vec![4, 5]];
        let t = vec![vec![90, 6], vec![1, 90]];
        ConfusionTensor::from_counts(2, 1, &[f, t]).unwrap()
    }

    #[test]
    fn names_are_portable() {
        let zs = BTreeSet::from([vec![2]]);
        let cs = BTreeSet::from([vec![0], vec![1]]);
        assert_eq!(dnn_param_name("x", &zs, &cs, 2, &[true, false], &[1]), "x_z2_k2_v10_c0.1_1");
        assert_eq!(dnn_param_name("x", &zs, &cs, 1, &[], &[-1, 3]), "x_z2_k1_c0.1_m1-3");
        assert_eq!(perfect_param_name("x", &[2], 1, &[0], &[1]), "x_z2_k1_c0_1");
    }

    #[test]
    fn robot_gets_four_families() {
        let aug = augment(&robot(), &AugmentationSpec::new(fixture_tensor())).unwrap();
        assert_eq!(aug.families().len(), 4);
        assert_eq!(aug.params().len(), 8);
        let mut names: Vec<&str> = aug.params().iter().map(|p| p.name.as_str()).collect();
        names.sort();
        assert_eq!(names[0], "x_z2_k1_v0_c0.1_0");
        assert!(aug.validate().is_empty());
        assert!(check_turn_structure(&aug).is_empty());
        assert!(aug.is_augmented());
    }

    #[test]
    fn initial_state_sees_the_true_class_verified() {
        let model = robot();
        let aug = augment(&model, &AugmentationSpec::new(fixture_tensor())).unwrap();
        let s0 = aug.state(aug.initial());
        assert_eq!(s0.base(), *model.state(model.initial()));
        assert_eq!(s0.perception, Some((s0.k, vec![true])));
    }

    #[test]
    fn errors() {
        let model = robot();
        let three = ConfusionTensor::perfect(3, 1);
        assert!(matches!(
            augment(&model, &AugmentationSpec::new(three)),
            Err(AugmentError::ArityMismatch { model: 2, tensor: 3 })
        ));
        let aug = augment(&model, &AugmentationSpec::new(fixture_tensor())).unwrap();
        assert!(matches!(augment(&aug, &AugmentationSpec::new(fixture_tensor())), Err(AugmentError::AlreadyAugmented)));
        let constant = model.instantiate_values(&[0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            augment(&constant, &AugmentationSpec::new(fixture_tensor())),
            Err(AugmentError::MissingRoles(_))
        ));
    }

    #[test]
    fn broken_frame_is_rejected() {
        let mut b = ModelBuilder::new();
        let a = b.add_state(StateTuple::new(vec![0], 1, 3, vec![0])).unwrap();
        let c = b.add_state(StateTuple::new(vec![0], 2, 1, vec![0])).unwrap();
        let x = b.param("x");
        b.add_transition(a, c, Weight::param(x)).unwrap();
        b.add_transition(c, c, Weight::constant(1.0)).unwrap();
        let model = b.finish().unwrap();
        match augment(&model, &AugmentationSpec::new(ConfusionTensor::perfect(2, 0))) {
            Err(AugmentError::NotTurnStructured(r)) => {
                assert!(matches!(r.issues[0], Issue::Frame { .. }))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn state_count_is_bounded() {
        let model = robot();
        let aug = augment(&model, &AugmentationSpec::new(fixture_tensor())).unwrap();
        assert!(aug.num_states() <= model.num_states() * 2 * 2);
        assert!(aug.num_states() > model.num_states());
    }
}
