//! Random model generators and independent oracles shared by integration tests.
#![allow(dead_code)]

use decsynth::markov::{ControllerAssignment, ExplicitPdtmc, ModelBuilder, StateId, StateTuple, Weight};
use decsynth::uncertainty::ConfusionTensor;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// A constant DTMC with labels `a`, `b` and one reward structure `r`, kept
/// alongside plain matrices for the oracles.
pub struct RandomChain {
    pub model: ExplicitPdtmc,
    pub p: Vec<Vec<f64>>,
    pub a: Vec<bool>,
    pub b: Vec<bool>,
    pub rho: Vec<f64>,
    pub iota: Vec<Vec<f64>>,
}

pub fn random_chain(rng: &mut impl Rng, n: usize) -> RandomChain {
    let mut p = vec![vec![0.0; n]; n];
    for (s, row) in p.iter_mut().enumerate() {
        if rng.gen_bool(0.15) {
            row[s] = 1.0;
            continue;
        }
        let degree = rng.gen_range(1..=n.min(3));
        let mut targets: Vec<usize> = (0..n).collect();
        for i in 0..degree {
            let j = rng.gen_range(i..n);
            targets.swap(i, j);
        }
        let weights: Vec<f64> = (0..degree).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        for (t, w) in targets[..degree].iter().zip(&weights) {
            row[*t] += w / total;
        }
    }
    let a: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
    let b: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
    let rho: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.6) { rng.gen_range(0.0..3.0) } else { 0.0 }).collect();
    let iota: Vec<Vec<f64>> = p
        .iter()
        .map(|row| {
            row.iter().map(|&q| if q > 0.0 && rng.gen_bool(0.5) { rng.gen_range(0.0..2.0) } else { 0.0 }).collect()
        })
        .collect();

    let mut builder = ModelBuilder::new();
    for s in 0..n {
        builder.add_state(StateTuple::new(vec![s as i64], 1, 1, vec![0])).unwrap();
    }
    for (s, row) in p.iter().enumerate() {
        for (t, &q) in row.iter().enumerate() {
            if q > 0.0 {
                builder.add_transition(StateId::from(s), StateId::from(t), Weight::constant(q)).unwrap();
            }
        }
    }
    for (name, sat) in [("a", &a), ("b", &b)] {
        builder.declare_label(name);
        for s in (0..n).filter(|&s| sat[s]) {
            builder.add_label(name, StateId::from(s));
        }
    }
    let r = builder.reward("r");
    for s in 0..n {
        if rho[s] > 0.0 {
            builder.add_state_reward(r, StateId::from(s), rho[s]).unwrap();
        }
        for t in 0..n {
            if iota[s][t] > 0.0 {
                builder.add_transition_reward(r, StateId::from(s), StateId::from(t), iota[s][t]).unwrap();
            }
        }
    }
    RandomChain { model: builder.finish().unwrap(), p, a, b, rho, iota }
}

/// `P[a U<=k b]` from `s` by enumerating every path of length at most `k`.
pub fn enumerate_bounded_until(c: &RandomChain, s: usize, k: u64) -> f64 {
    if c.b[s] {
        return 1.0;
    }
    if !c.a[s] || k == 0 {
        return 0.0;
    }
    (0..c.p.len()).filter(|&t| c.p[s][t] > 0.0).map(|t| c.p[s][t] * enumerate_bounded_until(c, t, k - 1)).sum()
}

/// Expected reward over the first `k` steps, by enumerating paths.
pub fn enumerate_cumulative(c: &RandomChain, s: usize, k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    c.rho[s]
        + (0..c.p.len())
            .filter(|&t| c.p[s][t] > 0.0)
            .map(|t| c.p[s][t] * (c.iota[s][t] + enumerate_cumulative(c, t, k - 1)))
            .sum::<f64>()
}

/// States that reach `target` along paths whose other states satisfy `through`.
fn can_reach(p: &[Vec<f64>], through: &[bool], target: &[bool]) -> Vec<bool> {
    let n = p.len();
    let mut reach = target.to_vec();
    loop {
        let mut changed = false;
        for s in 0..n {
            if !reach[s] && through[s] && (0..n).any(|t| p[s][t] > 0.0 && reach[t]) {
                reach[s] = true;
                changed = true;
            }
        }
        if !changed {
            return reach;
        }
    }
}

/// Solves `x = A x + b` on `vars` with `A` the restriction of `p`.
fn lu_solve(p: &[Vec<f64>], vars: &[usize], b: impl Fn(usize) -> f64) -> Vec<f64> {
    let m = vars.len();
    if m == 0 {
        return Vec::new();
    }
    let a = DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.0 } - p[vars[i]][vars[j]]);
    let rhs = DVector::from_fn(m, |i, _| b(vars[i]));
    let x = a.lu().solve(&rhs).expect("oracle system is non-singular");
    x.iter().copied().collect()
}

/// `P[a U b]` per state: graph reachability then a dense LU solve.
pub fn oracle_until(c: &RandomChain) -> Vec<f64> {
    let n = c.p.len();
    let through: Vec<bool> = (0..n).map(|s| c.a[s] && !c.b[s]).collect();
    let reach = can_reach(&c.p, &through, &c.b);
    let mut x: Vec<f64> = c.b.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let vars: Vec<usize> = (0..n).filter(|&s| reach[s] && !c.b[s]).collect();
    let sol = lu_solve(&c.p, &vars, |s| (0..n).filter(|&t| c.b[t]).map(|t| c.p[s][t]).sum());
    for (s, v) in vars.iter().zip(sol) {
        x[*s] = v;
    }
    x
}

/// Expected reward until reaching `b`, infinite unless `b` is reached almost
/// surely. Almost-sure reachability is decided by forward search: `s` fails
/// exactly when some state reachable from it without passing `b` cannot reach
/// `b` at all.
pub fn oracle_reach_reward(c: &RandomChain) -> Vec<f64> {
    let n = c.p.len();
    let all = vec![true; n];
    let reach = can_reach(&c.p, &all, &c.b);
    let sure: Vec<bool> = (0..n)
        .map(|s| {
            let mut seen = vec![false; n];
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(u) = stack.pop() {
                if !reach[u] {
                    return false;
                }
                if c.b[u] {
                    continue;
                }
                for t in 0..n {
                    if c.p[u][t] > 0.0 && !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
            true
        })
        .collect();
    let mut x: Vec<f64> = (0..n).map(|s| if sure[s] { 0.0 } else { f64::INFINITY }).collect();
    let vars: Vec<usize> = (0..n).filter(|&s| sure[s] && !c.b[s]).collect();
    let sol = lu_solve(&c.p, &vars, |s| c.rho[s] + (0..n).map(|t| c.p[s][t] * c.iota[s][t]).sum::<f64>());
    for (s, v) in vars.iter().zip(sol) {
        x[*s] = v;
    }
    x
}

/// `|a - b|`, treating two infinities as equal.
pub fn gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

/// A turn-structured perfect-perception pDTMC over `z < zs`, `k <= classes`,
/// `c < configs`, with labels `a`, `b` and reward structure `r`.
///
/// Controller contexts are dealt into two groups; a group shares one simplex
/// family per class. Some contexts decide with a constant distribution.
pub fn random_turn_model(rng: &mut impl Rng, zs: i64, classes: u32, configs: i64) -> ExplicitPdtmc {
    let mut b = ModelBuilder::new();
    let mut tuples = Vec::new();
    for z in 0..zs {
        for k in 1..=classes {
            for t in 1..=3u8 {
                for c in 0..configs {
                    tuples.push(StateTuple::new(vec![z], k, t, vec![c]));
                }
            }
        }
    }
    for t in &tuples {
        b.add_state(t.clone()).unwrap();
    }
    let id = |b: &ModelBuilder, t: StateTuple| b.find_state(&t).unwrap();
    let r = b.reward("r");
    let mut group: Vec<Option<usize>> =
        (0..zs * configs).map(|_| if rng.gen_bool(0.8) { Some(rng.gen_range(0..2)) } else { None }).collect();
    group[0] = Some(0);

    for s in &tuples {
        let src = id(&b, s.clone());
        let (z, k, c) = (s.z[0], s.k, s.c[0]);
        match s.t {
            1 => {
                let degree = rng.gen_range(1..=2);
                let weights: Vec<f64> = (0..degree).map(|_| rng.gen_range(0.1..1.0)).collect();
                let total: f64 = weights.iter().sum();
                for w in weights {
                    let t = if rng.gen_bool(0.75) { 2 } else { 1 };
                    let dst = id(&b, StateTuple::new(vec![rng.gen_range(0..zs)], k, t, vec![c]));
                    edge(&mut b, rng, r, src, dst, Weight::constant(w / total));
                }
            }
            2 => {
                let all = rng.gen_bool(0.5);
                let weights: Vec<f64> = (0..classes)
                    .map(|_| if all || rng.gen_bool(0.5) { rng.gen_range(0.1..1.0) } else { 0.0 })
                    .collect();
                let total: f64 = weights.iter().sum();
                if total == 0.0 {
                    let dst = id(&b, StateTuple::new(vec![z], k, 3, vec![c]));
                    edge(&mut b, rng, r, src, dst, Weight::constant(1.0));
                    continue;
                }
                for (i, w) in weights.into_iter().enumerate().filter(|(_, w)| *w > 0.0) {
                    let dst = id(&b, StateTuple::new(vec![z], i as u32 + 1, 3, vec![c]));
                    edge(&mut b, rng, r, src, dst, Weight::constant(w / total));
                }
            }
            _ => match group[(z * configs + c) as usize] {
                Some(g) => {
                    for cp in 0..configs {
                        let p = b.param(&format!("y{k}_g{g}_c{cp}"));
                        let dst = id(&b, StateTuple::new(vec![z], k, 1, vec![cp]));
                        edge(&mut b, rng, r, src, dst, Weight::param(p));
                    }
                }
                None => {
                    let cp = rng.gen_range(0..configs);
                    let dst = id(&b, StateTuple::new(vec![z], k, 1, vec![cp]));
                    edge(&mut b, rng, r, src, dst, Weight::constant(1.0));
                }
            },
        }
    }
    for name in ["a", "b"] {
        b.declare_label(name);
    }
    for s in &tuples {
        let src = id(&b, s.clone());
        if rng.gen_bool(0.7) {
            b.add_label("a", src);
        }
        if rng.gen_bool(0.2) {
            b.add_label("b", src);
        }
        if rng.gen_bool(0.5) {
            b.add_state_reward(r, src, rng.gen_range(0.0..2.0)).unwrap();
        }
    }
    let init = id(&b, StateTuple::new(vec![0], rng.gen_range(1..=classes), 1, vec![0]));
    b.set_initial(init);
    b.finish().unwrap()
}

/// Adds an edge, with a transition reward in `r` on roughly a third of them.
fn edge(b: &mut ModelBuilder, rng: &mut impl Rng, r: usize, src: StateId, dst: StateId, w: Weight) {
    b.add_transition(src, dst, w).unwrap();
    if rng.gen_bool(0.3) {
        b.add_transition_reward(r, src, dst, rng.gen_range(0.0..1.5)).unwrap();
    }
}

/// A tensor over `classes` and `verifiers` with random counts; every class
/// sometimes gets classified correctly with all verdicts true.
pub fn random_tensor(rng: &mut impl Rng, classes: usize, verifiers: usize) -> ConfusionTensor {
    let outcomes = 1usize << verifiers;
    let matrices: Vec<Vec<Vec<u64>>> = (0..outcomes)
        .map(|v| {
            (0..classes)
                .map(|k| {
                    (0..classes)
                        .map(|kp| {
                            let sure = v == outcomes - 1 && k == kp;
                            let base = if rng.gen_bool(0.4) { 0 } else { rng.gen_range(0..6) };
                            base + u64::from(sure)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    ConfusionTensor::from_counts(classes, verifiers, &matrices).unwrap()
}

/// A valid assignment for `model` with random values in every family.
pub fn random_assignment(rng: &mut impl Rng, model: &ExplicitPdtmc, deterministic: bool) -> ControllerAssignment {
    let mut values = vec![0.0; model.params().len()];
    for f in model.families() {
        if deterministic {
            let pick = rng.gen_range(0..f.members.len());
            values[f.members[pick].param.index()] = 1.0;
            continue;
        }
        let raw: Vec<f64> = f.members.iter().map(|_| rng.gen_range(0.0..1.0f64).powi(2)).collect();
        let total: f64 = raw.iter().sum::<f64>().max(1e-12);
        for (m, r) in f.members.iter().zip(raw) {
            values[m.param.index()] = r / total;
        }
        let sum: f64 = f.members.iter().map(|m| values[m.param.index()]).sum();
        values[f.members[0].param.index()] += 1.0 - sum;
        values[f.members[0].param.index()] = values[f.members[0].param.index()].clamp(0.0, 1.0);
    }
    ControllerAssignment::from_values(model, &values)
}
