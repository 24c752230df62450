use std::collections::VecDeque;

use super::ast::{Bound, PathFormula, PctlQuery, RewardFormula, StateFormula};
use super::solve::LinearSystem;
use super::PctlError;
use crate::markov::{ExplicitPdtmc, RewardStructure};

/// Quantitative value of `query` at the initial state.
///
/// Reachability rewards are `+∞` when the target is reached with probability
/// below one.
pub fn pmc(query: &PctlQuery, model: &ExplicitPdtmc) -> Result<f64, PctlError> {
    Ok(state_values(query, model)?[model.initial().index()])
}

/// Compares the value at the initial state against the query's bound.
pub fn satisfies(query: &PctlQuery, model: &ExplicitPdtmc) -> Result<bool, PctlError> {
    let Bound::Compare(cmp, threshold) = query.bound() else {
        return Err(PctlError::NoBound(query.to_string()));
    };
    Ok(cmp.holds(pmc(query, model)?, threshold))
}

/// Quantitative value of `query` in every state.
pub fn state_values(query: &PctlQuery, model: &ExplicitPdtmc) -> Result<Vec<f64>, PctlError> {
    let checker = Checker::new(model)?;
    match query {
        PctlQuery::Prob { path, .. } => checker.path(path),
        PctlQuery::Reward { reward, formula, .. } => {
            let structure = checker.reward(reward.as_deref())?;
            let step = checker.expected_step_reward(structure);
            match formula {
                RewardFormula::Cumulative(k) => Ok(checker.cumulative(&step, *k)),
                RewardFormula::Reach(target) => checker.reach_reward(&step, &checker.formula(target)?),
            }
        }
    }
}

/// States satisfying `formula`.
pub fn check_formula(formula: &StateFormula, model: &ExplicitPdtmc) -> Result<Vec<bool>, PctlError> {
    Checker::new(model)?.formula(formula)
}

/// Graph classification of an until formula: states with probability exactly
/// zero and exactly one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UntilClasses {
    pub prob0: Vec<bool>,
    pub prob1: Vec<bool>,
}

pub fn until_classes(model: &ExplicitPdtmc, phi1: &[bool], phi2: &[bool]) -> UntilClasses {
    let preds = predecessors(model);
    classify(&preds, phi1, phi2)
}

struct Checker<'a> {
    model: &'a ExplicitPdtmc,
    /// Successor lists as `(target, probability)` with zero entries removed.
    succ: Vec<Vec<(usize, f64)>>,
    preds: Vec<Vec<usize>>,
}

fn predecessors(model: &ExplicitPdtmc) -> Vec<Vec<usize>> {
    let mut preds = vec![Vec::new(); model.num_states()];
    for (s, row) in model.rows().iter().enumerate() {
        for e in row.iter().filter(|e| e.weight.is_possible()) {
            preds[e.target.index()].push(s);
        }
    }
    preds
}

/// Backward closure of `start` through states allowed by `through`.
fn backward(preds: &[Vec<usize>], start: &[bool], through: impl Fn(usize) -> bool) -> Vec<bool> {
    let mut seen = start.to_vec();
    let mut queue: VecDeque<usize> = (0..start.len()).filter(|&s| start[s]).collect();
    while let Some(s) = queue.pop_front() {
        for &p in &preds[s] {
            if !seen[p] && through(p) {
                seen[p] = true;
                queue.push_back(p);
            }
        }
    }
    seen
}

fn classify(preds: &[Vec<usize>], phi1: &[bool], phi2: &[bool]) -> UntilClasses {
    let can_reach = backward(preds, phi2, |p| phi1[p] && !phi2[p]);
    let prob0: Vec<bool> = can_reach.iter().map(|r| !r).collect();
    let can_fail = backward(preds, &prob0, |p| phi1[p] && !phi2[p]);
    let prob1 = can_fail.iter().map(|f| !f).collect();
    UntilClasses { prob0, prob1 }
}

impl<'a> Checker<'a> {
    fn new(model: &'a ExplicitPdtmc) -> Result<Self, PctlError> {
        if model.is_parametric() {
            return Err(PctlError::Parametric { params: model.params().len() });
        }
        let succ = model
            .rows()
            .iter()
            .map(|row| {
                row.iter().filter(|e| e.weight.is_possible()).map(|e| (e.target.index(), e.weight.coeff)).collect()
            })
            .collect();
        Ok(Checker { model, succ, preds: predecessors(model) })
    }

    fn n(&self) -> usize {
        self.model.num_states()
    }

    fn formula(&self, f: &StateFormula) -> Result<Vec<bool>, PctlError> {
        Ok(match f {
            StateFormula::True => vec![true; self.n()],
            StateFormula::Label(name) => {
                let mut sat = vec![false; self.n()];
                match self.model.label(name) {
                    Some(states) => states.iter().for_each(|s| sat[s.index()] = true),
                    None if name == "init" => sat[self.model.initial().index()] = true,
                    None => return Err(PctlError::UnknownLabel(name.clone())),
                }
                sat
            }
            StateFormula::Not(a) => self.formula(a)?.into_iter().map(|b| !b).collect(),
            StateFormula::And(a, b) => {
                let (a, b) = (self.formula(a)?, self.formula(b)?);
                a.into_iter().zip(b).map(|(x, y)| x && y).collect()
            }
            StateFormula::Prob { cmp, threshold, path } => {
                self.path(path)?.into_iter().map(|p| cmp.holds(p, *threshold)).collect()
            }
        })
    }

    fn expect(&self, x: &[f64], s: usize) -> f64 {
        self.succ[s].iter().map(|&(t, p)| p * x[t]).sum()
    }

    fn path(&self, path: &PathFormula) -> Result<Vec<f64>, PctlError> {
        match path {
            PathFormula::Next(a) => {
                let sat: Vec<f64> = self.formula(a)?.into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect();
                Ok((0..self.n()).map(|s| self.expect(&sat, s)).collect())
            }
            PathFormula::BoundedUntil(a, b, k) => {
                let (phi1, phi2) = (self.formula(a)?, self.formula(b)?);
                Ok(self.bounded_until(&phi1, &phi2, *k))
            }
            PathFormula::Until(a, b) => {
                let (phi1, phi2) = (self.formula(a)?, self.formula(b)?);
                self.until(&phi1, &phi2)
            }
        }
    }

    fn bounded_until(&self, phi1: &[bool], phi2: &[bool], k: u64) -> Vec<f64> {
        let mut x: Vec<f64> = phi2.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let live: Vec<usize> = (0..self.n()).filter(|&s| phi1[s] && !phi2[s]).collect();
        let mut next = x.clone();
        for _ in 0..k {
            for &s in &live {
                next[s] = self.expect(&x, s);
            }
            std::mem::swap(&mut x, &mut next);
        }
        x
    }

    fn until(&self, phi1: &[bool], phi2: &[bool]) -> Result<Vec<f64>, PctlError> {
        let classes = classify(&self.preds, phi1, phi2);
        let mut x: Vec<f64> = classes.prob1.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let maybe: Vec<bool> = (0..self.n()).map(|s| !classes.prob0[s] && !classes.prob1[s]).collect();
        self.solve_on(&maybe, &mut x, |s| {
            self.succ[s].iter().filter(|&&(t, _)| classes.prob1[t]).map(|&(_, p)| p).sum()
        })?;
        Ok(x)
    }

    /// Solves `x_s = b(s) + Σ P(s,t) x_t` on `unknown` states, treating the
    /// values already in `x` as fixed elsewhere. `b` must already account for
    /// every fixed successor with a non-zero value.
    fn solve_on(&self, unknown: &[bool], x: &mut [f64], b: impl Fn(usize) -> f64) -> Result<(), PctlError> {
        let vars: Vec<usize> = (0..self.n()).filter(|&s| unknown[s]).collect();
        if vars.is_empty() {
            return Ok(());
        }
        let mut local = vec![usize::MAX; self.n()];
        for (i, &s) in vars.iter().enumerate() {
            local[s] = i;
        }
        let sys = LinearSystem {
            rows: vars
                .iter()
                .map(|&s| self.succ[s].iter().filter(|&&(t, _)| unknown[t]).map(|&(t, p)| (local[t], p)).collect())
                .collect(),
            b: vars.iter().map(|&s| b(s)).collect(),
        };
        for (s, v) in vars.iter().zip(sys.solve()?) {
            x[*s] = v;
        }
        Ok(())
    }

    fn reward(&self, name: Option<&str>) -> Result<&'a RewardStructure, PctlError> {
        match name {
            Some(n) => self.model.reward(n).ok_or_else(|| PctlError::UnknownRewardStructure(n.to_string())),
            None => match self.model.rewards() {
                [only] => Ok(only),
                _ => Err(PctlError::UnknownRewardStructure(format!(
                    "(unnamed; the model has {} reward structures)",
                    self.model.rewards().len()
                ))),
            },
        }
    }

    /// `ρ(s) + Σ_t P(s,t) ι(s,t)` for every state.
    fn expected_step_reward(&self, r: &RewardStructure) -> Vec<f64> {
        let mut step = vec![0.0; self.n()];
        for (s, v) in &r.state_rewards {
            step[s.index()] += v;
        }
        for ((s, t), v) in &r.transition_rewards {
            let p: f64 = self.succ[s.index()].iter().filter(|&&(u, _)| u == t.index()).map(|&(_, p)| p).sum();
            step[s.index()] += p * v;
        }
        step
    }

    fn cumulative(&self, step: &[f64], k: u64) -> Vec<f64> {
        let mut x = vec![0.0; self.n()];
        let mut next = x.clone();
        for _ in 0..k {
            for s in 0..self.n() {
                next[s] = step[s] + self.expect(&x, s);
            }
            std::mem::swap(&mut x, &mut next);
        }
        x
    }

    fn reach_reward(&self, step: &[f64], target: &[bool]) -> Result<Vec<f64>, PctlError> {
        let all = vec![true; self.n()];
        let classes = classify(&self.preds, &all, target);
        let mut x: Vec<f64> = (0..self.n()).map(|s| if classes.prob1[s] { 0.0 } else { f64::INFINITY }).collect();
        let unknown: Vec<bool> = (0..self.n()).map(|s| classes.prob1[s] && !target[s]).collect();
        self.solve_on(&unknown, &mut x, |s| step[s])?;
        Ok(x)
    }
}
