use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::model::{ExplicitPdtmc, StateId};
use super::STOCHASTIC_TOLERANCE;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum Issue {
    /// A constant row whose weights do not sum to one.
    RowSum {
        state: StateId,
        sum: f64,
        deviation: f64,
    },
    NegativeWeight {
        state: StateId,
        target: StateId,
        value: f64,
    },
    DanglingTarget {
        state: StateId,
        target: usize,
    },
    /// A row with parameter entries that is not exactly one full simplex family.
    ParametricRow {
        state: StateId,
        reason: String,
    },
    /// A transition that breaks the turn-structure frame conditions.
    Frame {
        from: StateId,
        to: StateId,
        rule: String,
    },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::RowSum { state, sum, deviation } => {
                write!(f, "state {state}: outgoing weights sum to {sum} (deviation {deviation:.3e})")
            }
            Issue::NegativeWeight { state, target, value } => {
                write!(f, "state {state}: negative weight {value} towards {target}")
            }
            Issue::DanglingTarget { state, target } => {
                write!(f, "state {state}: transition to unknown state {target}")
            }
            Issue::ParametricRow { state, reason } => write!(f, "state {state}: {reason}"),
            Issue::Frame { from, to, rule } => write!(f, "transition {from} -> {to}: {rule}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn len(&self) -> usize {
        self.issues.len()
    }

    pub fn push(&mut self, issue: Issue) {
        self.issues.push(issue);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter()
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.issues.extend(other.issues);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return writeln!(f, "no issues");
        }
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

pub(crate) fn validate(model: &ExplicitPdtmc) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = model.num_states();
    let member_sets: Vec<BTreeSet<_>> =
        model.families().iter().map(|f| f.members.iter().map(|m| m.param).collect()).collect();
    let mut family_of = vec![usize::MAX; model.params().len()];
    for (fi, set) in member_sets.iter().enumerate() {
        for p in set {
            family_of[p.index()] = fi;
        }
    }

    for (i, row) in model.rows().iter().enumerate() {
        let state = StateId::from(i);
        for e in row {
            if e.target.index() >= n {
                report.push(Issue::DanglingTarget { state, target: e.target.index() });
            }
            if e.weight.coeff < 0.0 || !e.weight.coeff.is_finite() {
                report.push(Issue::NegativeWeight { state, target: e.target, value: e.weight.coeff });
            }
        }

        let params: Vec<_> = row.iter().filter_map(|e| e.weight.param).collect();
        if params.is_empty() {
            let sum: f64 = row.iter().map(|e| e.weight.coeff).sum();
            let deviation = (sum - 1.0).abs();
            if deviation > STOCHASTIC_TOLERANCE {
                report.push(Issue::RowSum { state, sum, deviation });
            }
            continue;
        }

        if params.len() != row.len() {
            report.push(Issue::ParametricRow { state, reason: "mixes constant and parameter entries".into() });
            continue;
        }
        if let Some(e) = row.iter().find(|e| (e.weight.coeff - 1.0).abs() > STOCHASTIC_TOLERANCE) {
            report.push(Issue::ParametricRow {
                state,
                reason: format!("parameter entry towards {} has coefficient {}", e.target, e.weight.coeff),
            });
            continue;
        }
        let present: BTreeSet<_> = params.iter().copied().collect();
        if present.len() != params.len() {
            report.push(Issue::ParametricRow { state, reason: "repeats a parameter".into() });
            continue;
        }
        let family = &member_sets[family_of[params[0].index()]];
        if &present != family {
            report.push(Issue::ParametricRow {
                state,
                reason: format!("uses {} of the {} members of its family", present.len(), family.len()),
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use crate::markov::{ModelBuilder, StateTuple, Weight};

    use super::*;

    fn two_state(p01: f64) -> ExplicitPdtmc {
        let mut b = ModelBuilder::new();
        let s0 = b.add_state(StateTuple::new(vec![0], 1, 1, vec![])).unwrap();
        let s1 = b.add_state(StateTuple::new(vec![1], 1, 1, vec![])).unwrap();
        b.add_transition(s0, s0, Weight::constant(0.5)).unwrap();
        b.add_transition(s0, s1, Weight::constant(p01)).unwrap();
        b.add_transition(s1, s1, Weight::constant(1.0)).unwrap();
        b.finish().unwrap()
    }

    #[test]
    fn stochastic_chain_is_valid() {
        assert!(two_state(0.5).validate().is_empty());
    }

    #[test]
    fn short_row_is_reported_with_deviation() {
        let report = two_state(0.4).validate();
        assert_eq!(report.len(), 1);
        match &report.issues[0] {
            Issue::RowSum { state, deviation, .. } => {
                assert_eq!(*state, StateId(0));
                assert!((deviation - 0.1).abs() < 1e-12);
            }
            other => panic!("unexpected issue {other:?}"),
        }
    }

    #[test]
    fn partial_family_row_is_reported() {
        let mut b = ModelBuilder::new();
        let s0 = b.add_state(StateTuple::new(vec![0], 1, 3, vec![0])).unwrap();
        let s1 = b.add_state(StateTuple::new(vec![0], 1, 1, vec![0])).unwrap();
        let s2 = b.add_state(StateTuple::new(vec![0], 1, 1, vec![1])).unwrap();
        let s3 = b.add_state(StateTuple::new(vec![1], 1, 3, vec![0])).unwrap();
        let x = b.param("x");
        let y = b.param("y");
        b.add_transition(s0, s1, Weight::param(x)).unwrap();
        b.add_transition(s0, s2, Weight::param(y)).unwrap();
        b.add_transition(s3, s1, Weight::param(x)).unwrap();
        b.add_transition(s1, s3, Weight::constant(1.0)).unwrap();
        b.add_transition(s2, s2, Weight::constant(1.0)).unwrap();
        let report = b.finish().unwrap().validate();
        assert_eq!(report.len(), 1);
        assert!(matches!(report.issues[0], Issue::ParametricRow { state: StateId(3), .. }));
    }
}
