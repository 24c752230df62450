use crate::markov::{ExplicitPdtmc, Issue, StateId, StateTuple, ValidationReport};

/// Reports every transition that breaks the turn-flag frame conditions.
///
/// States without perception use the perfect-perception rules; states with a
/// predicted class and verdicts additionally require those to be preserved
/// outside the environment turn.
pub fn check_turn_structure(model: &ExplicitPdtmc) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (i, row) in model.rows().iter().enumerate() {
        let from = StateId::from(i);
        let s = model.state(from);
        for e in row.iter().filter(|e| e.weight.is_possible()) {
            if let Some(rule) = frame_violation(s, model.state(e.target)) {
                report.push(Issue::Frame { from, to: e.target, rule });
            }
        }
    }
    report
}

fn frame_violation(s: &StateTuple, n: &StateTuple) -> Option<String> {
    if s.perception.is_some() != n.perception.is_some() {
        return Some("perception components appear on only one side".into());
    }
    let same_perception = s.perception == n.perception;
    let broken: Vec<&str> = match s.t {
        1 => [
            (s.k != n.k, "k changes"),
            (s.c != n.c, "c changes"),
            (!same_perception, "khat or v changes"),
            (n.t >= 3, "t' is not below 3"),
        ]
        .into_iter()
        .filter_map(|(bad, m)| bad.then_some(m))
        .collect(),
        2 => [(s.z != n.z, "z changes"), (s.c != n.c, "c changes"), (n.t != 3, "t' is not 3")]
            .into_iter()
            .filter_map(|(bad, m)| bad.then_some(m))
            .collect(),
        3 => [
            (s.z != n.z, "z changes"),
            (s.k != n.k, "k changes"),
            (!same_perception, "khat or v changes"),
            (n.t != 1, "t' is not 1"),
        ]
        .into_iter()
        .filter_map(|(bad, m)| bad.then_some(m))
        .collect(),
        t => return Some(format!("turn flag {t} outside 1..3")),
    };
    if broken.is_empty() {
        None
    } else {
        Some(format!("t={}: {}", s.t, broken.join(", ")))
    }
}
