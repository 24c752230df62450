use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{CandidateResult, Direction, GaSettings, Objective, SynthError};
use crate::markov::{ControllerAssignment, FamilyValues, MemberValue, PerceptionKind};
use crate::pctl::parse_query;

/// Whether `a` strictly dominates `b`, both oriented so that smaller is better.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        strictly |= x < y;
    }
    strictly
}

/// Indices of the points not dominated by any other, in input order.
pub fn non_dominated(points: &[Vec<f64>]) -> Vec<usize> {
    (0..points.len()).filter(|&i| !points.iter().enumerate().any(|(j, q)| j != i && dominates(q, &points[i]))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SearchMetadata {
    Grid {
        step: f64,
        deterministic: bool,
        candidates: u64,
    },
    Evolutionary {
        settings: GaSettings,
        evaluations: u64,
    },
    /// Read back from a CSV file.
    Imported,
}

/// Mutually non-dominated feasible candidates, in native objective orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub objectives: Vec<Objective>,
    pub members: Vec<CandidateResult>,
    pub metadata: SearchMetadata,
}

fn oriented(objectives: &[Objective], values: &[f64]) -> Vec<f64> {
    objectives.iter().zip(values).map(|(o, &v)| o.oriented(v)).collect()
}

fn compare_members(a: &CandidateResult, b: &CandidateResult) -> Ordering {
    let by_objectives = a.objective_values.iter().zip(&b.objective_values).map(|(x, y)| x.total_cmp(y));
    let by_values = a.values().into_iter().zip(b.values()).map(|(x, y)| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    by_objectives.chain(by_values).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

impl ParetoFront {
    /// Keeps the feasible, non-dominated candidates, dropping duplicate assignments.
    pub fn from_candidates(
        objectives: Vec<Objective>,
        candidates: Vec<CandidateResult>,
        metadata: SearchMetadata,
    ) -> Self {
        let mut feasible: Vec<CandidateResult> = candidates.into_iter().filter(|c| c.feasible).collect();
        feasible.sort_by(compare_members);
        feasible.dedup_by(|a, b| a.values() == b.values());
        let points: Vec<Vec<f64>> = feasible.iter().map(|c| oriented(&objectives, &c.objective_values)).collect();
        let keep = non_dominated(&points);
        let members = keep.into_iter().map(|i| feasible[i].clone()).collect();
        ParetoFront { objectives, members, metadata }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Objective vectors in native orientation.
    pub fn points(&self) -> Vec<Vec<f64>> {
        self.members.iter().map(|m| m.objective_values.clone()).collect()
    }

    /// Objective vectors negated where maximised, so smaller is better.
    pub fn oriented_points(&self) -> Vec<Vec<f64>> {
        self.members.iter().map(|m| oriented(&self.objectives, &m.objective_values)).collect()
    }

    /// Whether some member weakly dominates `values` (native orientation).
    pub fn covers(&self, values: &[f64]) -> bool {
        let target = oriented(&self.objectives, values);
        self.oriented_points().iter().any(|p| p == &target || dominates(p, &target))
    }

    pub fn member_with(&self, named: &BTreeMap<String, f64>, tolerance: f64) -> Option<&CandidateResult> {
        self.members
            .iter()
            .find(|m| m.values().iter().all(|(n, v)| named.get(n).is_some_and(|w| (v - w).abs() <= tolerance)))
    }

    pub fn same_objectives(&self, other: &ParetoFront) -> bool {
        self.objectives.len() == other.objectives.len()
            && self
                .objectives
                .iter()
                .zip(&other.objectives)
                .all(|(a, b)| a.direction == b.direction && a.query == b.query)
    }
}

fn objective_header(o: &Objective) -> String {
    let direction = match o.direction {
        Direction::Minimise => "minimise",
        Direction::Maximise => "maximise",
    };
    format!("{direction}: {}", o.query)
}

/// Writes a header with one `<direction>: <query>` cell per objective, then one
/// row `obj1,...,name=value,...` per member.
pub fn write_front_csv<W: Write>(front: &ParetoFront, out: W) -> Result<(), SynthError> {
    let mut writer = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let to_io = |e: csv::Error| SynthError::Io(e.into());
    writer.write_record(front.objectives.iter().map(objective_header)).map_err(to_io)?;
    for m in &front.members {
        let mut row: Vec<String> = m.objective_values.iter().map(|v| v.to_string()).collect();
        row.extend(m.values().into_iter().map(|(n, v)| format!("{n}={v}")));
        writer.write_record(&row).map_err(to_io)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a front written by [`write_front_csv`]. Family structure is not stored
/// in the CSV, so every member's parameters come back as a single family.
pub fn read_front_csv(text: &str) -> Result<ParetoFront, SynthError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut records = reader.records();
    let err = |line: usize, message: String| SynthError::Csv { line, message };
    let header = records.next().ok_or_else(|| err(1, "missing header".into()))?.map_err(|e| err(1, e.to_string()))?;
    let objectives = header
        .iter()
        .map(|cell| {
            let (kind, query) = cell.split_once(':').ok_or_else(|| err(1, format!("bad objective `{cell}`")))?;
            let query = parse_query(query.trim()).map_err(|e| err(1, e.to_string()))?;
            match kind.trim() {
                "minimise" | "minimize" => Ok(Objective::minimise(query)),
                "maximise" | "maximize" => Ok(Objective::maximise(query)),
                other => Err(err(1, format!("unknown direction `{other}`"))),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let k = objectives.len();
    let mut members = Vec::new();
    for (i, record) in records.enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| err(line, e.to_string()))?;
        if record.len() < k {
            return Err(err(line, format!("expected {k} objective values")));
        }
        let objective_values = record
            .iter()
            .take(k)
            .map(|c| c.trim().parse::<f64>().map_err(|e| err(line, format!("`{c}`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let params = record
            .iter()
            .skip(k)
            .map(|c| {
                let (name, value) =
                    c.split_once('=').ok_or_else(|| err(line, format!("expected name=value, got `{c}`")))?;
                let value = value.trim().parse::<f64>().map_err(|e| err(line, format!("`{c}`: {e}")))?;
                Ok(MemberValue { param: name.trim().to_string(), target: Vec::new(), value })
            })
            .collect::<Result<Vec<_>, SynthError>>()?;
        let assignment = ControllerAssignment {
            kind: PerceptionKind::Perfect,
            families: vec![FamilyValues { contexts: Vec::new(), members: params }],
        };
        members.push(CandidateResult { assignment, objective_values, constraint_values: Vec::new(), feasible: true });
    }
    Ok(ParetoFront { objectives, members, metadata: SearchMetadata::Imported })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn candidate(objectives: &[f64], value: f64, feasible: bool) -> CandidateResult {
        CandidateResult {
            assignment: ControllerAssignment {
                kind: PerceptionKind::Dnn,
                families: vec![FamilyValues {
                    contexts: Vec::new(),
                    members: vec![MemberValue { param: "x".into(), target: vec![0], value }],
                }],
            },
            objective_values: objectives.to_vec(),
            constraint_values: Vec::new(),
            feasible,
        }
    }

    fn objectives() -> Vec<Objective> {
        vec![
            Objective::maximise(parse_query("P=? [ F \"a\" ]").unwrap()),
            Objective::minimise(parse_query("R{\"r\"}=? [ F \"a\" ]").unwrap()),
        ]
    }

    #[test]
    fn dominance_is_strict() {
        assert!(dominates(&[0.0, 1.0], &[0.0, 2.0]));
        assert!(!dominates(&[0.0, 1.0], &[0.0, 1.0]));
        assert!(!dominates(&[0.0, 3.0], &[1.0, 2.0]));
        assert_eq!(non_dominated(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![1.0, 1.0], vec![0.0, 3.0]]), vec![0, 2, 3]);
    }

    #[test]
    fn front_respects_orientation() {
        let front = ParetoFront::from_candidates(
            objectives(),
            vec![
                candidate(&[0.9, 10.0], 0.1, true),
                candidate(&[0.8, 10.0], 0.2, true),
                candidate(&[1.0, 12.0], 0.3, true),
                candidate(&[1.0, 1.0], 0.4, false),
                candidate(&[0.9, 10.0], 0.5, true),
                candidate(&[0.9, 10.0], 0.5, true),
            ],
            SearchMetadata::Imported,
        );
        let points = front.points();
        assert_eq!(points, vec![vec![0.9, 10.0], vec![0.9, 10.0], vec![1.0, 12.0]]);
        assert!(front.covers(&[0.8, 11.0]));
        assert!(!front.covers(&[0.95, 10.0]));
    }

    #[test]
    fn csv_round_trip() {
        let front = ParetoFront::from_candidates(
            objectives(),
            vec![candidate(&[0.9, 10.123456789], 0.1, true), candidate(&[1.0, 12.0], 1.0 / 3.0, true)],
            SearchMetadata::Imported,
        );
        let mut out = Vec::new();
        write_front_csv(&front, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("0.9,10.123456789,x=0.1"));
        let back = read_front_csv(&text).unwrap();
        assert!(back.same_objectives(&front));
        assert_eq!(back.points(), front.points());
        assert_eq!(back.members[1].values(), vec![("x".to_string(), 1.0 / 3.0)]);
        assert!(matches!(read_front_csv("maximise: P=? [ F \"a\" ]\nfoo\n"), Err(SynthError::Csv { line: 2, .. })));
        assert!(matches!(read_front_csv("best: P=? [ F \"a\" ]\n"), Err(SynthError::Csv { line: 1, .. })));
    }
}
