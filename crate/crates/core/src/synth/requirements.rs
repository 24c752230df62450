use std::fmt;

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::pctl::{parse_query, Bound, PctlQuery};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Minimise,
    Maximise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub direction: Direction,
    pub query: PctlQuery,
}

impl Objective {
    pub fn minimise(query: PctlQuery) -> Self {
        Objective { direction: Direction::Minimise, query }
    }

    pub fn maximise(query: PctlQuery) -> Self {
        Objective { direction: Direction::Maximise, query }
    }

    /// `value` in an orientation where smaller is better.
    pub fn oriented(&self, value: f64) -> f64 {
        match self.direction {
            Direction::Minimise => value,
            Direction::Maximise => -value,
        }
    }
}

/// Constraints with bounds and quantitative objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Requirements {
    pub constraints: Vec<PctlQuery>,
    pub objectives: Vec<Objective>,
}

impl Requirements {
    pub fn new(constraints: Vec<PctlQuery>, objectives: Vec<Objective>) -> Result<Self, SynthError> {
        if objectives.is_empty() {
            return Err(SynthError::NoObjectives);
        }
        if let Some(c) = constraints.iter().find(|c| c.is_quantitative()) {
            return Err(SynthError::Requirements { line: 0, message: format!("constraint `{c}` has no bound") });
        }
        let objectives = objectives.into_iter().map(|o| Objective { query: o.query.as_quantitative(), ..o }).collect();
        Ok(Requirements { constraints, objectives })
    }

    /// Parses lines of the form `constraint: <query>`, `minimise: <query>` or
    /// `maximise: <query>`. Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self, SynthError> {
        let mut constraints = Vec::new();
        let mut objectives = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| SynthError::Requirements { line, message };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (kind, rest) = trimmed.split_once(':').ok_or_else(|| err("expected `<kind>: <query>`".into()))?;
            let query = parse_query(rest.trim()).map_err(|e| err(e.to_string()))?;
            match kind.trim() {
                "constraint" => {
                    if query.bound() == Bound::Query {
                        return Err(err("a constraint needs a bound such as `>=0.75`".into()));
                    }
                    constraints.push(query);
                }
                "minimise" | "minimize" => objectives.push(Objective::minimise(query.as_quantitative())),
                "maximise" | "maximize" => objectives.push(Objective::maximise(query.as_quantitative())),
                other => return Err(err(format!("unknown requirement kind `{other}`"))),
            }
        }
        if objectives.is_empty() {
            return Err(SynthError::NoObjectives);
        }
        Ok(Requirements { constraints, objectives })
    }
}

impl fmt::Display for Requirements {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.constraints {
            writeln!(f, "constraint: {c}")?;
        }
        for o in &self.objectives {
            let kind = match o.direction {
                Direction::Minimise => "minimise",
                Direction::Maximise => "maximise",
            };
            writeln!(f, "{kind}: {}", o.query)?;
        }
        Ok(())
    }
}
