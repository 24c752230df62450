//! PCTL with rewards over instantiated models.
//!
//! Queries are written in PRISM syntax, e.g. `P>=0.75 [ !"collision" U "done" ]`
//! or `R{"time"}=? [ F "done" ]`. Unbounded until uses graph precomputation
//! of the probability-0 and probability-1 states before a linear solve.

mod ast;
mod check;
mod parser;
mod solve;

pub use ast::{Bound, Comparison, PathFormula, PctlQuery, RewardFormula, StateFormula};
pub use check::{check_formula, pmc, satisfies, state_values, until_classes, UntilClasses};
pub use parser::{parse_query, parse_state_formula};
pub use solve::{LinearSystem, DENSE_LIMIT};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PctlError {
    #[error("at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unsupported operator `{0}`")]
    UnknownOperator(String),
    #[error("unknown label \"{0}\"")]
    UnknownLabel(String),
    #[error("unknown reward structure {0}")]
    UnknownRewardStructure(String),
    #[error("model still has {params} symbolic parameters; instantiate it first")]
    Parametric { params: usize },
    #[error("linear solver failed (residual {residual:e})")]
    SolverFailure { residual: f64 },
    #[error("query `{0}` has no bound to compare against")]
    NoBound(String),
}

impl PctlError {
    pub(crate) fn syntax(offset: usize, message: impl Into<String>) -> Self {
        PctlError::Syntax { offset, message: message.into() }
    }
}
