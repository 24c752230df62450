//! A PRISM-style modelling language for turn-structured pDTMCs.
//!
//! Sources are parsed into a [`ModelAst`] and expanded into an
//! [`ExplicitPdtmc`](crate::markov::ExplicitPdtmc) by breadth-first
//! exploration. Module roles are given by `// @role: <role>` comments placed
//! before a module and determine how variables project onto `(z, k, t, c)`.
//! The grammar is documented in `docs/model-language.md`.

mod ast;
mod build;
mod eval;
mod lexer;
mod parser;
mod printer;
mod turn;

pub use ast::*;
pub use build::{build, BuildOptions};
pub use eval::Value;
pub use parser::parse;
pub use printer::{expr as print_expr, print};
pub use turn::check_turn_structure;

use thiserror::Error;

use crate::markov::{ExplicitPdtmc, ModelError};

#[derive(Debug, Error)]
pub enum LangError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax { line: u32, col: u32, message: String },
    #[error("{line}:{col}: `{name}` is declared more than once")]
    DuplicateIdentifier { name: String, line: u32, col: u32 },
    #[error("{line}:{col}: unknown identifier `{name}`")]
    UnboundIdentifier { name: String, line: u32, col: u32 },
    #[error("{line}:{col}: variable `{name}`: {message}")]
    RangeError { name: String, line: u32, col: u32, message: String },
    #[error("`{name}` is defined in terms of itself")]
    CyclicDefinition { name: String },
    #[error("{line}:{col}: module `{module}` cannot update `{var}`, which belongs to another module")]
    ForeignUpdate { var: String, module: String, line: u32, col: u32 },
    #[error("{line}:{col}: {message}")]
    InvalidExpression { line: u32, col: u32, message: String },
    #[error("override targets undeclared constant `{0}`")]
    UnknownOverride(String),
    #[error("role annotations: {0}")]
    Roles(String),
    #[error("no command is enabled in reachable state ({state})")]
    CompositionDeadlock { state: String },
    #[error("line {line}: branch probabilities of [{action}] sum to {sum} in state ({state})")]
    RowSum { state: String, action: String, line: u32, sum: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl LangError {
    pub(crate) fn syntax(span: Span, message: impl Into<String>) -> Self {
        LangError::Syntax { line: span.line, col: span.col, message: message.into() }
    }

    /// `(line, column)` of the error, when it has one.
    pub fn position(&self) -> Option<(u32, u32)> {
        match self {
            LangError::Syntax { line, col, .. }
            | LangError::DuplicateIdentifier { line, col, .. }
            | LangError::UnboundIdentifier { line, col, .. }
            | LangError::RangeError { line, col, .. }
            | LangError::ForeignUpdate { line, col, .. }
            | LangError::InvalidExpression { line, col, .. } => Some((*line, *col)),
            LangError::RowSum { line, .. } => Some((*line, 0)),
            _ => None,
        }
    }
}

/// Parses and builds `source` in one step.
pub fn build_source(source: &str, opts: &BuildOptions) -> Result<ExplicitPdtmc, LangError> {
    build(&parse(source)?, opts)
}
