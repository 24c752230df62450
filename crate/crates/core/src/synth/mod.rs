//! Controller synthesis over the parameter families of a pDTMC.
//!
//! Candidates are instantiated, checked against the constraints of a
//! [`Requirements`] set and scored on its objectives. [`grid_search`]
//! enumerates a discretised design space exhaustively; [`evolutionary_search`]
//! runs a seeded NSGA-II. Fronts are compared with [`igd`] and [`hv`].

mod evaluate;
mod front;
mod grid;
mod indicators;
mod nsga;
mod requirements;

pub use evaluate::{CandidateResult, Evaluation, Evaluator, SearchSpace, CONSTRAINT_TOLERANCE};
pub use front::{dominates, non_dominated, read_front_csv, write_front_csv, ParetoFront, SearchMetadata};
pub use grid::{compositions, grid_search, GridSettings, SearchResult, DEFAULT_CANDIDATE_CAP};
pub use indicators::{hv, hypervolume, igd, igd_points, nadir, HV_SAMPLES};
pub use nsga::{evolutionary_search, GaSettings};
pub use requirements::{Direction, Objective, Requirements};

use thiserror::Error;

use crate::markov::ModelError;
use crate::pctl::PctlError;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("line {line}: {message}")]
    Requirements { line: usize, message: String },
    #[error("requirements need at least one objective")]
    NoObjectives,
    #[error("model has no controller parameters")]
    NoParameters,
    #[error("none of the {evaluated} candidates satisfies the constraints")]
    InfeasibleAll { evaluated: u64 },
    #[error("search space has {candidates} candidates, above the cap of {cap}")]
    BudgetExceeded { candidates: u128, cap: u64 },
    #[error("step {0} must lie in (0, 1] and divide 1")]
    InvalidStep(f64),
    #[error("invalid search settings: {0}")]
    InvalidSettings(String),
    #[error("front is empty")]
    EmptyFront,
    #[error("fronts optimise different objectives")]
    ObjectiveMismatch,
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pctl(#[from] PctlError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
