//! Explicit-state reward-augmented parametric DTMCs.
//!
//! States are densely numbered from zero and carry a [`StateTuple`] that
//! projects them onto system state, environment class, turn flag and
//! control configuration. Transition weights are restricted to a constant,
//! a controller parameter, or a constant times a parameter, which is all the
//! augmentation and synthesis stages ever produce.

mod assignment;
mod builder;
mod format;
mod model;
mod validate;

pub use assignment::{ControllerAssignment, FamilyValues, MemberValue, PerceptionKind};
pub use builder::ModelBuilder;
pub use format::{read_model, write_model};
pub use model::{
    ExplicitPdtmc, FamilyKey, FamilyMember, Observation, ParamFamily, ParamId, ParamInfo, ParamSlot, RewardStructure,
    StateId, StateTuple, TransitionEntry, Weight,
};
pub use validate::{Issue, ValidationReport};

use thiserror::Error;

/// Row sums of constant rows must match 1 within this bound.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;

/// Default cap on the number of explicit states.
pub const DEFAULT_STATE_CAP: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model parameter `{0}` has no value in the assignment")]
    MissingParameter(String),
    #[error("parameter family {{{members}}} sums to {sum} instead of 1")]
    SimplexViolation { members: String, sum: f64 },
    #[error("parameter `{name}` has value {value} outside [0, 1]")]
    ValueOutOfRange { name: String, value: f64 },
    #[error("assignment gives conflicting values {first} and {second} for parameter `{name}`")]
    InconsistentAssignment { name: String, first: f64, second: f64 },
    #[error("state count exceeds the configured cap of {cap}")]
    StateExplosion { cap: usize },
    #[error("transition {src} -> {dst} combines weights `{a}` and `{b}` that cannot be merged")]
    UnmergeableWeights { src: usize, dst: usize, a: String, b: String },
    #[error("invalid weight on transition {src} -> {dst}: {reason}")]
    InvalidWeight { src: usize, dst: usize, reason: String },
    #[error("invalid reward value {value} in structure `{name}`")]
    InvalidReward { name: String, value: f64 },
    #[error("transition targets unknown state {0}")]
    DanglingTarget(usize),
    #[error("model has no states")]
    Empty,
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
