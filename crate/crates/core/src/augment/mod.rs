//! DNN-perception augmentation of perfect-perception models.
//!
//! The augmented state adds the classifier output `khat` and the verifier
//! verdicts `v` to every perfect-perception state. Environment moves are
//! split over the confusion tensor, and controller decisions are
//! re-parameterised so they depend on `(z, khat, v, c)` rather than on the
//! true class.

mod emit;
mod fold;
mod transform;

pub use emit::emit_pm;
pub use fold::{
    check_equivalence, fold_controller, k_dependence, lift_controller, EquivalenceReport, EquivalenceRow,
    EQUIVALENCE_TOLERANCE,
};
pub use transform::{augment, dnn_param_name, perfect_param_name, AugmentationSpec};

use thiserror::Error;

use crate::lang::LangError;
use crate::markov::{ModelError, ValidationReport};
use crate::pctl::PctlError;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("missing roles: {0}")]
    MissingRoles(String),
    #[error("tensor has {tensor} classes but the model has {model}")]
    ArityMismatch { model: usize, tensor: usize },
    #[error("model is not turn-structured:\n{0}")]
    NotTurnStructured(ValidationReport),
    #[error("model is not a valid pDTMC:\n{0}")]
    Invalid(ValidationReport),
    #[error("model is already augmented")]
    AlreadyAugmented,
    #[error("state {state} (t={t}) has parametric transitions; only controller states may")]
    StrayParameter { state: usize, t: u8 },
    #[error("controller choices at z={z:?}, c={c:?} depend on the true class")]
    ClassDependentTargets { z: Vec<i64>, c: Vec<i64> },
    #[error("assignment is not a valid {expected} assignment: {reason}")]
    InvalidAssignment { expected: &'static str, reason: String },
    #[error("cannot emit source: {0}")]
    Emit(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pctl(#[from] PctlError),
    #[error(transparent)]
    Lang(#[from] LangError),
}
