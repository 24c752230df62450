//! Kinematic simulator of the robot journey between two waypoints.
//!
//! The robot and a random collider are discs of radius 0.5 integrated with a
//! fixed step. The simulator labels collider set-ups for dataset generation
//! and replays synthesised controllers to validate model predictions.

mod config;
mod dataset;
mod validate;
mod world;

pub use config::SimConfig;
pub use dataset::{generate_dataset, write_encounters_csv, Dataset, LabelledEncounter, SurrogatePerception};
pub use validate::{
    robot_prediction, validate_controller, EncounterBank, EncounterSource, ModelPrediction, RecordedEncounter,
    TimeConstants, ValidationReport, ValidationSettings, WaitPolicy,
};
pub use world::{label_oracle, simulate_encounter, spawn_collider, EncounterState, Outcome, BODY_RADIUS};

use thiserror::Error;

use crate::augment::AugmentError;
use crate::lang::LangError;
use crate::markov::ModelError;
use crate::pctl::PctlError;
use crate::uncertainty::UncertaintyError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulator configuration: {0}")]
    InvalidConfig(String),
    #[error("journey did not reach the goal within {limit} s")]
    Timeout { limit: f64 },
    #[error("class {class} not reached within {attempts} spawns")]
    SamplingStall { class: u32, attempts: u64 },
    #[error("controller has no decision for predicted class {khat} with verdicts {verdicts}")]
    MissingDecision { khat: u32, verdicts: String },
    #[error("surrogate tensor has {0} classes; the robot needs 2")]
    ArityMismatch(usize),
    #[error("encounter bank has no {0} set-ups")]
    EmptyBank(&'static str),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Pctl(#[from] PctlError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
