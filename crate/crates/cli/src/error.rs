use std::path::{Path, PathBuf};

use decsynth::augment::AugmentError;
use decsynth::lang::LangError;
use decsynth::markov::ModelError;
use decsynth::pctl::PctlError;
use decsynth::sim::SimError;
use decsynth::synth::SynthError;
use decsynth::uncertainty::UncertaintyError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    /// A malformed input file; `message` carries the line when known.
    #[error("{}:{message}", path.display())]
    Input { path: PathBuf, message: String },
    #[error("{} was written from different inputs; pass --force to overwrite it", path.display())]
    Drift { path: PathBuf },
    #[error("{} exists and was not written by decsynth; pass --force to overwrite it", path.display())]
    Unmanaged { path: PathBuf },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pctl(#[from] PctlError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.to_path_buf(), source }
    }

    /// Ties an error from parsing `path` to the file. Positioned messages
    /// already start with `line:col:`.
    pub fn input(path: &Path, error: impl std::fmt::Display) -> CliError {
        let message = error.to_string();
        let positioned = message.split(':').next().is_some_and(|head| head.parse::<u32>().is_ok());
        let message = if positioned { message } else { format!(" {message}") };
        CliError::Input { path: path.to_path_buf(), message }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
