use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "decsynth", version, about = "Controller synthesis for systems with classifier-based perception")]
pub struct Cli {
    /// Worker threads for candidate evaluation and simulated journeys.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
    /// Overwrite outputs even if their manifest records different inputs.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate a confusion tensor from a CSV of classifier outputs.
    Quantify(QuantifyArgs),
    /// Build an explicit model from `.pm` source.
    Build(BuildArgs),
    /// Add classifier perception to a perfect-perception model.
    Augment(AugmentArgs),
    /// Evaluate a PCTL query on a model.
    Check(CheckArgs),
    /// Synthesise the Pareto front of controllers.
    Synth(SynthArgs),
    /// Compare a front with a reference front by IGD and hypervolume.
    Pareto(ParetoArgs),
    /// Robot simulator: datasets and controller validation.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Bundled case-study models.
    #[command(subcommand)]
    Models(ModelsCommand),
}

#[derive(Args, Debug, Serialize)]
pub struct ModelArgs {
    /// `.pm` source or an explicit model written by `build`.
    pub model: PathBuf,
    /// Override a constant of a `.pm` model.
    #[arg(long = "const", value_name = "NAME=VALUE", value_parser = parse_constant)]
    pub constants: Vec<(String, String)>,
}

#[derive(Args, Debug, Serialize)]
pub struct QuantifyArgs {
    /// Rows `true,pred,v1,...,vn` with a header.
    pub samples: PathBuf,
    /// Number of classes; defaults to the largest label seen.
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct BuildArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Tensor JSON written by `quantify`.
    #[arg(long)]
    pub tensor: PathBuf,
    /// Keep only these verifiers (0-based, comma separated).
    #[arg(long, value_delimiter = ',', conflicts_with = "marginalize")]
    pub verifiers: Option<Vec<usize>>,
    /// Drop every verifier.
    #[arg(long)]
    pub marginalize: bool,
    /// Write `.pm` source instead of an explicit model.
    #[arg(long)]
    pub emit_pm: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Query, e.g. `P=? [ F "done" ]`.
    pub query: String,
    /// Controller parameter value.
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    /// Spread every parameter family uniformly.
    #[arg(long, conflicts_with_all = ["params", "front"])]
    pub uniform: bool,
    /// Take the controller from a front written by `synth`.
    #[arg(long, conflicts_with = "params")]
    pub front: Option<PathBuf>,
    /// Front member to use.
    #[arg(long, default_value_t = 0, requires = "front")]
    pub member: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Grid,
    Ga,
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Requirements file: `constraint:`, `minimise:` and `maximise:` lines.
    #[arg(long)]
    pub requirements: PathBuf,
    #[arg(long, value_enum, default_value = "grid")]
    pub method: Method,
    /// Grid resolution of every family simplex.
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    #[arg(long, default_value_t = 100)]
    pub population: usize,
    #[arg(long = "max-evals", default_value_t = 10_000)]
    pub max_evals: u64,
    #[arg(long, env = "DECSYNTH_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Only consider deterministic controllers.
    #[arg(long)]
    pub deterministic: bool,
    /// Round GA candidates onto a grid of this step.
    #[arg(long)]
    pub snap: Option<f64>,
    /// Largest grid the search may enumerate.
    #[arg(long)]
    pub cap: Option<u64>,
    /// Record every evaluated candidate in the output.
    #[arg(long)]
    pub all_candidates: bool,
    /// Also write the front as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ParetoArgs {
    /// Front JSON or CSV.
    pub front: PathBuf,
    /// Reference front JSON or CSV.
    #[arg(long)]
    pub reference: PathBuf,
    /// Nadir scale for the hypervolume.
    #[arg(long, default_value_t = 1.5)]
    pub hv_scale: f64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum SimCommand {
    /// Generate a balanced dataset of collider encounters.
    Dataset(DatasetArgs),
    /// Replay a controller in the simulator and compare it with the model.
    Validate(ValidateArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct SimSetup {
    /// Simulator configuration JSON; missing fields keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = "DECSYNTH_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct DatasetArgs {
    #[command(flatten)]
    pub setup: SimSetup,
    /// Encounters of each class.
    #[arg(long, default_value_t = 6000)]
    pub per_class: usize,
    /// Surrogate perception tensor; adds classifier readings.
    #[arg(long, requires = "samples")]
    pub tensor: Option<PathBuf>,
    /// Normalised encounters CSV.
    #[arg(long)]
    pub encounters: PathBuf,
    /// Classifier readings CSV, readable by `quantify`.
    #[arg(long)]
    pub samples: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub setup: SimSetup,
    /// Robot front written by `synth`.
    #[arg(long)]
    pub front: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub member: usize,
    /// Perception tensor the front was synthesised with.
    #[arg(long)]
    pub tensor: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', conflicts_with = "marginalize")]
    pub verifiers: Option<Vec<usize>>,
    #[arg(long)]
    pub marginalize: bool,
    #[arg(long, default_value_t = 1000)]
    pub journeys: usize,
    #[arg(long, default_value_t = 100)]
    pub waypoints: usize,
    #[arg(long, default_value_t = 0.5)]
    pub p_collider: f64,
    /// Share of colliders on collision course.
    #[arg(long, default_value_t = 0.5)]
    pub p_occ: f64,
    #[arg(long, default_value_t = 5.0)]
    pub wait_time: f64,
    /// Pre-simulated encounters of each class.
    #[arg(long, default_value_t = 5000)]
    pub bank_size: usize,
    /// Omit per-journey records from the report.
    #[arg(long)]
    pub summary_only: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum ModelsCommand {
    /// List the bundled models.
    List,
    /// Write a bundled model with its requirements and fixture tensor.
    Export {
        name: String,
        #[arg(long, default_value = ".")]
        dir: PathBuf,
    },
}

fn split_pair(s: &str) -> Result<(&str, &str), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => Ok((k.trim(), v.trim())),
        _ => Err(format!("expected NAME=VALUE, got `{s}`")),
    }
}

fn parse_constant(s: &str) -> Result<(String, String), String> {
    let (k, v) = split_pair(s)?;
    if v != "true" && v != "false" && v.parse::<f64>().is_err() {
        return Err(format!("`{v}` is not a number or boolean"));
    }
    Ok((k.to_string(), v.to_string()))
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = split_pair(s)?;
    let value = v.parse::<f64>().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.to_string(), value))
}
