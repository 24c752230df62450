use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use decsynth::augment::{augment, emit_pm, AugmentationSpec};
use decsynth::lang::{build, parse, BuildOptions, Value};
use decsynth::markov::{read_model, write_model, ControllerAssignment, ExplicitPdtmc, PerceptionKind};
use decsynth::models;
use decsynth::pctl::{parse_query, pmc, satisfies, Bound};
use decsynth::sim::{
    generate_dataset, robot_prediction, validate_controller, write_encounters_csv, EncounterBank, EncounterSource,
    ModelPrediction, SimConfig, SurrogatePerception, ValidationReport, ValidationSettings, WaitPolicy,
};
use decsynth::synth::{
    evolutionary_search, grid_search, hv, igd, read_front_csv, write_front_csv, GaSettings, GridSettings, ParetoFront,
    Requirements, SearchResult,
};
use decsynth::uncertainty::{ingest, read_samples_csv, write_samples_csv, ConfusionTensor};
use serde::Serialize;

use crate::args::*;
use crate::error::{CliError, Result};
use crate::manifest::{emit_json, emit_text, guard, parse_json, read_input, write_file, RunManifest};

pub fn run(cli: Cli) -> Result<()> {
    let force = cli.force;
    match cli.command {
        Command::Quantify(a) => quantify(&a, force),
        Command::Build(a) => build_model(&a, force),
        Command::Augment(a) => augment_model(&a, force),
        Command::Check(a) => check(&a),
        Command::Synth(a) => synth(&a, force),
        Command::Pareto(a) => pareto(&a, force),
        Command::Sim(SimCommand::Dataset(a)) => dataset(&a, force),
        Command::Sim(SimCommand::Validate(a)) => validate(&a, force),
        Command::Models(m) => bundled(&m, force),
    }
}

fn constant_value(name: &str, raw: &str) -> Result<Value> {
    match raw {
        "true" => Ok(Value::Bool(true)),
        "false" => Ok(Value::Bool(false)),
        _ => raw
            .parse::<i64>()
            .map(Value::Int)
            .or_else(|_| raw.parse::<f64>().map(Value::Real))
            .map_err(|_| CliError::Usage(format!("constant `{name}`: `{raw}` is not a number or boolean"))),
    }
}

fn is_explicit(text: &str) -> bool {
    text.trim_start().starts_with("pdtmc")
}

/// Loads `.pm` source or an explicit model, returning the model and its text.
fn load_model(args: &ModelArgs, manifest: &mut RunManifest) -> Result<(ExplicitPdtmc, String)> {
    let path = &args.model;
    let text = read_input(path, manifest)?;
    if is_explicit(&text) {
        if !args.constants.is_empty() {
            return Err(CliError::Usage("--const only applies to .pm source".into()));
        }
        let model = read_model(&text).map_err(|e| CliError::input(path, e))?;
        return Ok((model, text));
    }
    let mut opts = BuildOptions::default();
    for (name, raw) in &args.constants {
        opts = opts.with_constant(name, constant_value(name, raw)?);
    }
    let ast = parse(&text).map_err(|e| CliError::input(path, e))?;
    let model = build(&ast, &opts).map_err(|e| CliError::input(path, e))?;
    Ok((model, text))
}

fn load_tensor(path: &Path, manifest: &mut RunManifest) -> Result<ConfusionTensor> {
    let text = read_input(path, manifest)?;
    parse_json(path, &text)
}

fn select_verifiers(tensor: ConfusionTensor, keep: &Option<Vec<usize>>, marginalize: bool) -> Result<ConfusionTensor> {
    if marginalize {
        return Ok(tensor.marginalize());
    }
    match keep {
        Some(keep) => Ok(tensor.project(keep)?),
        None => Ok(tensor),
    }
}

fn load_front(path: &Path, manifest: &mut RunManifest) -> Result<ParetoFront> {
    let text = read_input(path, manifest)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return read_front_csv(&text).map_err(|e| CliError::input(path, e));
    }
    match parse_json::<SearchResult>(path, &text) {
        Ok(result) => Ok(result.front),
        Err(_) => parse_json::<ParetoFront>(path, &text),
    }
}

fn pick_member(front: &ParetoFront, member: usize, path: &Path) -> Result<ControllerAssignment> {
    front.members.get(member).map(|m| m.assignment.clone()).ok_or_else(|| {
        CliError::Invalid(format!("{} has {} members; member {member} does not exist", path.display(), front.len()))
    })
}

fn to_text(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> String {
    let mut out = Vec::new();
    write(&mut out).expect("writing to memory cannot fail");
    String::from_utf8(out).expect("writers emit UTF-8")
}

fn quantify(a: &QuantifyArgs, force: bool) -> Result<()> {
    let mut manifest = RunManifest::new("quantify", a, None);
    let text = read_input(&a.samples, &mut manifest)?;
    let (rows, verifiers) = read_samples_csv(text.as_bytes()).map_err(|e| CliError::input(&a.samples, e))?;
    let seen = rows.iter().map(|r| r.true_label.max(r.predicted)).max().unwrap_or(0) as usize;
    let tensor = ingest(&rows, a.classes.unwrap_or(seen), verifiers).map_err(|e| CliError::input(&a.samples, e))?;
    eprintln!("{} rows, {} classes, {verifiers} verifiers", rows.len(), tensor.classes());
    eprint!("{}", tensor.accuracy_report());
    emit_json(a.output.as_deref(), &tensor, &manifest, force)
}

fn build_model(a: &BuildArgs, force: bool) -> Result<()> {
    let mut manifest = RunManifest::new("build", a, None);
    let (model, _) = load_model(&a.model, &mut manifest)?;
    eprintln!(
        "{} states, {} transitions, {} parameters in {} families",
        model.num_states(),
        model.num_transitions(),
        model.params().len(),
        model.families().len()
    );
    emit_text(a.output.as_deref(), &to_text(|out| write_model(&model, out)), &manifest, force)
}

fn augment_model(a: &AugmentArgs, force: bool) -> Result<()> {
    let mut manifest = RunManifest::new("augment", a, None);
    let (model, source) = load_model(&a.model, &mut manifest)?;
    let tensor = select_verifiers(load_tensor(&a.tensor, &mut manifest)?, &a.verifiers, a.marginalize)?;
    let augmented = augment(&model, &AugmentationSpec::new(tensor.clone()))?;
    eprintln!(
        "{} states, {} parameters in {} families",
        augmented.num_states(),
        augmented.params().len(),
        augmented.families().len()
    );
    let text = if a.emit_pm {
        if is_explicit(&source) {
            return Err(CliError::Usage("--emit-pm needs .pm source as input".into()));
        }
        let ast = parse(&source).map_err(|e| CliError::input(&a.model.model, e))?;
        emit_pm(&ast, &tensor)?
    } else {
        to_text(|out| write_model(&augmented, out))
    };
    emit_text(a.output.as_deref(), &text, &manifest, force)
}

fn uniform_values(model: &ExplicitPdtmc) -> Vec<f64> {
    let mut values = vec![0.0; model.params().len()];
    for f in model.families() {
        for m in &f.members {
            values[m.param.index()] = 1.0 / f.members.len() as f64;
        }
    }
    values
}

fn check(a: &CheckArgs) -> Result<()> {
    let mut manifest = RunManifest::new("check", a, None);
    let (model, _) = load_model(&a.model, &mut manifest)?;
    let query = parse_query(&a.query)?;
    let dtmc = if !model.is_parametric() {
        model
    } else if a.uniform {
        model.instantiate_values(&uniform_values(&model))?
    } else if let Some(path) = &a.front {
        let front = load_front(path, &mut manifest)?;
        model.instantiate(&pick_member(&front, a.member, path)?)?
    } else {
        let named: BTreeMap<String, f64> = a.params.iter().cloned().collect();
        let missing: Vec<&str> =
            model.params().iter().map(|p| p.name.as_str()).filter(|n| !named.contains_key(*n)).collect();
        if !missing.is_empty() {
            return Err(CliError::Usage(format!(
                "no value for {}; pass --param NAME=VALUE, --front or --uniform",
                missing.join(", ")
            )));
        }
        if let Some(unknown) = named.keys().find(|n| model.param_id(n).is_none()) {
            return Err(CliError::Usage(format!("model has no parameter `{unknown}`")));
        }
        model.instantiate(&ControllerAssignment::from_named(&model, &named))?
    };
    match query.bound() {
        Bound::Compare(..) => println!("{}", satisfies(&query, &dtmc)?),
        _ => println!("{:?}", pmc(&query, &dtmc)?),
    }
    Ok(())
}

fn synth(a: &SynthArgs, force: bool) -> Result<()> {
    let seed = (a.method == Method::Ga).then_some(a.seed);
    let mut manifest = RunManifest::new("synth", a, seed);
    let (model, _) = load_model(&a.model, &mut manifest)?;
    let text = read_input(&a.requirements, &mut manifest)?;
    let reqs = Requirements::parse(&text).map_err(|e| CliError::input(&a.requirements, e))?;
    let result = match a.method {
        Method::Grid => {
            let mut settings =
                GridSettings::new(a.step).deterministic(a.deterministic).keep_candidates(a.all_candidates);
            if let Some(cap) = a.cap {
                settings = settings.cap(cap);
            }
            grid_search(&model, &reqs, &settings)?
        }
        Method::Ga => {
            let settings = GaSettings::new(a.population, a.max_evals, a.seed)
                .deterministic(a.deterministic)
                .snap(a.snap)
                .keep_candidates(a.all_candidates);
            evolutionary_search(&model, &reqs, &settings)?
        }
    };
    eprintln!("evaluated {} candidates; front has {} members", result.evaluated, result.front.len());
    if let Some(path) = &a.csv {
        guard(path, &manifest, force)?;
        let csv = to_text(|out| write_front_csv(&result.front, out).map_err(std::io::Error::other));
        emit_text(Some(path), &csv, &manifest, force)?;
    }
    emit_json(a.output.as_deref(), &result, &manifest, force)
}

#[derive(Serialize)]
struct Comparison {
    igd: f64,
    hv: f64,
    reference_hv: f64,
    front_size: usize,
    reference_size: usize,
}

fn pareto(a: &ParetoArgs, force: bool) -> Result<()> {
    let mut manifest = RunManifest::new("pareto", a, None);
    let front = load_front(&a.front, &mut manifest)?;
    let reference = load_front(&a.reference, &mut manifest)?;
    let comparison = Comparison {
        igd: igd(&front, &reference)?,
        hv: hv(&front, &reference, a.hv_scale)?,
        reference_hv: hv(&reference, &reference, a.hv_scale)?,
        front_size: front.len(),
        reference_size: reference.len(),
    };
    emit_json(a.output.as_deref(), &comparison, &manifest, force)
}

fn sim_config(setup: &SimSetup, manifest: &mut RunManifest) -> Result<SimConfig> {
    let mut cfg = match &setup.config {
        Some(path) => {
            let text = read_input(path, manifest)?;
            serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.clone(), source })?
        }
        None => SimConfig::default(),
    };
    cfg.seed = setup.seed;
    cfg.check()?;
    Ok(cfg)
}

fn dataset(a: &DatasetArgs, force: bool) -> Result<()> {
    let mut manifest = RunManifest::new("sim dataset", a, Some(a.setup.seed));
    let cfg = sim_config(&a.setup, &mut manifest)?;
    let surrogate = match &a.tensor {
        Some(path) => Some(SurrogatePerception::new(load_tensor(path, &mut manifest)?)),
        None => None,
    };
    for path in std::iter::once(&a.encounters).chain(&a.samples) {
        guard(path, &manifest, force)?;
    }
    let data = generate_dataset(&cfg, a.per_class, surrogate.as_ref())?;
    eprintln!(
        "{} encounters from {} spawns ({} timed out); collision frequency {:.4}",
        data.encounters.len(),
        data.attempts,
        data.timeouts.len(),
        data.collision_frequency()
    );
    let encounters = to_text(|out| write_encounters_csv(out, &data, &cfg).map_err(std::io::Error::other));
    emit_text(Some(&a.encounters), &encounters, &manifest, force)?;
    if let (Some(path), Some(s)) = (&a.samples, &surrogate) {
        let rows =
            to_text(|out| write_samples_csv(out, &data.samples, s.tensor().verifiers()).map_err(std::io::Error::other));
        emit_text(Some(path), &rows, &manifest, force)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Validation {
    prediction: ModelPrediction,
    report: ValidationReport,
    success_difference: f64,
    time_difference: f64,
    collision_frequency: f64,
    bank_timeouts: usize,
}

fn validate(a: &ValidateArgs, force: bool) -> Result<()> {
    let mut manifest = RunManifest::new("sim validate", a, Some(a.setup.seed));
    let cfg = sim_config(&a.setup, &mut manifest)?;
    let front = load_front(&a.front, &mut manifest)?;
    let assignment = pick_member(&front, a.member, &a.front)?;
    let tensor = match (&a.tensor, assignment.kind) {
        (Some(path), _) => select_verifiers(load_tensor(path, &mut manifest)?, &a.verifiers, a.marginalize)?,
        (None, PerceptionKind::Perfect) => ConfusionTensor::perfect(2, 0),
        (None, PerceptionKind::Dnn) => {
            return Err(CliError::Usage("a DNN-perception controller needs --tensor".into()));
        }
    };
    if let Some(path) = &a.output {
        guard(path, &manifest, force)?;
    }
    let bank = EncounterBank::generate(&cfg, a.bank_size)?;
    let times = bank.time_constants()?;
    let prediction = robot_prediction(&assignment, &tensor, &times, a.p_collider, a.p_occ, a.wait_time)?;
    let perception = match assignment.kind {
        PerceptionKind::Perfect => ConfusionTensor::perfect(2, 0),
        PerceptionKind::Dnn => tensor,
    };
    let settings = ValidationSettings {
        p_collider: a.p_collider,
        wait_time: a.wait_time,
        n_journeys: a.journeys,
        n_waypoints: a.waypoints,
        seed: a.setup.seed,
    };
    let source = EncounterSource::Bank { bank: &bank, p_occ: a.p_occ };
    let policy = WaitPolicy::from_assignment(&assignment);
    let mut report = validate_controller(&cfg, &policy, &SurrogatePerception::new(perception), &source, &settings)?;
    if a.summary_only {
        report.journeys.clear();
    }
    eprintln!(
        "waypoint success: model {:.5}, sim {:.5} +- {:.5}; waypoint time: model {:.4}, sim {:.4} +- {:.4}",
        prediction.success,
        report.waypoint_success,
        report.waypoint_success_stderr,
        prediction.time,
        report.waypoint_time,
        report.waypoint_time_stderr
    );
    let validation = Validation {
        success_difference: (prediction.success - report.waypoint_success).abs(),
        time_difference: (prediction.time - report.waypoint_time).abs(),
        prediction,
        report,
        collision_frequency: bank.collision_frequency,
        bank_timeouts: bank.timeouts,
    };
    emit_json(a.output.as_deref(), &validation, &manifest, force)
}

fn bundled(m: &ModelsCommand, force: bool) -> Result<()> {
    match m {
        ModelsCommand::List => {
            for (name, _) in models::ALL {
                println!("{name}");
            }
            Ok(())
        }
        ModelsCommand::Export { name, dir } => {
            let source = models::by_name(name)
                .ok_or_else(|| CliError::Usage(format!("no bundled model `{name}`; see `decsynth models list`")))?;
            let files = [
                (format!("{name}.pm"), source.to_string()),
                (format!("{name}.req"), models::requirements_by_name(name).unwrap_or_default().to_string()),
            ];
            for (file, text) in &files {
                let path = dir.join(file);
                if path.exists() && !force && fs::read_to_string(&path).ok().as_deref() != Some(text.as_str()) {
                    return Err(CliError::Unmanaged { path });
                }
                write_file(&path, text.as_bytes())?;
            }
            if let Some(tensor) = models::tensor_by_name(name) {
                let path = dir.join(format!("{name}.tensor.json"));
                let json = serde_json::to_string_pretty(&tensor).expect("tensor serialises") + "\n";
                if path.exists() && !force && fs::read_to_string(&path).ok().as_deref() != Some(json.as_str()) {
                    return Err(CliError::Unmanaged { path });
                }
                write_file(&path, json.as_bytes())?;
            }
            Ok(())
        }
    }
}
