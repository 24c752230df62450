use criterion::{criterion_group, criterion_main, Criterion};
use decsynth::augment::{augment, AugmentationSpec};
use decsynth::lang::{build_source, BuildOptions};
use decsynth::markov::ControllerAssignment;
use decsynth::models;
use decsynth::pctl::pmc;
use decsynth::sim::{
    simulate_encounter, spawn_collider, validate_controller, EncounterBank, EncounterSource, SimConfig,
    SurrogatePerception, ValidationSettings, WaitPolicy,
};
use decsynth::synth::{grid_search, Evaluator, GridSettings};
use decsynth_bench::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn build(c: &mut Criterion) {
    let opts = BuildOptions::default();
    c.bench_function("build/robot", |b| b.iter(|| build_source(black_box(models::ROBOT), &opts).unwrap()));
    c.bench_function("build/safescad", |b| b.iter(|| build_source(black_box(models::SAFESCAD), &opts).unwrap()));
}

fn augmentation(c: &mut Criterion) {
    let (robot, safescad) = (robot(), safescad());
    let robot_spec = AugmentationSpec::new(models::robot_tensor());
    let safescad_spec = AugmentationSpec::new(models::safescad_tensor());
    c.bench_function("augment/robot", |b| b.iter(|| augment(&robot, &robot_spec).unwrap()));
    c.bench_function("augment/safescad", |b| b.iter(|| augment(&safescad, &safescad_spec).unwrap()));
}

fn model_checking(c: &mut Criterion) {
    let model = augmented_safescad();
    let instance = model.instantiate_values(&centre(&model)).unwrap();
    let reqs = safescad_requirements();
    for (i, objective) in reqs.objectives.iter().enumerate() {
        c.bench_function(&format!("pmc/safescad/objective-{i}"), |b| {
            b.iter(|| pmc(&objective.query, &instance).unwrap())
        });
    }
    let evaluator = Evaluator::uncached(&model, &reqs);
    let values = centre(&model);
    c.bench_function("evaluate/safescad", |b| b.iter(|| evaluator.evaluate(&values).unwrap()));
}

fn synthesis(c: &mut Criterion) {
    let model = augmented_robot(&[0]);
    let reqs = robot_requirements();
    let mut group = c.benchmark_group("grid");
    group.sample_size(10);
    group.bench_function("robot-v1/step-0.25", |b| {
        b.iter(|| grid_search(&model, &reqs, &GridSettings::new(0.25)).unwrap())
    });
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let cfg = SimConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let colliders: Vec<_> = (0..64).map(|_| spawn_collider(&cfg, &mut rng)).collect();
    let mut next = colliders.iter().cycle();
    c.bench_function("sim/encounter", |b| b.iter(|| simulate_encounter(&cfg, next.next()).ok()));

    let bank = EncounterBank::generate(&cfg, 200).unwrap();
    let model = augmented_robot(&[0, 1]);
    let policy = WaitPolicy::from_assignment(&ControllerAssignment::from_values(&model, &centre(&model)));
    let surrogate = SurrogatePerception::new(models::robot_tensor());
    let source = EncounterSource::Bank { bank: &bank, p_occ: 0.5 };
    let settings = ValidationSettings { n_journeys: 100, n_waypoints: 100, ..Default::default() };
    let mut group = c.benchmark_group("validate");
    group.sample_size(10);
    group.bench_function("robot/1e4-waypoints", |b| {
        b.iter(|| validate_controller(&cfg, &policy, &surrogate, &source, &settings).unwrap())
    });
    group.finish();
}

criterion_group!(benches, build, augmentation, model_checking, synthesis, simulation);
criterion_main!(benches);
