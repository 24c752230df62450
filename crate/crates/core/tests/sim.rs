use std::collections::BTreeMap;

use decsynth::augment::{augment, AugmentationSpec};
use decsynth::lang::{build_source, BuildOptions};
use decsynth::markov::{ControllerAssignment, ExplicitPdtmc};
use decsynth::models;
use decsynth::sim::{
    generate_dataset, label_oracle, robot_prediction, simulate_encounter, spawn_collider, validate_controller,
    EncounterBank, EncounterSource, SimConfig, SurrogatePerception, TimeConstants, ValidationReport,
    ValidationSettings, WaitPolicy,
};
use decsynth::uncertainty::{ingest, verdict_index, ConfusionTensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn perfect() -> ExplicitPdtmc {
    build_source(models::ROBOT, &BuildOptions::default()).unwrap()
}

fn perfect_assignment(a: f64, b: f64) -> ControllerAssignment {
    let named = BTreeMap::from([
        ("x1_wait".to_string(), a),
        ("x1_go".to_string(), 1.0 - a),
        ("x2_wait".to_string(), b),
        ("x2_go".to_string(), 1.0 - b),
    ]);
    ControllerAssignment::from_named(&perfect(), &named)
}

/// Per-waypoint success and time of a robot that waits with probability `a`
/// for a clear collider and `b` for one on collision course.
fn waypoint_oracle(a: f64, b: f64, t: &TimeConstants, pc: f64, po: f64, w: f64) -> (f64, f64) {
    let retry = pc * ((1.0 - po) * a + po * b);
    let success = (1.0 - pc + pc * (1.0 - po) * (1.0 - a)) / (1.0 - retry);
    let attempt = (1.0 - pc) * t.travel
        + pc * (1.0 - po) * (a * w + (1.0 - a) * t.travel)
        + pc * po * (b * w + (1.0 - b) * (t.travel + t.collide));
    (success, attempt / (1.0 - retry))
}

fn bank() -> EncounterBank {
    EncounterBank::generate(&SimConfig::default(), 500).unwrap()
}

fn within_3se(model: f64, sim: f64, se: f64) -> bool {
    (model - sim).abs() <= 3.0 * se + 1e-9
}

#[test]
fn free_journey_matches_the_straight_line_time() {
    let cfg = SimConfig::default();
    let out = simulate_encounter(&cfg, None).unwrap();
    assert!(!out.collision);
    let analytic = (cfg.y_goal - cfg.epsilon) / cfg.robot_speed;
    assert!((out.journey_time - analytic).abs() <= 2.0 * cfg.dt, "{}", out.journey_time);
}

#[test]
fn surrogate_emissions_pass_chi_square() {
    let tensor = models::robot_tensor();
    let surrogate = SurrogatePerception::new(tensor.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 50_000;
    for k in 1..=2u32 {
        let mut counts = vec![0u64; 2 * tensor.num_outcomes()];
        for _ in 0..draws {
            let (khat, v) = surrogate.perceive(k, &mut rng);
            counts[(khat as usize - 1) * tensor.num_outcomes() + verdict_index(&v)] += 1;
        }
        let mut stat = 0.0;
        let mut cells = 0;
        for kp in 1..=2u32 {
            for v in 0..tensor.num_outcomes() {
                let expected = tensor.probability(k, kp, v) * draws as f64;
                let observed = counts[(kp as usize - 1) * tensor.num_outcomes() + v] as f64;
                if expected > 0.0 {
                    stat += (observed - expected).powi(2) / expected;
                    cells += 1;
                } else {
                    assert_eq!(observed, 0.0);
                }
            }
        }
        let p = 1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat);
        assert!(p > 0.01, "class {k}: chi-square {stat} over {cells} cells, p = {p}");
    }
}

#[test]
fn dataset_readings_recover_the_tensor() {
    let tensor = models::robot_tensor();
    let cfg = SimConfig { seed: 3, ..SimConfig::default() };
    let data = generate_dataset(&cfg, 25_000, Some(&SurrogatePerception::new(tensor.clone()))).unwrap();
    assert_eq!(data.encounters.len(), 50_000);
    assert_eq!(data.samples.len(), 50_000);
    for (e, s) in data.encounters.iter().zip(&data.samples) {
        assert_eq!(e.class, s.true_label);
    }
    let fitted = ingest(&data.samples, 2, 2).unwrap();
    let z99 = 2.575_829;
    for k in 1..=2u32 {
        let n = fitted.total(k) as f64;
        assert_eq!(n, 25_000.0);
        for kp in 1..=2u32 {
            for v in 0..tensor.num_outcomes() {
                let p = tensor.probability(k, kp, v);
                let half = z99 * (p * (1.0 - p) / n).sqrt();
                let got = fitted.probability(k, kp, v);
                assert!((got - p).abs() <= half, "p[{k}][{kp}][{v}] = {got}, expected {p} +- {half}");
            }
        }
    }
}

#[test]
fn spawn_frequency_gives_a_consistent_model() {
    let cfg = SimConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    // Spawns that time out have no class.
    let classes: Vec<u32> =
        (0..10_000).filter_map(|_| label_oracle(&cfg, &spawn_collider(&cfg, &mut rng)).ok()).collect();
    assert!(classes.len() > 9_900);
    let p_occ = classes.iter().filter(|&&c| c == 2).count() as f64 / classes.len() as f64;
    assert!(p_occ > 0.0 && p_occ < 1.0);
    let times = bank().time_constants().unwrap();
    let settings =
        ValidationSettings { p_collider: 0.5, n_journeys: 10_000, n_waypoints: 1, seed: 2, ..Default::default() };
    let go = perfect_assignment(0.0, 0.0);
    let surrogate = SurrogatePerception::new(ConfusionTensor::perfect(2, 0));
    let report =
        validate_controller(&cfg, &WaitPolicy::from_assignment(&go), &surrogate, &EncounterSource::Spawn, &settings)
            .unwrap();
    let model = robot_prediction(&go, &ConfusionTensor::perfect(2, 0), &times, 0.5, p_occ, 5.0).unwrap();
    let model_rate = 1.0 - model.success;
    assert!((report.collision_rate - model_rate).abs() < 0.02, "sim {} model {model_rate}", report.collision_rate);
}

#[test]
fn model_prediction_matches_the_closed_form() {
    let times = TimeConstants { travel: 9.9, collide: 2.3 };
    for &(a, b, pc, po, w) in &[(0.0, 0.0, 0.5, 0.5, 5.0), (1.0, 1.0, 0.3, 0.4, 5.0), (0.2, 0.7, 0.6, 0.25, 3.0)] {
        let got =
            robot_prediction(&perfect_assignment(a, b), &ConfusionTensor::perfect(2, 0), &times, pc, po, w).unwrap();
        let (success, time) = waypoint_oracle(a, b, &times, pc, po, w);
        assert!((got.success - success).abs() < 1e-9, "{a} {b}: {} vs {success}", got.success);
        assert!((got.time - time).abs() < 1e-9, "{a} {b}: {} vs {time}", got.time);
    }
}

fn run(
    policy: &WaitPolicy,
    tensor: &ConfusionTensor,
    bank: &EncounterBank,
    settings: &ValidationSettings,
) -> ValidationReport {
    let source = EncounterSource::Bank { bank, p_occ: 0.5 };
    validate_controller(&SimConfig::default(), policy, &SurrogatePerception::new(tensor.clone()), &source, settings)
        .unwrap()
}

#[test]
fn extreme_controllers_agree_with_the_model() {
    let bank = bank();
    let times = bank.time_constants().unwrap();
    let tensor = ConfusionTensor::perfect(2, 0);
    let settings = ValidationSettings { n_journeys: 10_000, n_waypoints: 5, seed: 1, ..Default::default() };
    for wait in [0.0, 1.0] {
        let assignment = perfect_assignment(wait, wait);
        let report = run(&WaitPolicy::from_assignment(&assignment), &tensor, &bank, &settings);
        let model = robot_prediction(&assignment, &tensor, &times, 0.5, 0.5, 5.0).unwrap();
        let n = settings.n_waypoints;
        assert!(within_3se(model.journey_time(n), report.mean_time, report.mean_time_stderr), "wait={wait}: time");
        assert!(
            within_3se(model.journey_collision_rate(n), report.collision_rate, report.collision_rate_stderr),
            "wait={wait}: {} vs {}",
            model.journey_collision_rate(n),
            report.collision_rate
        );
        assert!(within_3se(model.success, report.waypoint_success, report.waypoint_success_stderr));
        assert!(within_3se(model.time, report.waypoint_time, report.waypoint_time_stderr));
    }
}

#[test]
fn dnn_controller_agrees_with_the_augmented_model() {
    let bank = bank();
    let times = bank.time_constants().unwrap();
    let tensor = models::robot_tensor().project(&[0]).unwrap();
    let model = augment(&perfect(), &AugmentationSpec::new(tensor.clone())).unwrap();
    let values: Vec<f64> = model
        .params()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let wait = [0.1, 0.8, 0.4, 0.95][(i / 2) % 4];
            if p.name.ends_with("_1") {
                wait
            } else {
                1.0 - wait
            }
        })
        .collect();
    let assignment = ControllerAssignment::from_values(&model, &values);
    let settings = ValidationSettings { n_journeys: 2_000, n_waypoints: 20, seed: 7, ..Default::default() };
    let report = run(&WaitPolicy::from_assignment(&assignment), &tensor, &bank, &settings);
    let predicted = robot_prediction(&assignment, &tensor, &times, 0.5, 0.5, 5.0).unwrap();
    assert!(within_3se(predicted.success, report.waypoint_success, report.waypoint_success_stderr));
    assert!(within_3se(predicted.time, report.waypoint_time, report.waypoint_time_stderr));
}

#[test]
fn validation_ignores_the_thread_count() {
    let bank = bank();
    let tensor = models::robot_tensor();
    let model = augment(&perfect(), &AugmentationSpec::new(tensor.clone())).unwrap();
    let values: Vec<f64> = model.params().iter().map(|p| if p.name.ends_with("_1") { 0.35 } else { 0.65 }).collect();
    let policy = WaitPolicy::from_assignment(&ControllerAssignment::from_values(&model, &values));
    let settings = ValidationSettings { n_journeys: 64, n_waypoints: 25, seed: 5, ..Default::default() };
    let in_pool = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run(&policy, &tensor, &bank, &settings))
    };
    assert_eq!(in_pool(1), in_pool(3));
}
