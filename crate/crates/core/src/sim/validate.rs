use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::finished;
use super::{
    generate_dataset, simulate_encounter, spawn_collider, EncounterState, Outcome, SimConfig, SimError,
    SurrogatePerception,
};
use crate::augment::{augment, AugmentationSpec};
use crate::lang::{build_source, BuildOptions, Value};
use crate::markov::{ControllerAssignment, Observation, PerceptionKind};
use crate::models;
use crate::pctl::{parse_query, pmc};
use crate::uncertainty::{verdict_bits, ConfusionTensor};

/// Retries allowed at one waypoint before the journey is declared stuck.
const MAX_RETRIES: u32 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedEncounter {
    pub state: EncounterState,
    pub outcome: Outcome,
}

/// Pre-simulated collider set-ups split by outcome. The simulator is
/// deterministic, so replaying a set-up reuses its recorded outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncounterBank {
    pub no_collision: Vec<RecordedEncounter>,
    pub collision: Vec<RecordedEncounter>,
    /// Fraction of uniform spawns that collided while the bank was filled.
    pub collision_frequency: f64,
    /// Spawns that hit the time limit while the bank was filled.
    pub timeouts: usize,
}

/// Time constants of the journey model measured on a bank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeConstants {
    /// Mean journey time without a collision.
    pub travel: f64,
    /// Extra mean time of a journey with a collision.
    pub collide: f64,
}

impl EncounterBank {
    pub fn generate(cfg: &SimConfig, n_per_class: usize) -> Result<Self, SimError> {
        let data = generate_dataset(cfg, n_per_class, None)?;
        let collision_frequency = data.collision_frequency();
        let timeouts = data.timeouts.len();
        let (collision, no_collision): (Vec<_>, Vec<_>) = data
            .encounters
            .into_iter()
            .map(|e| (e.class, RecordedEncounter { state: e.state, outcome: e.outcome }))
            .partition(|(class, _)| *class == 2);
        Ok(EncounterBank {
            no_collision: no_collision.into_iter().map(|(_, e)| e).collect(),
            collision: collision.into_iter().map(|(_, e)| e).collect(),
            collision_frequency,
            timeouts,
        })
    }

    pub fn time_constants(&self) -> Result<TimeConstants, SimError> {
        let mean = |v: &[RecordedEncounter], what| {
            if v.is_empty() {
                return Err(SimError::EmptyBank(what));
            }
            Ok(v.iter().map(|e| e.outcome.journey_time).sum::<f64>() / v.len() as f64)
        };
        let travel = mean(&self.no_collision, "no-collision")?;
        Ok(TimeConstants { travel, collide: mean(&self.collision, "collision")? - travel })
    }
}

/// Wait probability for every `(khat, v)` the controller distinguishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitPolicy {
    wait: BTreeMap<(u32, Vec<bool>), f64>,
}

impl WaitPolicy {
    /// Reads the members choosing `wait = true` from a robot controller. A
    /// perfect-perception controller is keyed by the true class with no verdicts.
    pub fn from_assignment(assignment: &ControllerAssignment) -> Self {
        let mut wait = BTreeMap::new();
        for family in &assignment.families {
            let Some(member) = family.members.iter().find(|m| m.target == [1]) else {
                continue;
            };
            for ctx in &family.contexts {
                let key = match &ctx.obs {
                    Observation::True(k) => (*k, Vec::new()),
                    Observation::Perceived { khat, v } => (*khat, v.clone()),
                };
                wait.entry(key).or_insert(member.value);
            }
        }
        WaitPolicy { wait }
    }

    pub fn wait_probability(&self, khat: u32, v: &[bool]) -> Result<f64, SimError> {
        self.wait
            .get(&(khat, v.to_vec()))
            .copied()
            .ok_or_else(|| SimError::MissingDecision { khat, verdicts: verdict_bits(v) })
    }
}

pub enum EncounterSource<'a> {
    /// Colliders drawn from the bank, on collision course with probability `p_occ`.
    Bank { bank: &'a EncounterBank, p_occ: f64 },
    /// Colliders spawned uniformly and simulated on the spot.
    Spawn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSettings {
    pub p_collider: f64,
    pub wait_time: f64,
    pub n_journeys: usize,
    pub n_waypoints: usize,
    pub seed: u64,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        ValidationSettings { p_collider: 0.5, wait_time: 5.0, n_journeys: 1000, n_waypoints: 100, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JourneyRecord {
    pub time: f64,
    pub collisions: u32,
    pub retries: u64,
    /// Spawned colliders that were redrawn because the journey timed out.
    pub timeouts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_journeys: usize,
    pub n_waypoints: usize,
    /// Mean time of a whole journey.
    pub mean_time: f64,
    pub mean_time_stderr: f64,
    /// Fraction of journeys with at least one collision.
    pub collision_rate: f64,
    pub collision_rate_stderr: f64,
    /// Mean time per waypoint.
    pub waypoint_time: f64,
    pub waypoint_time_stderr: f64,
    /// Fraction of waypoints passed without a collision.
    pub waypoint_success: f64,
    pub waypoint_success_stderr: f64,
    pub journeys: Vec<JourneyRecord>,
}

struct Leg {
    time: f64,
    collision: bool,
    retries: u64,
    timeouts: u64,
}

fn check_probability(name: &str, p: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SimError::InvalidConfig(format!("{name} = {p} is not a probability")))
    }
}

/// Replays `policy` over `n_journeys` journeys of `n_waypoints` waypoints. At
/// each waypoint a collider is present with probability `p_collider`; the
/// surrogate perceives it and the policy decides. Waiting costs `wait_time`
/// and restarts the waypoint with a fresh collider. Journey `j` draws from
/// stream `j` of the ChaCha8 generator seeded with `seed`. Spawned colliders
/// whose journey times out are counted per journey and redrawn.
pub fn validate_controller(
    cfg: &SimConfig,
    policy: &WaitPolicy,
    surrogate: &SurrogatePerception,
    source: &EncounterSource<'_>,
    settings: &ValidationSettings,
) -> Result<ValidationReport, SimError> {
    cfg.check()?;
    if surrogate.tensor().classes() != 2 {
        return Err(SimError::ArityMismatch(surrogate.tensor().classes()));
    }
    check_probability("p_collider", settings.p_collider)?;
    if let EncounterSource::Bank { bank, p_occ } = source {
        check_probability("p_occ", *p_occ)?;
        if *p_occ > 0.0 && bank.collision.is_empty() {
            return Err(SimError::EmptyBank("collision"));
        }
        if *p_occ < 1.0 && bank.no_collision.is_empty() {
            return Err(SimError::EmptyBank("no-collision"));
        }
    }
    if settings.n_journeys == 0 || settings.n_waypoints == 0 {
        return Err(SimError::InvalidConfig("need at least one journey and one waypoint".into()));
    }
    let free = simulate_encounter(cfg, None)?;

    let leg = |rng: &mut ChaCha8Rng| -> Result<Leg, SimError> {
        let mut time = 0.0;
        let mut timeouts = 0;
        for retries in 0..MAX_RETRIES as u64 {
            if !rng.gen_bool(settings.p_collider) {
                return Ok(Leg { time: time + free.journey_time, collision: false, retries, timeouts });
            }
            let (k, outcome) = match source {
                EncounterSource::Bank { bank, p_occ } => {
                    let bucket = if rng.gen_bool(*p_occ) { &bank.collision } else { &bank.no_collision };
                    let e = &bucket[rng.gen_range(0..bucket.len())];
                    (if e.outcome.collision { 2 } else { 1 }, e.outcome)
                }
                EncounterSource::Spawn => {
                    let outcome = loop {
                        let state = spawn_collider(cfg, rng);
                        match finished(simulate_encounter(cfg, Some(&state)))? {
                            Some(outcome) => break outcome,
                            None => timeouts += 1,
                        }
                    };
                    (if outcome.collision { 2 } else { 1 }, outcome)
                }
            };
            let (khat, v) = surrogate.perceive(k, rng);
            if rng.gen_bool(policy.wait_probability(khat, &v)?) {
                time += settings.wait_time;
                continue;
            }
            return Ok(Leg { time: time + outcome.journey_time, collision: outcome.collision, retries, timeouts });
        }
        Err(SimError::Timeout { limit: cfg.max_time })
    };

    let per_journey: Vec<(JourneyRecord, f64)> = (0..settings.n_journeys)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(j as u64);
            let mut record = JourneyRecord { time: 0.0, collisions: 0, retries: 0, timeouts: 0 };
            let mut square_sum = 0.0;
            for _ in 0..settings.n_waypoints {
                let l = leg(&mut rng)?;
                record.time += l.time;
                square_sum += l.time * l.time;
                record.collisions += u32::from(l.collision);
                record.retries += l.retries;
                record.timeouts += l.timeouts;
            }
            Ok((record, square_sum))
        })
        .collect::<Result<_, SimError>>()?;

    let n = settings.n_journeys as f64;
    let legs = n * settings.n_waypoints as f64;
    let stderr =
        |mean: f64, mean_sq: f64, count: f64| ((mean_sq - mean * mean).max(0.0) / (count - 1.0).max(1.0)).sqrt();
    let mean_time = per_journey.iter().map(|(r, _)| r.time).sum::<f64>() / n;
    let mean_time_sq = per_journey.iter().map(|(r, _)| r.time * r.time).sum::<f64>() / n;
    let collision_rate = per_journey.iter().filter(|(r, _)| r.collisions > 0).count() as f64 / n;
    let waypoint_time = per_journey.iter().map(|(r, _)| r.time).sum::<f64>() / legs;
    let waypoint_time_sq = per_journey.iter().map(|(_, s)| s).sum::<f64>() / legs;
    let waypoint_success = 1.0 - per_journey.iter().map(|(r, _)| r.collisions as f64).sum::<f64>() / legs;
    Ok(ValidationReport {
        n_journeys: settings.n_journeys,
        n_waypoints: settings.n_waypoints,
        mean_time,
        mean_time_stderr: stderr(mean_time, mean_time_sq, n),
        collision_rate,
        collision_rate_stderr: stderr(collision_rate, collision_rate, n),
        waypoint_time,
        waypoint_time_stderr: stderr(waypoint_time, waypoint_time_sq, legs),
        waypoint_success,
        waypoint_success_stderr: stderr(waypoint_success, waypoint_success, legs),
        journeys: per_journey.into_iter().map(|(r, _)| r).collect(),
    })
}

/// Model values for one waypoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPrediction {
    /// `P=? [ !"collision" U "done" ]`.
    pub success: f64,
    /// `R{"time"}=? [ F "done" ]`.
    pub time: f64,
}

impl ModelPrediction {
    pub fn journey_time(&self, waypoints: usize) -> f64 {
        self.time * waypoints as f64
    }

    pub fn journey_collision_rate(&self, waypoints: usize) -> f64 {
        1.0 - self.success.powi(waypoints as i32)
    }
}

/// Evaluates `assignment` on the bundled robot model with its constants
/// replaced by measured ones. DNN-perception assignments are evaluated on the
/// model augmented with `tensor`.
pub fn robot_prediction(
    assignment: &ControllerAssignment,
    tensor: &ConfusionTensor,
    times: &TimeConstants,
    p_collider: f64,
    p_occ: f64,
    wait_time: f64,
) -> Result<ModelPrediction, SimError> {
    let opts = BuildOptions::default()
        .with_constant("p_collider", Value::Real(p_collider))
        .with_constant("p_occ", Value::Real(p_occ))
        .with_constant("t_travel", Value::Real(times.travel))
        .with_constant("t_collide", Value::Real(times.collide))
        .with_constant("t_wait", Value::Real(wait_time));
    let perfect = build_source(models::ROBOT, &opts)?;
    let model = match assignment.kind {
        PerceptionKind::Perfect => perfect,
        PerceptionKind::Dnn => augment(&perfect, &AugmentationSpec::new(tensor.clone()))?,
    };
    let dtmc = model.instantiate(assignment)?;
    let success = pmc(&parse_query("P=? [ !\"collision\" U \"done\" ]")?, &dtmc)?;
    let time = pmc(&parse_query("R{\"time\"}=? [ F \"done\" ]")?, &dtmc)?;
    Ok(ModelPrediction { success, time })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perfect_assignment(x1_wait: f64, x2_wait: f64) -> ControllerAssignment {
        let model = build_source(models::ROBOT, &BuildOptions::default()).unwrap();
        let named = BTreeMap::from([
            ("x1_wait".to_string(), x1_wait),
            ("x1_go".to_string(), 1.0 - x1_wait),
            ("x2_wait".to_string(), x2_wait),
            ("x2_go".to_string(), 1.0 - x2_wait),
        ]);
        ControllerAssignment::from_named(&model, &named)
    }

    fn small_bank() -> EncounterBank {
        EncounterBank::generate(&SimConfig::default(), 30).unwrap()
    }

    #[test]
    fn policy_reads_wait_members() {
        let policy = WaitPolicy::from_assignment(&perfect_assignment(0.2, 0.9));
        assert_eq!(policy.wait_probability(1, &[]).unwrap(), 0.2);
        assert_eq!(policy.wait_probability(2, &[]).unwrap(), 0.9);
        assert!(matches!(policy.wait_probability(1, &[true]), Err(SimError::MissingDecision { .. })));
    }

    #[test]
    fn always_go_without_colliders() {
        let cfg = SimConfig::default();
        let bank = small_bank();
        let settings = ValidationSettings { p_collider: 0.0, n_journeys: 20, n_waypoints: 7, ..Default::default() };
        let surrogate = SurrogatePerception::new(ConfusionTensor::perfect(2, 0));
        let report = validate_controller(
            &cfg,
            &WaitPolicy::from_assignment(&perfect_assignment(0.0, 0.0)),
            &surrogate,
            &EncounterSource::Bank { bank: &bank, p_occ: 0.5 },
            &settings,
        )
        .unwrap();
        let free = simulate_encounter(&cfg, None).unwrap().journey_time;
        assert_eq!(report.collision_rate, 0.0);
        assert!((report.mean_time - 7.0 * free).abs() < 1e-9);
        assert_eq!(report.journeys.len(), 20);
    }

    #[test]
    fn perfect_perception_that_always_avoids_never_collides() {
        let bank = small_bank();
        let settings = ValidationSettings { n_journeys: 50, n_waypoints: 20, ..Default::default() };
        let report = validate_controller(
            &SimConfig::default(),
            &WaitPolicy::from_assignment(&perfect_assignment(0.0, 1.0)),
            &SurrogatePerception::new(ConfusionTensor::perfect(2, 0)),
            &EncounterSource::Bank { bank: &bank, p_occ: 0.5 },
            &settings,
        )
        .unwrap();
        assert_eq!(report.collision_rate, 0.0);
        assert_eq!(report.waypoint_success, 1.0);
        assert!(report.journeys.iter().any(|j| j.retries > 0));
    }

    #[test]
    fn bank_times_define_the_model_constants() {
        let bank = small_bank();
        let times = bank.time_constants().unwrap();
        assert!((times.travel - SimConfig::default().free_travel_time()).abs() < 0.02);
        assert!(times.collide > 0.0);
        let go =
            robot_prediction(&perfect_assignment(0.0, 0.0), &ConfusionTensor::perfect(2, 0), &times, 0.5, 0.5, 5.0)
                .unwrap();
        assert!((go.success - 0.75).abs() < 1e-12);
        assert!((go.time - (times.travel + 0.25 * times.collide)).abs() < 1e-9);
        assert!((go.journey_collision_rate(2) - (1.0 - 0.5625)).abs() < 1e-12);
    }

    #[test]
    fn journeys_are_reproducible() {
        let bank = small_bank();
        let tensor = models::robot_tensor().project(&[0]).unwrap();
        let model = augment(
            &build_source(models::ROBOT, &BuildOptions::default()).unwrap(),
            &AugmentationSpec::new(tensor.clone()),
        )
        .unwrap();
        let values: Vec<f64> = model.params().iter().map(|p| if p.name.ends_with("_1") { 0.3 } else { 0.7 }).collect();
        let policy = WaitPolicy::from_assignment(&ControllerAssignment::from_values(&model, &values));
        let run = |seed| {
            let settings = ValidationSettings { n_journeys: 30, n_waypoints: 10, seed, ..Default::default() };
            let source = EncounterSource::Bank { bank: &bank, p_occ: 0.5 };
            validate_controller(
                &SimConfig::default(),
                &policy,
                &SurrogatePerception::new(tensor.clone()),
                &source,
                &settings,
            )
            .unwrap()
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }
}
