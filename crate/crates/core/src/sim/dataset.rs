use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{simulate_encounter, spawn_collider, EncounterState, Outcome, SimConfig, SimError};
use crate::uncertainty::{verdicts_from_index, ConfusionTensor, VerifiedSample};

/// Spawn attempts allowed before a class is declared unreachable.
const MAX_ATTEMPTS: u64 = 1_000_000;
const BATCH: usize = 1024;

/// Stand-in for a classifier and its verifiers: given the true class it
/// reports `(khat, v)` with exactly the tensor's probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogatePerception {
    tensor: ConfusionTensor,
}

impl SurrogatePerception {
    pub fn new(tensor: ConfusionTensor) -> Self {
        SurrogatePerception { tensor }
    }

    pub fn tensor(&self) -> &ConfusionTensor {
        &self.tensor
    }

    pub fn perceive(&self, k: u32, rng: &mut impl Rng) -> (u32, Vec<bool>) {
        let (khat, v) = self.tensor.sample(k, rng);
        (khat, verdicts_from_index(self.tensor.verifiers(), v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledEncounter {
    pub state: EncounterState,
    pub class: u32,
    /// Outcome when the robot goes regardless.
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub encounters: Vec<LabelledEncounter>,
    /// One classifier reading per encounter; empty without a surrogate.
    pub samples: Vec<VerifiedSample>,
    pub attempts: u64,
    /// Spawns of each class among all attempts, including the discarded ones.
    pub spawned: [u64; 2],
    /// Spawns whose journey hit the time limit. They have no class and are
    /// left out of the dataset.
    pub timeouts: Vec<EncounterState>,
}

impl Dataset {
    /// Fraction of uniform spawns that collide with a robot that goes regardless.
    pub fn collision_frequency(&self) -> f64 {
        self.spawned[1] as f64 / (self.spawned[0] + self.spawned[1]) as f64
    }
}

/// Rejection-samples spawns until both classes have `n_per_class` set-ups.
/// Encounters come from the stream seeded by `cfg.seed` and readings from a
/// separate stream, so adding a surrogate leaves the encounters unchanged.
pub fn generate_dataset(
    cfg: &SimConfig,
    n_per_class: usize,
    surrogate: Option<&SurrogatePerception>,
) -> Result<Dataset, SimError> {
    sample_dataset(cfg, n_per_class, surrogate, MAX_ATTEMPTS)
}

fn sample_dataset(
    cfg: &SimConfig,
    n_per_class: usize,
    surrogate: Option<&SurrogatePerception>,
    max_attempts: u64,
) -> Result<Dataset, SimError> {
    cfg.check()?;
    if n_per_class == 0 {
        return Err(SimError::InvalidConfig("n_per_class must be at least 1".into()));
    }
    let mut spawns = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut readings = ChaCha8Rng::seed_from_u64(cfg.seed);
    readings.set_stream(1);
    let mut counts = [0usize; 2];
    let mut encounters = Vec::with_capacity(2 * n_per_class);
    let mut attempts = 0u64;
    let mut spawned = [0u64; 2];
    let mut timeouts = Vec::new();
    while counts.iter().any(|&c| c < n_per_class) {
        if attempts >= max_attempts {
            let class = if counts[0] < n_per_class { 1 } else { 2 };
            return Err(SimError::SamplingStall { class, attempts });
        }
        let size = BATCH.min((max_attempts - attempts) as usize);
        let batch: Vec<EncounterState> = (0..size).map(|_| spawn_collider(cfg, &mut spawns)).collect();
        let outcomes =
            batch.par_iter().map(|c| finished(simulate_encounter(cfg, Some(c)))).collect::<Result<Vec<_>, _>>()?;
        for (state, outcome) in batch.into_iter().zip(outcomes) {
            attempts += 1;
            let Some(outcome) = outcome else {
                timeouts.push(state);
                continue;
            };
            let class = if outcome.collision { 2 } else { 1 };
            spawned[class as usize - 1] += 1;
            if counts[class as usize - 1] < n_per_class {
                counts[class as usize - 1] += 1;
                encounters.push(LabelledEncounter { state, class, outcome });
            }
            if counts.iter().all(|&c| c >= n_per_class) {
                break;
            }
        }
    }
    let samples = match surrogate {
        Some(s) => encounters
            .iter()
            .map(|e| {
                let (khat, v) = s.perceive(e.class, &mut readings);
                VerifiedSample::new(e.class, khat, v)
            })
            .collect(),
        None => Vec::new(),
    };
    Ok(Dataset { encounters, samples, attempts, spawned, timeouts })
}

/// Maps a timeout to `None` and keeps every other error.
pub(crate) fn finished(result: Result<Outcome, SimError>) -> Result<Option<Outcome>, SimError> {
    match result {
        Ok(outcome) => Ok(Some(outcome)),
        Err(SimError::Timeout { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Writes normalised rows `x_diff,y_diff,s,theta,theta_dot,c`.
pub fn write_encounters_csv(writer: impl Write, dataset: &Dataset, cfg: &SimConfig) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(writer);
    let to_io = |e: csv::Error| SimError::Io(e.into());
    w.write_record(["x_diff", "y_diff", "s", "theta", "theta_dot", "c"]).map_err(to_io)?;
    for e in &dataset.encounters {
        let mut row: Vec<String> = e.state.normalized(cfg).iter().map(|v| v.to_string()).collect();
        row.push(e.class.to_string());
        w.write_record(&row).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_and_labelled() {
        let cfg = SimConfig { seed: 3, ..SimConfig::default() };
        let data = generate_dataset(&cfg, 20, None).unwrap();
        assert_eq!(data.encounters.len(), 40);
        assert_eq!(data.encounters.iter().filter(|e| e.class == 2).count(), 20);
        assert!(data.samples.is_empty());
        assert!(data.attempts >= 40);
        assert_eq!(data.spawned[0] + data.spawned[1] + data.timeouts.len() as u64, data.attempts);
        for e in &data.encounters {
            assert_eq!(e.outcome.collision, e.class == 2);
        }
    }

    #[test]
    fn perfect_surrogate_is_always_right() {
        let cfg = SimConfig::default();
        let surrogate = SurrogatePerception::new(ConfusionTensor::perfect(2, 1));
        let data = generate_dataset(&cfg, 10, Some(&surrogate)).unwrap();
        assert_eq!(data.samples.len(), 20);
        assert!(data.samples.iter().all(|s| s.true_label == s.predicted && s.verdicts == [true]));
        assert_eq!(data.encounters, generate_dataset(&cfg, 10, None).unwrap().encounters);
        let mut out = Vec::new();
        write_encounters_csv(&mut out, &data, &cfg).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 21);
        assert!(text.starts_with("x_diff,y_diff,s,theta,theta_dot,c\n"));
    }

    #[test]
    fn unreachable_class_stalls() {
        // Colliders spawning on top of the robot always touch it.
        let cfg = SimConfig { x_lim: 0.01, y_lim: 0.01, ..SimConfig::default() };
        assert!(matches!(
            sample_dataset(&cfg, 1, None, 3000),
            Err(SimError::SamplingStall { class: 1, attempts: 3000 })
        ));
    }

    #[test]
    fn timeouts_are_kept_aside() {
        // The robot orbits the goal after this collider knocks it aside.
        let stuck = EncounterState {
            x_diff: 0.5915987213987801,
            y_diff: 9.274981704206805,
            s: 0.20428727066706515,
            theta: -0.4286858980174677,
            theta_dot: 0.7111363295178652,
        };
        let cfg = SimConfig::default();
        assert!(matches!(simulate_encounter(&cfg, Some(&stuck)), Err(SimError::Timeout { .. })));
        assert_eq!(finished(simulate_encounter(&cfg, Some(&stuck))).unwrap(), None);
        let data = generate_dataset(&SimConfig { seed: 9, ..cfg }, 2000, None).unwrap();
        assert!(!data.timeouts.is_empty());
        assert!(data.timeouts.iter().all(|s| simulate_encounter(&cfg, Some(s)).is_err()));
    }
}
