use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Direction, Objective, ParetoFront, SynthError};

/// Monte Carlo sample count for hypervolumes in more than two dimensions.
pub const HV_SAMPLES: usize = 1_000_000;

const HV_SEED: u64 = 0x5eed;

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Mean distance from each reference point to its nearest front point.
pub fn igd_points(front: &[Vec<f64>], reference: &[Vec<f64>]) -> f64 {
    let total: f64 = reference.iter().map(|r| front.iter().map(|p| distance(p, r)).fold(f64::INFINITY, f64::min)).sum();
    total / reference.len() as f64
}

pub fn igd(front: &ParetoFront, reference: &ParetoFront) -> Result<f64, SynthError> {
    if !front.same_objectives(reference) {
        return Err(SynthError::ObjectiveMismatch);
    }
    if front.is_empty() || reference.is_empty() {
        return Err(SynthError::EmptyFront);
    }
    Ok(igd_points(&front.points(), &reference.points()))
}

/// Minimisation form used for hypervolume: maximised probabilities become
/// their complement, maximised rewards are negated.
fn minimisation(objective: &Objective, value: f64) -> f64 {
    match objective.direction {
        Direction::Minimise => value,
        Direction::Maximise if objective.query.is_probability() => 1.0 - value,
        Direction::Maximise => -value,
    }
}

fn minimised(front: &ParetoFront) -> Vec<Vec<f64>> {
    front.points().iter().map(|p| front.objectives.iter().zip(p).map(|(o, &v)| minimisation(o, v)).collect()).collect()
}

/// Per-objective worst value of `points`, pushed outward by `scale`. For a
/// non-negative maximum this is `max * scale`.
pub fn nadir(points: &[Vec<f64>], scale: f64) -> Vec<f64> {
    let dims = points.first().map_or(0, Vec::len);
    (0..dims)
        .map(|d| {
            let max = points.iter().map(|p| p[d]).fold(f64::NEG_INFINITY, f64::max);
            max + (scale - 1.0) * max.abs()
        })
        .collect()
}

/// Volume dominated by `points` inside the box bounded above by `nadir`.
/// Points are clipped to the box first.
pub fn hypervolume(points: &[Vec<f64>], nadir: &[f64]) -> f64 {
    let clipped: Vec<Vec<f64>> =
        points.iter().map(|p| p.iter().zip(nadir).map(|(&x, &n)| x.min(n)).collect()).collect();
    match nadir.len() {
        0 => 0.0,
        1 => clipped.iter().map(|p| nadir[0] - p[0]).fold(0.0, f64::max),
        2 => {
            let mut sorted = clipped;
            sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
            let mut area = 0.0;
            let mut ceiling = nadir[1];
            for p in &sorted {
                if p[1] < ceiling {
                    area += (nadir[0] - p[0]) * (ceiling - p[1]);
                    ceiling = p[1];
                }
            }
            area
        }
        dims => {
            if clipped.is_empty() {
                return 0.0;
            }
            let lower: Vec<f64> =
                (0..dims).map(|d| clipped.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min)).collect();
            let volume: f64 = lower.iter().zip(nadir).map(|(l, n)| n - l).product();
            if volume <= 0.0 {
                return 0.0;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(HV_SEED);
            let mut sample = vec![0.0; dims];
            let mut hits = 0usize;
            for _ in 0..HV_SAMPLES {
                for (d, s) in sample.iter_mut().enumerate() {
                    *s = rng.gen_range(lower[d]..=nadir[d]);
                }
                if clipped.iter().any(|p| p.iter().zip(&sample).all(|(x, s)| x <= s)) {
                    hits += 1;
                }
            }
            volume * hits as f64 / HV_SAMPLES as f64
        }
    }
}

/// Hypervolume of `front` with the nadir taken from `reference` and scaled.
pub fn hv(front: &ParetoFront, reference: &ParetoFront, scale: f64) -> Result<f64, SynthError> {
    if !front.same_objectives(reference) {
        return Err(SynthError::ObjectiveMismatch);
    }
    if front.is_empty() || reference.is_empty() {
        return Err(SynthError::EmptyFront);
    }
    if !(scale.is_finite() && scale >= 1.0) {
        return Err(SynthError::InvalidSettings(format!("hypervolume scale {scale} must be at least 1")));
    }
    let nadir = nadir(&minimised(reference), scale);
    Ok(hypervolume(&minimised(front), &nadir))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pctl::parse_query;
    use crate::synth::SearchMetadata;

    #[test]
    fn igd_of_the_hand_example() {
        let reference = vec![vec![0.0, 0.0], vec![2.0, 2.0]];
        assert!((igd_points(&[vec![1.0, 1.0]], &reference) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(igd_points(&reference, &reference), 0.0);
    }

    #[test]
    fn two_dimensional_sweep() {
        assert_eq!(hypervolume(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[2.0, 2.0]), 3.0);
        assert_eq!(hypervolume(&[vec![0.0, 0.0]], &[1.0, 1.0]), 1.0);
        // Dominated and outside points add nothing.
        assert_eq!(hypervolume(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![1.5, 1.5], vec![3.0, -1.0]], &[2.0, 2.0]), 3.0);
        assert_eq!(hypervolume(&[vec![0.5]], &[2.0]), 1.5);
    }

    #[test]
    fn monte_carlo_matches_a_box() {
        let v = hypervolume(&[vec![0.0, 0.0, 0.0], vec![0.5, 0.5, -1.0]], &[1.0, 1.0, 1.0]);
        // Union of [0,1]^3 and [0.5,1]^2 x [-1,1] = 1 + 0.25 over a box of volume 2.
        assert!((v - 1.25).abs() < 0.01, "{v}");
    }

    #[test]
    fn nadir_scales_outward() {
        assert_eq!(nadir(&[vec![1.0, -2.0], vec![0.5, -4.0]], 1.5), vec![1.5, -1.0]);
    }

    #[test]
    fn hv_complements_maximised_probabilities() {
        let objectives = vec![
            Objective::maximise(parse_query("P=? [ F \"a\" ]").unwrap()),
            Objective::minimise(parse_query("R{\"r\"}=? [ F \"a\" ]").unwrap()),
        ];
        let front = |pts: &[(f64, f64)]| ParetoFront {
            objectives: objectives.clone(),
            members: pts
                .iter()
                .map(|&(p, r)| crate::synth::CandidateResult {
                    assignment: crate::markov::ControllerAssignment::empty(crate::markov::PerceptionKind::Dnn),
                    objective_values: vec![p, r],
                    constraint_values: Vec::new(),
                    feasible: true,
                })
                .collect(),
            metadata: SearchMetadata::Imported,
        };
        let reference = front(&[(1.0, 2.0), (0.5, 1.0)]);
        // Minimised reference: (0, 2), (0.5, 1); nadir at scale 2 is (1, 4).
        let value = hv(&reference, &reference, 2.0).unwrap();
        assert!((value - (1.0 * 2.0 + 0.5 * 1.0)).abs() < 1e-12);
        let other = ParetoFront { objectives: objectives[..1].to_vec(), ..front(&[]) };
        assert!(matches!(hv(&reference, &other, 1.5), Err(SynthError::ObjectiveMismatch)));
        assert!(matches!(igd(&front(&[]), &reference), Err(SynthError::EmptyFront)));
    }
}
