use serde::{Deserialize, Serialize};

use super::front::dominates;
use super::{CandidateResult, Evaluator, ParetoFront, Requirements, SearchMetadata, SearchSpace, SynthError};
use crate::markov::ExplicitPdtmc;

/// Largest number of grid candidates evaluated unless configured otherwise.
pub const DEFAULT_CANDIDATE_CAP: u64 = 100_000_000;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    pub step: f64,
    /// Restrict every family to its one-hot vertices.
    pub deterministic: bool,
    pub cap: u64,
    /// Return every evaluated candidate alongside the front.
    pub keep_candidates: bool,
}

impl GridSettings {
    pub fn new(step: f64) -> Self {
        GridSettings { step, deterministic: false, cap: DEFAULT_CANDIDATE_CAP, keep_candidates: false }
    }

    pub fn deterministic(mut self, deterministic: bool) -> Self {
        self.deterministic = deterministic;
        self
    }

    pub fn cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn keep_candidates(mut self, keep: bool) -> Self {
        self.keep_candidates = keep;
        self
    }
}

/// Output of a search: the front, how many candidates were evaluated and,
/// when requested, all of them in evaluation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub front: ParetoFront,
    pub evaluated: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<CandidateResult>,
}

/// Number of grid subdivisions for `step`, if `1/step` is a whole number.
pub(crate) fn subdivisions(step: f64) -> Result<u32, SynthError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(SynthError::InvalidStep(step));
    }
    let n = (1.0 / step).round();
    if (n * step - 1.0).abs() > 1e-9 || n > u32::MAX as f64 {
        return Err(SynthError::InvalidStep(step));
    }
    Ok(n as u32)
}

/// All ways of writing `total` as an ordered sum of `parts` non-negative integers,
/// in lexicographic order.
pub fn compositions(parts: usize, total: u32) -> Vec<Vec<u32>> {
    fn extend(prefix: &mut Vec<u32>, parts: usize, left: u32, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == parts {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for v in 0..=left {
            prefix.push(v);
            extend(prefix, parts, left - v, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        extend(&mut Vec::with_capacity(parts), parts, total, &mut out);
    }
    out
}

/// Per-family candidate points for a grid.
pub(crate) fn family_options(space: &SearchSpace, n: u32, deterministic: bool) -> Vec<Vec<Vec<f64>>> {
    space
        .families()
        .iter()
        .map(|members| {
            let m = members.len();
            if deterministic {
                (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
            } else {
                compositions(m, n).into_iter().map(|c| c.into_iter().map(|q| q as f64 / n as f64).collect()).collect()
            }
        })
        .collect()
}

/// Non-dominated feasible candidates seen so far, keyed by oriented objective point.
pub(crate) struct Archive {
    entries: Vec<(Vec<f64>, CandidateResult)>,
}

impl Archive {
    pub(crate) fn new() -> Self {
        Archive { entries: Vec::new() }
    }

    pub(crate) fn offer(&mut self, point: Vec<f64>, candidate: impl FnOnce() -> CandidateResult) {
        if self.entries.iter().any(|(p, _)| dominates(p, &point)) {
            return;
        }
        self.entries.retain(|(p, _)| !dominates(&point, p));
        self.entries.push((point, candidate()));
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub(crate) fn into_candidates(self) -> Vec<CandidateResult> {
        self.entries.into_iter().map(|(_, c)| c).collect()
    }
}

/// Exhaustive search over every family point on the `step` grid.
pub fn grid_search(
    model: &ExplicitPdtmc,
    reqs: &Requirements,
    settings: &GridSettings,
) -> Result<SearchResult, SynthError> {
    let n = subdivisions(settings.step)?;
    let space = SearchSpace::new(model)?;
    let options = family_options(&space, n, settings.deterministic);
    let total = options.iter().try_fold(1u128, |acc, o| acc.checked_mul(o.len() as u128)).unwrap_or(u128::MAX);
    if total > settings.cap as u128 {
        return Err(SynthError::BudgetExceeded { candidates: total, cap: settings.cap });
    }
    let total = total as u64;
    let evaluator = Evaluator::uncached(model, reqs);
    let mut archive = Archive::new();
    let mut candidates = Vec::new();
    let mut start = 0u64;
    while start < total {
        let end = (start + CHUNK as u64).min(total);
        let batch: Vec<Vec<f64>> = (start..end)
            .map(|mut index| {
                let mut points = vec![Vec::new(); options.len()];
                for (f, opts) in options.iter().enumerate().rev() {
                    let len = opts.len() as u64;
                    points[f] = opts[(index % len) as usize].clone();
                    index /= len;
                }
                space.values(&points)
            })
            .collect();
        let evals = evaluator.evaluate_batch(&batch)?;
        for (values, eval) in batch.iter().zip(&evals) {
            if settings.keep_candidates {
                candidates.push(CandidateResult::new(model, values, eval));
            }
            if eval.feasible {
                let point = reqs.objectives.iter().zip(&eval.objectives).map(|(o, &v)| o.oriented(v)).collect();
                archive.offer(point, || CandidateResult::new(model, values, eval));
            }
        }
        start = end;
    }
    if archive.is_empty() {
        return Err(SynthError::InfeasibleAll { evaluated: total });
    }
    let metadata =
        SearchMetadata::Grid { step: settings.step, deterministic: settings.deterministic, candidates: total };
    let front = ParetoFront::from_candidates(reqs.objectives.clone(), archive.into_candidates(), metadata);
    Ok(SearchResult { front, evaluated: total, candidates })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_counts() {
        assert_eq!(compositions(2, 10).len(), 11);
        assert_eq!(compositions(3, 4).len(), 15);
        assert_eq!(compositions(3, 2)[..3], [vec![0, 0, 2], vec![0, 1, 1], vec![0, 2, 0]]);
        assert!(compositions(4, 3).iter().all(|c| c.iter().sum::<u32>() == 3));
        assert_eq!(compositions(1, 5), vec![vec![5]]);
    }

    #[test]
    fn steps_must_divide_one() {
        assert_eq!(subdivisions(0.1).unwrap(), 10);
        assert_eq!(subdivisions(0.25).unwrap(), 4);
        assert_eq!(subdivisions(1.0).unwrap(), 1);
        for bad in [0.0, -0.1, 0.3, 1.5, f64::NAN] {
            assert!(matches!(subdivisions(bad), Err(SynthError::InvalidStep(_))), "{bad}");
        }
    }
}
