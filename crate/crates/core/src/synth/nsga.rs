use std::cmp::Ordering;
use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::front::dominates;
use super::grid::{subdivisions, Archive, SearchResult};
use super::{
    CandidateResult, Evaluation, Evaluator, ParetoFront, Requirements, SearchMetadata, SearchSpace, SynthError,
};
use crate::markov::ExplicitPdtmc;

const DUPLICATE_RETRIES: usize = 10;

fn key(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.to_bits()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaSettings {
    pub population: usize,
    /// Every candidate counts, including ones answered from the cache.
    pub max_evaluations: u64,
    pub seed: u64,
    /// Categorical genes choosing one member per family.
    pub deterministic: bool,
    pub crossover_probability: f64,
    /// Distribution index of simulated binary crossover.
    pub eta_crossover: f64,
    /// Distribution index of polynomial mutation.
    pub eta_mutation: f64,
    /// Per-gene mutation probability; `None` means `1 / genes`.
    pub mutation_rate: Option<f64>,
    /// Round decoded family points to multiples of this step.
    pub snap: Option<f64>,
    pub keep_candidates: bool,
}

impl GaSettings {
    pub fn new(population: usize, max_evaluations: u64, seed: u64) -> Self {
        GaSettings {
            population,
            max_evaluations,
            seed,
            deterministic: false,
            crossover_probability: 0.9,
            eta_crossover: 15.0,
            eta_mutation: 20.0,
            mutation_rate: None,
            snap: None,
            keep_candidates: false,
        }
    }

    pub fn deterministic(mut self, deterministic: bool) -> Self {
        self.deterministic = deterministic;
        self
    }

    pub fn snap(mut self, step: Option<f64>) -> Self {
        self.snap = step;
        self
    }

    pub fn keep_candidates(mut self, keep: bool) -> Self {
        self.keep_candidates = keep;
        self
    }

    fn check(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSettings(m));
        if self.population < 4 || self.population % 2 != 0 {
            return bad(format!("population {} must be even and at least 4", self.population));
        }
        if self.max_evaluations < self.population as u64 {
            return bad(format!("max evaluations {} below population {}", self.max_evaluations, self.population));
        }
        if !(0.0..=1.0).contains(&self.crossover_probability) {
            return bad(format!("crossover probability {}", self.crossover_probability));
        }
        if !(self.eta_crossover >= 0.0 && self.eta_mutation >= 0.0) {
            return bad("distribution indices must be non-negative".into());
        }
        if let Some(rate) = self.mutation_rate {
            if !(0.0..=1.0).contains(&rate) {
                return bad(format!("mutation rate {rate}"));
            }
        }
        Ok(())
    }
}

struct Individual {
    genes: Vec<f64>,
    eval: Evaluation,
    oriented: Vec<f64>,
    rank: usize,
    crowding: f64,
}

/// Genome layout and decoding for one search space.
struct Encoding<'a> {
    space: &'a SearchSpace,
    deterministic: bool,
    snap: Option<u32>,
}

impl Encoding<'_> {
    fn genes(&self) -> usize {
        if self.deterministic {
            self.space.families().len()
        } else {
            self.space.families().iter().map(Vec::len).sum()
        }
    }

    fn random(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        if self.deterministic {
            self.space.families().iter().map(|f| rng.gen_range(0..f.len()) as f64).collect()
        } else {
            // Exponential spacings give a uniform point on each simplex.
            self.space
                .families()
                .iter()
                .flat_map(|f| {
                    let raw: Vec<f64> = (0..f.len()).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                    let sum: f64 = raw.iter().sum();
                    raw.into_iter().map(move |x| x / sum)
                })
                .collect()
        }
    }

    /// Projects `genes` back onto the simplices (in place) and returns the
    /// parameter vector they encode.
    fn decode(&self, genes: &mut [f64]) -> Vec<f64> {
        if self.deterministic {
            let choices: Vec<usize> = genes.iter().map(|&g| g as usize).collect();
            return self.space.one_hot(&choices);
        }
        let mut points = Vec::with_capacity(self.space.families().len());
        let mut offset = 0;
        for members in self.space.families() {
            let chunk = &mut genes[offset..offset + members.len()];
            offset += members.len();
            let sum: f64 = chunk.iter().sum();
            if sum > 0.0 {
                chunk.iter_mut().for_each(|g| *g /= sum);
            } else {
                chunk.iter_mut().for_each(|g| *g = 1.0 / members.len() as f64);
            }
            if let Some(n) = self.snap {
                snap_to_grid(chunk, n);
            }
            points.push(chunk.to_vec());
        }
        self.space.values(&points)
    }
}

/// Rounds a simplex point to multiples of `1/n` by largest remainder; ties go
/// to the lower index.
fn snap_to_grid(point: &mut [f64], n: u32) {
    let scaled: Vec<f64> = point.iter().map(|p| p * n as f64).collect();
    let mut units: Vec<u32> = scaled.iter().map(|s| s.floor() as u32).collect();
    let assigned: u32 = units.iter().sum();
    let mut order: Vec<usize> = (0..point.len()).collect();
    order.sort_by(|&a, &b| (scaled[b] - scaled[b].floor()).total_cmp(&(scaled[a] - scaled[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().take(n.saturating_sub(assigned) as usize) {
        units[i] += 1;
    }
    for (p, u) in point.iter_mut().zip(units) {
        *p = u as f64 / n as f64;
    }
}

/// Feasible beats infeasible, lower violation beats higher, and feasible pairs
/// compare by Pareto dominance.
fn constrained_dominates(a: &Individual, b: &Individual) -> bool {
    match (a.eval.feasible, b.eval.feasible) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.eval.violation < b.eval.violation,
        (true, true) => dominates(&a.oriented, &b.oriented),
    }
}

/// Assigns ranks and returns the fronts as index lists, best first.
fn non_dominated_sort(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let mut dominated_by = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && constrained_dominates(&pop[i], &pop[j]) {
                dominated_by[i].push(j);
            } else if i != j && constrained_dominates(&pop[j], &pop[i]) {
                counts[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            pop[i].rank = fronts.len();
            for &j in &dominated_by[i] {
                counts[j] -= 1;
                if counts[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

fn assign_crowding(pop: &mut [Individual], front: &[usize]) {
    for &i in front {
        pop[i].crowding = 0.0;
    }
    let dims = pop[front[0]].oriented.len();
    for d in 0..dims {
        let mut order = front.to_vec();
        order.sort_by(|&a, &b| pop[a].oriented[d].total_cmp(&pop[b].oriented[d]).then(a.cmp(&b)));
        let lo = pop[order[0]].oriented[d];
        let hi = pop[order[order.len() - 1]].oriented[d];
        pop[order[0]].crowding = f64::INFINITY;
        pop[order[order.len() - 1]].crowding = f64::INFINITY;
        let span = hi - lo;
        if !(span.is_finite() && span > 0.0) {
            continue;
        }
        for w in 1..order.len().saturating_sub(1) {
            let gap = pop[order[w + 1]].oriented[d] - pop[order[w - 1]].oriented[d];
            pop[order[w]].crowding += gap / span;
        }
    }
}

fn better(a: &Individual, b: &Individual) -> bool {
    match a.rank.cmp(&b.rank) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a.crowding > b.crowding,
    }
}

fn tournament<'p>(pop: &'p [Individual], rng: &mut ChaCha8Rng) -> &'p Individual {
    let a = &pop[rng.gen_range(0..pop.len())];
    let b = &pop[rng.gen_range(0..pop.len())];
    if better(b, a) {
        b
    } else {
        a
    }
}

/// Bounded simulated binary crossover on the unit interval.
fn sbx(x1: f64, x2: f64, eta: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    if (x1 - x2).abs() < 1e-14 {
        return (x1, x2);
    }
    let (lo, hi) = (x1.min(x2), x1.max(x2));
    let u: f64 = rng.gen();
    let child = |bound_gap: f64| {
        let beta = 1.0 + 2.0 * bound_gap / (hi - lo);
        let alpha = 2.0 - beta.powf(-(eta + 1.0));
        if u <= 1.0 / alpha {
            (u * alpha).powf(1.0 / (eta + 1.0))
        } else {
            (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
        }
    };
    let bq_lo = child(lo);
    let bq_hi = child(1.0 - hi);
    let c1 = (0.5 * ((lo + hi) - bq_lo * (hi - lo))).clamp(0.0, 1.0);
    let c2 = (0.5 * ((lo + hi) + bq_hi * (hi - lo))).clamp(0.0, 1.0);
    if rng.gen_bool(0.5) {
        (c2, c1)
    } else {
        (c1, c2)
    }
}

/// Bounded polynomial mutation on the unit interval.
fn polynomial_mutation(x: f64, eta: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen();
    let power = 1.0 / (eta + 1.0);
    let delta = if u < 0.5 {
        let base = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - x).powf(eta + 1.0);
        base.powf(power) - 1.0
    } else {
        let base = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * x.powf(eta + 1.0);
        1.0 - base.powf(power)
    };
    (x + delta).clamp(0.0, 1.0)
}

/// Seeded NSGA-II over the families of `model`. The front is the non-dominated
/// feasible subset of every candidate evaluated during the run.
pub fn evolutionary_search(
    model: &ExplicitPdtmc,
    reqs: &Requirements,
    settings: &GaSettings,
) -> Result<SearchResult, SynthError> {
    settings.check()?;
    let snap = settings.snap.map(subdivisions).transpose()?;
    let space = SearchSpace::new(model)?;
    let encoding = Encoding { space: &space, deterministic: settings.deterministic, snap };
    let genes = encoding.genes();
    let rate = settings.mutation_rate.unwrap_or(1.0 / genes as f64);
    let categories: Vec<usize> = space.families().iter().map(Vec::len).collect();
    let evaluator = Evaluator::new(model, reqs);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut archive = Archive::new();
    let mut candidates = Vec::new();
    let mut evaluated = 0u64;

    let mut evaluate = |genomes: Vec<Vec<f64>>, evaluated: &mut u64| -> Result<Vec<Individual>, SynthError> {
        let mut genomes = genomes;
        let values: Vec<Vec<f64>> = genomes.iter_mut().map(|g| encoding.decode(g)).collect();
        let evals = evaluator.evaluate_batch(&values)?;
        *evaluated += genomes.len() as u64;
        let mut out = Vec::with_capacity(genomes.len());
        for ((genes, values), eval) in genomes.into_iter().zip(values).zip(evals) {
            let oriented: Vec<f64> =
                reqs.objectives.iter().zip(&eval.objectives).map(|(o, &v)| o.oriented(v)).collect();
            if settings.keep_candidates {
                candidates.push(CandidateResult::new(model, &values, &eval));
            }
            if eval.feasible {
                archive.offer(oriented.clone(), || CandidateResult::new(model, &values, &eval));
            }
            out.push(Individual { genes, eval, oriented, rank: 0, crowding: 0.0 });
        }
        Ok(out)
    };

    let initial: Vec<Vec<f64>> = (0..settings.population).map(|_| encoding.random(&mut rng)).collect();
    let mut seen: HashSet<Vec<u64>> = initial.iter().map(|g| key(&encoding.decode(&mut g.clone()))).collect();
    let mut pop = evaluate(initial, &mut evaluated)?;
    for front in non_dominated_sort(&mut pop) {
        assign_crowding(&mut pop, &front);
    }

    while evaluated < settings.max_evaluations {
        let quota = (settings.max_evaluations - evaluated).min(settings.population as u64) as usize;
        let mut offspring = Vec::with_capacity(settings.population);
        while offspring.len() < quota {
            let mut a = tournament(&pop, &mut rng).genes.clone();
            let mut b = tournament(&pop, &mut rng).genes.clone();
            if rng.gen_bool(settings.crossover_probability) {
                for g in 0..genes {
                    if rng.gen_bool(0.5) {
                        if settings.deterministic {
                            std::mem::swap(&mut a[g], &mut b[g]);
                        } else {
                            (a[g], b[g]) = sbx(a[g], b[g], settings.eta_crossover, &mut rng);
                        }
                    }
                }
            }
            for child in [&mut a, &mut b] {
                for g in 0..genes {
                    if rng.gen_bool(rate) {
                        child[g] = if settings.deterministic {
                            rng.gen_range(0..categories[g]) as f64
                        } else {
                            polynomial_mutation(child[g], settings.eta_mutation, &mut rng)
                        };
                    }
                }
                // Offspring that decode to an already evaluated candidate get
                // one gene reset at random, a bounded number of times.
                for _ in 0..DUPLICATE_RETRIES {
                    if seen.insert(key(&encoding.decode(&mut child.clone()))) {
                        break;
                    }
                    let g = rng.gen_range(0..genes);
                    child[g] = if settings.deterministic { rng.gen_range(0..categories[g]) as f64 } else { rng.gen() };
                }
            }
            offspring.push(a);
            offspring.push(b);
        }
        offspring.truncate(quota);
        let children = evaluate(offspring, &mut evaluated)?;
        pop.extend(children);
        let fronts = non_dominated_sort(&mut pop);
        let mut survivors = Vec::with_capacity(settings.population);
        for front in fronts {
            assign_crowding(&mut pop, &front);
            if survivors.len() + front.len() <= settings.population {
                survivors.extend(front);
            } else {
                let mut rest = front;
                rest.sort_by(|&a, &b| pop[b].crowding.total_cmp(&pop[a].crowding).then(a.cmp(&b)));
                rest.truncate(settings.population - survivors.len());
                survivors.extend(rest);
            }
            if survivors.len() == settings.population {
                break;
            }
        }
        survivors.sort_unstable();
        let mut slots: Vec<Option<Individual>> = pop.into_iter().map(Some).collect();
        pop = survivors.into_iter().map(|i| slots[i].take().expect("survivor taken once")).collect();
    }

    if archive.is_empty() {
        return Err(SynthError::InfeasibleAll { evaluated });
    }
    let metadata = SearchMetadata::Evolutionary { settings: settings.clone(), evaluations: evaluated };
    let front = ParetoFront::from_candidates(reqs.objectives.clone(), archive.into_candidates(), metadata);
    Ok(SearchResult { front, evaluated, candidates })
}
