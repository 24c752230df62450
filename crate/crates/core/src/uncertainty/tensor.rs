use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::UncertaintyError;

/// One test input: true class, predicted class (both 1-based) and verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VerifiedSample {
    pub true_label: u32,
    pub predicted: u32,
    pub verdicts: Vec<bool>,
}

impl VerifiedSample {
    pub fn new(true_label: u32, predicted: u32, verdicts: Vec<bool>) -> Self {
        VerifiedSample { true_label, predicted, verdicts }
    }
}

/// Exact probability as a ratio of counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    pub fn value(self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

/// Index of a verdict vector, reading it as a binary number with the first
/// verifier as the most significant bit.
pub fn verdict_index(v: &[bool]) -> usize {
    v.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b))
}

pub fn verdicts_from_index(n: usize, index: usize) -> Vec<bool> {
    (0..n).rev().map(|i| (index >> i) & 1 == 1).collect()
}

/// `"10"` for `[true, false]`; empty for `n = 0`.
pub fn verdict_bits(v: &[bool]) -> String {
    v.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Mergeable counts for `2^n` confusion matrices of size `K × K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCounts {
    classes: usize,
    verifiers: usize,
    /// Flattened `[v][k][k']`.
    counts: Vec<u64>,
}

impl ConfusionCounts {
    pub fn new(classes: usize, verifiers: usize) -> Self {
        ConfusionCounts { classes, verifiers, counts: vec![0; (1 << verifiers) * classes * classes] }
    }

    fn slot(&self, k: u32, kp: u32, v: usize) -> usize {
        (v * self.classes + (k as usize - 1)) * self.classes + (kp as usize - 1)
    }

    /// Validates `sample` against the declared shape; `row` is for diagnostics.
    pub fn check(&self, row: usize, sample: &VerifiedSample) -> Result<(), UncertaintyError> {
        if sample.verdicts.len() != self.verifiers {
            return Err(UncertaintyError::ArityMismatch {
                row,
                expected: self.verifiers,
                found: sample.verdicts.len(),
            });
        }
        for label in [sample.true_label, sample.predicted] {
            if label == 0 || label as usize > self.classes {
                return Err(UncertaintyError::LabelOutOfRange { row, label, classes: self.classes });
            }
        }
        Ok(())
    }

    /// Adds a sample that has passed [`check`](Self::check).
    pub fn add(&mut self, sample: &VerifiedSample) {
        let i = self.slot(sample.true_label, sample.predicted, verdict_index(&sample.verdicts));
        self.counts[i] += 1;
    }

    pub fn merge(mut self, other: &ConfusionCounts) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self
    }

    pub fn finish(self) -> Result<ConfusionTensor, UncertaintyError> {
        ConfusionTensor::from_flat(self.classes, self.verifiers, self.counts)
    }
}

/// Counts `C_v[k][k']` and the probabilities derived from them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "TensorDocument", try_from = "TensorDocument")]
pub struct ConfusionTensor {
    classes: usize,
    verifiers: usize,
    counts: Vec<u64>,
    totals: Vec<u64>,
}

/// Builds the tensor of `rows` for `classes` classes and `verifiers` verdicts.
pub fn ingest(rows: &[VerifiedSample], classes: usize, verifiers: usize) -> Result<ConfusionTensor, UncertaintyError> {
    let empty = ConfusionCounts::new(classes, verifiers);
    for (row, sample) in rows.iter().enumerate() {
        empty.check(row + 1, sample)?;
    }
    rows.par_chunks(8192)
        .map(|chunk| {
            let mut c = ConfusionCounts::new(classes, verifiers);
            chunk.iter().for_each(|s| c.add(s));
            c
        })
        .reduce(|| empty.clone(), |a, b| a.merge(&b))
        .finish()
}

impl ConfusionTensor {
    fn from_flat(classes: usize, verifiers: usize, counts: Vec<u64>) -> Result<Self, UncertaintyError> {
        if classes == 0 {
            return Err(UncertaintyError::Shape("at least one class is required".into()));
        }
        if verifiers >= usize::BITS as usize / 2 {
            return Err(UncertaintyError::Shape(format!("{verifiers} verifiers is too many")));
        }
        let mut totals = vec![0u64; classes];
        for (i, c) in counts.iter().enumerate() {
            totals[(i / classes) % classes] += c;
        }
        if let Some(k) = totals.iter().position(|&t| t == 0) {
            return Err(UncertaintyError::EmptyClass { class: k as u32 + 1 });
        }
        Ok(ConfusionTensor { classes, verifiers, counts, totals })
    }

    /// `matrices[v][k-1][k'-1]`, with `v` ordered by [`verdict_index`].
    pub fn from_counts(classes: usize, verifiers: usize, matrices: &[Vec<Vec<u64>>]) -> Result<Self, UncertaintyError> {
        if matrices.len() != 1 << verifiers {
            return Err(UncertaintyError::Shape(format!(
                "expected {} confusion matrices, found {}",
                1usize << verifiers,
                matrices.len()
            )));
        }
        let mut flat = Vec::with_capacity(matrices.len() * classes * classes);
        for m in matrices {
            if m.len() != classes || m.iter().any(|r| r.len() != classes) {
                return Err(UncertaintyError::Shape(format!("confusion matrices must be {classes}x{classes}")));
            }
            flat.extend(m.iter().flatten());
        }
        Self::from_flat(classes, verifiers, flat)
    }

    /// Every class is predicted correctly with all verdicts true.
    pub fn perfect(classes: usize, verifiers: usize) -> Self {
        let mut c = ConfusionCounts::new(classes, verifiers);
        for k in 1..=classes as u32 {
            c.add(&VerifiedSample::new(k, k, vec![true; verifiers]));
        }
        c.finish().expect("every class has a sample")
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn verifiers(&self) -> usize {
        self.verifiers
    }

    pub fn num_outcomes(&self) -> usize {
        1 << self.verifiers
    }

    /// All verdict vectors in index order.
    pub fn outcomes(&self) -> impl Iterator<Item = Vec<bool>> + '_ {
        (0..self.num_outcomes()).map(|i| verdicts_from_index(self.verifiers, i))
    }

    fn slot(&self, k: u32, kp: u32, v: usize) -> usize {
        assert!(
            (1..=self.classes as u32).contains(&k)
                && (1..=self.classes as u32).contains(&kp)
                && v < self.num_outcomes(),
            "index ({k}, {kp}, {v}) outside the tensor"
        );
        (v * self.classes + (k as usize - 1)) * self.classes + (kp as usize - 1)
    }

    /// `C_v[k][k']`.
    pub fn count(&self, k: u32, kp: u32, v: usize) -> u64 {
        self.counts[self.slot(k, kp, v)]
    }

    /// `C_v` as a `K × K` matrix indexed from zero.
    pub fn matrix(&self, v: usize) -> Vec<Vec<u64>> {
        let k = self.classes;
        (0..k).map(|r| self.counts[(v * k + r) * k..(v * k + r + 1) * k].to_vec()).collect()
    }

    /// Samples of true class `k` across all outcomes.
    pub fn total(&self, k: u32) -> u64 {
        self.totals[k as usize - 1]
    }

    pub fn per_class_totals(&self) -> &[u64] {
        &self.totals
    }

    pub fn ratio(&self, k: u32, kp: u32, v: usize) -> Ratio {
        Ratio { numerator: self.count(k, kp, v), denominator: self.total(k) }
    }

    /// `p[k][k'][v]`.
    pub fn probability(&self, k: u32, kp: u32, v: usize) -> f64 {
        self.ratio(k, kp, v).value()
    }

    /// `(k', v, p)` for every prediction with non-zero probability given `k`,
    /// ordered by `k'` then `v`.
    pub fn support(&self, k: u32) -> Vec<(u32, usize, f64)> {
        let mut out = Vec::new();
        for kp in 1..=self.classes as u32 {
            for v in 0..self.num_outcomes() {
                if self.count(k, kp, v) > 0 {
                    out.push((kp, v, self.probability(k, kp, v)));
                }
            }
        }
        out
    }

    /// Sums the confusion matrices over all verdicts.
    pub fn marginalize(&self) -> ConfusionTensor {
        let k = self.classes;
        let mut flat = vec![0; k * k];
        for chunk in self.counts.chunks(k * k) {
            for (a, b) in flat.iter_mut().zip(chunk) {
                *a += b;
            }
        }
        ConfusionTensor { classes: k, verifiers: 0, counts: flat, totals: self.totals.clone() }
    }

    /// The tensor seen by the verifiers in `keep` only, in that order; the
    /// others' verdicts are summed out.
    pub fn project(&self, keep: &[usize]) -> Result<ConfusionTensor, UncertaintyError> {
        if let Some(&bad) = keep.iter().find(|&&i| i >= self.verifiers) {
            return Err(UncertaintyError::Shape(format!("verifier {bad} outside 0..{}", self.verifiers)));
        }
        let n = self.verifiers;
        let mut counts = ConfusionCounts::new(self.classes, keep.len());
        for v in 0..self.num_outcomes() {
            let verdicts = verdicts_from_index(n, v);
            let kept: Vec<bool> = keep.iter().map(|&i| verdicts[i]).collect();
            let target = verdict_index(&kept);
            let k = self.classes;
            for (slot, c) in self.counts[v * k * k..(v + 1) * k * k].iter().enumerate() {
                counts.counts[target * k * k + slot] += c;
            }
        }
        counts.finish()
    }

    /// Draws `(k', v)` for true class `k` with probability exactly `p[k][k'][v]`.
    pub fn sample(&self, k: u32, rng: &mut impl Rng) -> (u32, usize) {
        let mut remaining = rng.gen_range(0..self.total(k));
        for v in 0..self.num_outcomes() {
            for kp in 1..=self.classes as u32 {
                let c = self.count(k, kp, v);
                if remaining < c {
                    return (kp, v);
                }
                remaining -= c;
            }
        }
        unreachable!("counts sum to the class total")
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixEntry {
    verdicts: String,
    matrix: Vec<Vec<u64>>,
}

#[derive(Serialize, Deserialize)]
struct ProbabilityEntry {
    true_class: u32,
    predicted: u32,
    verdicts: String,
    numerator: u64,
    denominator: u64,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct TensorDocument {
    classes: usize,
    verifiers: usize,
    per_class_totals: Vec<u64>,
    confusion: Vec<MatrixEntry>,
    #[serde(default)]
    probabilities: Vec<ProbabilityEntry>,
}

impl From<ConfusionTensor> for TensorDocument {
    fn from(t: ConfusionTensor) -> Self {
        let confusion = (0..t.num_outcomes())
            .map(|v| MatrixEntry { verdicts: verdict_bits(&verdicts_from_index(t.verifiers, v)), matrix: t.matrix(v) })
            .collect();
        let mut probabilities = Vec::new();
        for k in 1..=t.classes as u32 {
            for v in 0..t.num_outcomes() {
                for kp in 1..=t.classes as u32 {
                    let r = t.ratio(k, kp, v);
                    probabilities.push(ProbabilityEntry {
                        true_class: k,
                        predicted: kp,
                        verdicts: verdict_bits(&verdicts_from_index(t.verifiers, v)),
                        numerator: r.numerator,
                        denominator: r.denominator,
                        value: r.value(),
                    });
                }
            }
        }
        TensorDocument {
            classes: t.classes,
            verifiers: t.verifiers,
            per_class_totals: t.totals,
            confusion,
            probabilities,
        }
    }
}

impl TryFrom<TensorDocument> for ConfusionTensor {
    type Error = UncertaintyError;

    fn try_from(doc: TensorDocument) -> Result<Self, Self::Error> {
        let mut matrices = vec![Vec::new(); 1usize.checked_shl(doc.verifiers as u32).unwrap_or(0)];
        if matrices.len() != doc.confusion.len() {
            return Err(UncertaintyError::Shape(format!(
                "{} verifiers need {} confusion matrices, found {}",
                doc.verifiers,
                matrices.len(),
                doc.confusion.len()
            )));
        }
        let mut seen = vec![false; matrices.len()];
        for entry in doc.confusion {
            let v = parse_bits(&entry.verdicts, doc.verifiers)?;
            if std::mem::replace(&mut seen[v], true) {
                return Err(UncertaintyError::Shape(format!("verdicts `{}` listed twice", entry.verdicts)));
            }
            matrices[v] = entry.matrix;
        }
        let t = ConfusionTensor::from_counts(doc.classes, doc.verifiers, &matrices)?;
        if t.totals != doc.per_class_totals {
            return Err(UncertaintyError::Shape("per-class totals disagree with the confusion matrices".into()));
        }
        for p in doc.probabilities {
            let v = parse_bits(&p.verdicts, doc.verifiers)?;
            let in_range = |l: u32| (1..=doc.classes as u32).contains(&l);
            if !in_range(p.true_class) || !in_range(p.predicted) {
                return Err(UncertaintyError::Shape(format!(
                    "probability entry for class {} outside the tensor",
                    p.true_class
                )));
            }
            if t.ratio(p.true_class, p.predicted, v) != (Ratio { numerator: p.numerator, denominator: p.denominator }) {
                return Err(UncertaintyError::Shape(format!(
                    "probability p[{}][{}][{}] disagrees with the counts",
                    p.true_class, p.predicted, p.verdicts
                )));
            }
        }
        Ok(t)
    }
}

fn parse_bits(bits: &str, n: usize) -> Result<usize, UncertaintyError> {
    if bits.len() != n || !bits.chars().all(|c| c == '0' || c == '1') {
        return Err(UncertaintyError::Shape(format!("`{bits}` is not a verdict vector of length {n}")));
    }
    Ok(bits.chars().fold(0, |acc, c| (acc << 1) | usize::from(c == '1')))
}
