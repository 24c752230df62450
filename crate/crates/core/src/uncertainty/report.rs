use std::fmt;

use serde::{Deserialize, Serialize};

use super::tensor::{verdict_bits, verdicts_from_index, ConfusionTensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeAccuracy {
    pub verdicts: String,
    pub samples: u64,
    pub correct: u64,
    /// `None` when no sample has these verdicts.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub class: u32,
    pub samples: u64,
    pub accuracy: f64,
    /// Probability that a class input is classified correctly with each verdict vector.
    pub correct_with: Vec<f64>,
    /// Probability that it is misclassified with each verdict vector.
    pub wrong_with: Vec<f64>,
}

/// Accuracy per verdict vector, overall and per true class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub outcomes: Vec<OutcomeAccuracy>,
    pub overall: f64,
    pub classes: Vec<ClassAccuracy>,
}

impl ConfusionTensor {
    pub fn accuracy_report(&self) -> AccuracyReport {
        let k = self.classes() as u32;
        let outcomes: Vec<OutcomeAccuracy> = (0..self.num_outcomes())
            .map(|v| {
                let samples: u64 =
                    (1..=k).flat_map(|a| (1..=k).map(move |b| (a, b))).map(|(a, b)| self.count(a, b, v)).sum();
                let correct: u64 = (1..=k).map(|a| self.count(a, a, v)).sum();
                OutcomeAccuracy {
                    verdicts: verdict_bits(&verdicts_from_index(self.verifiers(), v)),
                    samples,
                    correct,
                    accuracy: (samples > 0).then(|| correct as f64 / samples as f64),
                }
            })
            .collect();
        let samples: u64 = outcomes.iter().map(|o| o.samples).sum();
        let correct: u64 = outcomes.iter().map(|o| o.correct).sum();
        let classes = (1..=k)
            .map(|c| {
                let correct_with: Vec<f64> = (0..self.num_outcomes()).map(|v| self.probability(c, c, v)).collect();
                let wrong_with = (0..self.num_outcomes())
                    .map(|v| (1..=k).filter(|&p| p != c).map(|p| self.probability(c, p, v)).sum())
                    .collect();
                ClassAccuracy {
                    class: c,
                    samples: self.total(c),
                    accuracy: correct_with.iter().sum(),
                    correct_with,
                    wrong_with,
                }
            })
            .collect();
        AccuracyReport { outcomes, overall: correct as f64 / samples as f64, classes }
    }
}

impl fmt::Display for AccuracyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = |v: &str| {
            if v.is_empty() {
                "-".to_string()
            } else {
                v.to_string()
            }
        };
        writeln!(f, "{:<10} {:>10} {:>10} {:>10}", "verdicts", "samples", "correct", "accuracy")?;
        for o in &self.outcomes {
            let acc = o.accuracy.map_or("n/a".to_string(), |a| format!("{a:.6}"));
            writeln!(f, "{:<10} {:>10} {:>10} {:>10}", label(&o.verdicts), o.samples, o.correct, acc)?;
        }
        writeln!(f, "overall accuracy {:.6}", self.overall)?;
        for c in &self.classes {
            write!(f, "class {} ({} samples): accuracy {:.6}", c.class, c.samples, c.accuracy)?;
            for (o, (r, w)) in self.outcomes.iter().zip(c.correct_with.iter().zip(&c.wrong_with)) {
                write!(f, "; v={} right {:.6} wrong {:.6}", label(&o.verdicts), r, w)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use crate::uncertainty::{ingest, verdict_index, ConfusionTensor, VerifiedSample};

    #[test]
    fn perfect_classifier() {
        let r = ConfusionTensor::perfect(3, 2).accuracy_report();
        assert_eq!(r.overall, 1.0);
        assert!(r.outcomes.iter().all(|o| o.accuracy.is_none_or(|a| a == 1.0)));
    }

    #[test]
    fn per_outcome_accuracy() {
        let rows = [(1, 1, true), (1, 1, false), (1, 2, false), (2, 2, true)]
            .map(|(k, p, v)| VerifiedSample::new(k, p, vec![v]));
        let r = ingest(&rows, 2, 1).unwrap().accuracy_report();
        assert_eq!(r.outcomes[verdict_index(&[true])].accuracy, Some(1.0));
        assert_eq!(r.outcomes[verdict_index(&[false])].accuracy, Some(0.5));
        assert_eq!(r.overall, 0.75);
        assert!((r.classes[0].accuracy - 2.0 / 3.0).abs() < 1e-15);
    }
}
