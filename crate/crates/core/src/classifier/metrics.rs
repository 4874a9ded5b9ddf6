//! Confusion matrix, accuracy and per-category precision / recall / F1.

use serde::{Deserialize, Serialize};

use super::model::Model;
use crate::labels::NUM_LABELS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `confusion[truth][predicted]`.
    pub confusion: [[u64; NUM_LABELS]; NUM_LABELS],
    pub correct: u64,
    pub total: u64,
    pub accuracy: f64,
    pub precision: [f64; NUM_LABELS],
    pub recall: [f64; NUM_LABELS],
    pub f1: [f64; NUM_LABELS],
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    /// Builds metrics from `(truth, predicted)` code pairs. Any 0/0 ratio is 0.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u8, u8)>) -> Self {
        let mut confusion = [[0u64; NUM_LABELS]; NUM_LABELS];
        for (t, p) in pairs {
            confusion[t as usize][p as usize] += 1;
        }
        Self::from_confusion(confusion)
    }

    pub fn from_confusion(confusion: [[u64; NUM_LABELS]; NUM_LABELS]) -> Self {
        let total: u64 = confusion.iter().flatten().sum();
        let correct: u64 = (0..NUM_LABELS).map(|k| confusion[k][k]).sum();
        let mut precision = [0.0; NUM_LABELS];
        let mut recall = [0.0; NUM_LABELS];
        let mut f1 = [0.0; NUM_LABELS];
        for k in 0..NUM_LABELS {
            let tp = confusion[k][k];
            let predicted: u64 = (0..NUM_LABELS).map(|t| confusion[t][k]).sum();
            let actual: u64 = confusion[k].iter().sum();
            precision[k] = ratio(tp, predicted);
            recall[k] = ratio(tp, actual);
            let s = precision[k] + recall[k];
            f1[k] = if s == 0.0 { 0.0 } else { 2.0 * precision[k] * recall[k] / s };
        }
        Self {
            confusion,
            correct,
            total,
            accuracy: ratio(correct, total),
            precision,
            recall,
            f1,
        }
    }

    pub fn true_counts(&self) -> [u64; NUM_LABELS] {
        self.confusion.map(|row| row.iter().sum())
    }
}

pub fn evaluate(model: &Model, heldout: &[(String, u8)]) -> Metrics {
    Metrics::from_pairs(heldout.iter().map(|(text, code)| (*code, model.predict(text).code)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_of_ten() {
        let mut pairs: Vec<(u8, u8)> = (0..9).map(|i| (i % 7, i % 7)).collect();
        pairs.push((2, 3));
        let m = Metrics::from_pairs(pairs);
        assert_eq!(m.accuracy, 0.9);
        assert_eq!(m.true_counts().iter().sum::<u64>(), 10);
    }

    #[test]
    fn single_predicted_category() {
        let pairs = [(1u8, 4u8), (4, 4), (4, 4), (6, 4)];
        let m = Metrics::from_pairs(pairs);
        assert_eq!(m.recall[4], 1.0);
        assert_eq!(m.recall[1], 0.0);
        assert_eq!(m.precision[4], 0.5);
        for k in [0, 1, 2, 3, 5, 6] {
            assert_eq!(m.precision[k], 0.0);
        }
        assert_eq!(m.f1[0], 0.0);
    }
}
