//! Flags categories a trained model never predicts.

use serde::{Deserialize, Serialize};

use crate::labels::{StanceLabel, NUM_LABELS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollapseWarning {
    pub code: u8,
    pub label: StanceLabel,
    pub trained_examples: u64,
    pub message: String,
}

/// Codes with zero predictions that had at least one training example.
pub fn detect_class_collapse(
    predicted_counts: &[u64; NUM_LABELS],
    trained_counts: &[u64; NUM_LABELS],
) -> Vec<CollapseWarning> {
    StanceLabel::ALL
        .iter()
        .filter(|l| predicted_counts[l.index()] == 0 && trained_counts[l.index()] > 0)
        .map(|&l| CollapseWarning {
            code: l.code(),
            label: l,
            trained_examples: trained_counts[l.index()],
            message: format!(
                "class collapse: label {} ({}) was never predicted although training data held {} examples",
                l.code(),
                l.display_name(),
                trained_counts[l.index()]
            ),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codes(w: Vec<CollapseWarning>) -> Vec<u8> {
        w.into_iter().map(|w| w.code).collect()
    }

    #[test]
    fn finds_the_missing_category() {
        let trained = [200; 7];
        assert_eq!(codes(detect_class_collapse(&[0, 5, 5, 5, 5, 5, 5], &trained)), vec![0]);
        assert!(detect_class_collapse(&[1; 7], &trained).is_empty());
        assert_eq!(codes(detect_class_collapse(&[0; 7], &trained)), (0..7).collect::<Vec<u8>>());
    }

    #[test]
    fn untrained_categories_are_not_collapse() {
        let trained = [0, 10, 10, 10, 10, 10, 10];
        assert!(detect_class_collapse(&[0, 1, 1, 1, 1, 1, 1], &trained).is_empty());
    }
}
