use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Per-class top-1 accuracy and the confusion matrix of one evaluation.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    /// `confusion[i][i] / M_i`; `None` for classes without samples.
    pub per_class_acc: Vec<Option<f64>>,
    /// Rows are true labels, columns predictions.
    pub confusion: Vec<Vec<u64>>,
    /// `M_i`
    pub sample_count: Vec<u64>,
    /// Mean of the defined per-class accuracies.
    pub macro_acc: Option<f64>,
    pub micro_acc: Option<f64>,
    pub mean_loss: Option<f64>,
}

impl EvalReport {
    pub fn from_predictions(labels: &[usize], predictions: &[usize], n_classes: usize) -> Result<Self> {
        if labels.len() != predictions.len() {
            bail!(Shape, "EvalReport", "{} labels, {} predictions", labels.len(), predictions.len());
        }
        let mut confusion = vec![vec![0u64; n_classes]; n_classes];
        for (&y, &p) in labels.iter().zip(predictions) {
            if y >= n_classes || p >= n_classes {
                bail!(Index, "EvalReport", "label {} / prediction {} outside {} classes", y, p, n_classes);
            }
            confusion[y][p] += 1;
        }
        Ok(Self::from_confusion(confusion))
    }

    pub fn from_confusion(confusion: Vec<Vec<u64>>) -> Self {
        let sample_count: Vec<u64> = confusion.iter().map(|r| r.iter().sum()).collect();
        let per_class_acc: Vec<Option<f64>> = confusion
            .iter()
            .enumerate()
            .map(|(i, r)| (sample_count[i] > 0).then(|| r[i] as f64 / sample_count[i] as f64))
            .collect();
        let total: u64 = sample_count.iter().sum();
        let correct: u64 = (0..confusion.len()).map(|i| confusion[i][i]).sum();
        Self {
            macro_acc: mean_defined(per_class_acc.iter().copied()),
            micro_acc: (total > 0).then(|| correct as f64 / total as f64),
            per_class_acc,
            confusion,
            sample_count,
            mean_loss: None,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.confusion.len()
    }

    /// Mean accuracy over the given classes that have samples.
    pub fn macro_over(&self, classes: &[usize]) -> Option<f64> {
        mean_defined(classes.iter().map(|&c| self.per_class_acc.get(c).copied().flatten()))
    }
}

pub(crate) fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (s, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_count() {
        let r = EvalReport::from_predictions(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(r.per_class_acc, vec![Some(0.5), Some(1.0)]);
        assert_eq!(r.confusion, vec![vec![1, 1], vec![0, 1]]);
        assert_eq!(r.macro_acc, Some(0.75));
        assert!((r.micro_acc.unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_class_is_undefined() {
        let r = EvalReport::from_predictions(&[0, 2], &[0, 2], 3).unwrap();
        assert_eq!(r.per_class_acc, vec![Some(1.0), None, Some(1.0)]);
        assert_eq!(r.macro_acc, Some(1.0));
        assert_eq!(r.macro_over(&[1]), None);
    }

    #[test]
    fn nine_class_grid() {
        let labels: Vec<usize> = (0..27).map(|i| i % 9).collect();
        let r = EvalReport::from_predictions(&labels, &labels, 9).unwrap();
        assert_eq!(r.confusion.len(), 9);
        assert!(r.confusion.iter().all(|row| row.len() == 9));
        assert!(r.per_class_acc.iter().all(|&a| a == Some(1.0)));
    }
}
