use serde::{Deserialize, Serialize};

use super::{DRGrade, MetricsError};

/// `counts[actual][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<Vec<u64>>,
}

/// One-vs-rest tallies for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryCounts {
    pub true_pos: u64,
    pub false_neg: u64,
    pub false_pos: u64,
    pub true_neg: u64,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self { classes, counts: vec![vec![0; classes]; classes] }
    }

    /// Tallies label pairs; labels must be below `classes`.
    pub fn from_labels(predicted: &[usize], actual: &[usize], classes: usize) -> Result<Self, MetricsError> {
        if predicted.len() != actual.len() {
            return Err(MetricsError::LengthMismatch { predicted: predicted.len(), actual: actual.len() });
        }
        let mut cm = Self::new(classes);
        for (&p, &a) in predicted.iter().zip(actual) {
            let bad = if p >= classes { Some(p) } else if a >= classes { Some(a) } else { None };
            if let Some(label) = bad {
                return Err(MetricsError::LabelOutOfRange { label, classes });
            }
            cm.counts[a][p] += 1;
        }
        Ok(cm)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual][predicted]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes).map(|k| self.counts[k][k]).sum()
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.correct(), self.total())
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn one_vs_rest(&self, class: usize) -> BinaryCounts {
        let true_pos = self.counts[class][class];
        let false_neg = self.support(class) - true_pos;
        let false_pos = self.counts.iter().map(|row| row[class]).sum::<u64>() - true_pos;
        let true_neg = self.total() - true_pos - false_neg - false_pos;
        BinaryCounts { true_pos, false_neg, false_pos, true_neg }
    }
}

/// Five-grade confusion matrix.
pub fn confusion_matrix(predicted: &[DRGrade], actual: &[DRGrade]) -> Result<ConfusionMatrix, MetricsError> {
    let p: Vec<usize> = predicted.iter().map(|g| g.index()).collect();
    let a: Vec<usize> = actual.iter().map(|g| g.index()).collect();
    ConfusionMatrix::from_labels(&p, &a, DRGrade::COUNT)
}

pub(crate) fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}
