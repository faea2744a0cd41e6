//! Lesion-count grading, confusion matrices and the sensitivity / specificity /
//! F-measure family, with one-vs-rest reduction for multiclass problems.
//!
//! Undefined ratios (`0/0`) are `None` throughout. The one exception is the
//! F-measure of a class that was never predicted but has support: precision
//! is taken as 1 and recall is 0, which pins F to 0.

mod confusion;
mod grade;
mod report;

pub use confusion::{confusion_matrix, BinaryCounts, ConfusionMatrix};
pub use grade::{grade_from_lesions, DRGrade, MILD_MAX_MA, MODERATE_MAX_MA};
pub use report::{
    render_report, Improvement, Metric, ModelEntry, ModelMetrics, PublishedTable, Report,
    REPORT_FORMAT_VERSION, SENSITIVITY_TOLERANCE_PP, SECONDARY_TOLERANCE_PP,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use confusion::ratio;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("predicted has {predicted} labels but actual has {actual}")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("label {label} outside 0..{classes}")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("every per-class value is undefined")]
    AllUndefined,
    #[error("baseline value must be > 0, got {0}")]
    ZeroBaseline(f64),
    #[error("report needs at least one model")]
    NoModels,
    #[error("report: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub f_measure: Option<f64>,
}

impl ClassMetrics {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Sensitivity => self.sensitivity,
            Metric::Specificity => self.specificity,
            Metric::Precision => self.precision,
            Metric::FMeasure => self.f_measure,
        }
    }
}

/// Metrics of one class from its one-vs-rest counts.
pub fn class_metrics(cm: &ConfusionMatrix, class: usize) -> ClassMetrics {
    metrics_from_counts(cm.one_vs_rest(class))
}

pub fn metrics_from_counts(c: BinaryCounts) -> ClassMetrics {
    let sensitivity = ratio(c.true_pos, c.true_pos + c.false_neg);
    let specificity = ratio(c.true_neg, c.true_neg + c.false_pos);
    let precision = ratio(c.true_pos, c.true_pos + c.false_pos);
    let f_measure = match (precision, sensitivity) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (None, Some(0.0)) => Some(0.0),
        _ => None,
    };
    ClassMetrics { sensitivity, specificity, precision, f_measure }
}

pub fn all_class_metrics(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    (0..cm.classes()).map(|k| class_metrics(cm, k)).collect()
}

/// Arithmetic mean over defined per-class values, counting the excluded ones.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MacroValue {
    pub mean: Option<f64>,
    pub excluded: usize,
}

impl MacroValue {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let (mut sum, mut n, mut excluded) = (0.0, 0usize, 0usize);
        for v in values {
            match v {
                Some(v) => {
                    sum += v;
                    n += 1;
                }
                None => excluded += 1,
            }
        }
        Self { mean: (n > 0).then(|| sum / n as f64), excluded }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub sensitivity: MacroValue,
    pub specificity: MacroValue,
    pub precision: MacroValue,
    pub f_measure: MacroValue,
}

impl MacroMetrics {
    pub fn get(&self, metric: Metric) -> MacroValue {
        match metric {
            Metric::Sensitivity => self.sensitivity,
            Metric::Specificity => self.specificity,
            Metric::Precision => self.precision,
            Metric::FMeasure => self.f_measure,
        }
    }
}

/// Per-metric macro average; fails only when no metric has any defined value.
pub fn macro_average(per_class: &[ClassMetrics]) -> Result<MacroMetrics, MetricsError> {
    let of = |m: Metric| MacroValue::of(per_class.iter().map(|c| c.get(m)));
    let out = MacroMetrics {
        sensitivity: of(Metric::Sensitivity),
        specificity: of(Metric::Specificity),
        precision: of(Metric::Precision),
        f_measure: of(Metric::FMeasure),
    };
    if Metric::ALL.iter().all(|&m| out.get(m).mean.is_none()) {
        return Err(MetricsError::AllUndefined);
    }
    Ok(out)
}

/// `100·(ours/baseline − 1)`.
pub fn relative_improvement(ours: f64, baseline: f64) -> Result<f64, MetricsError> {
    if baseline.is_nan() || baseline <= 0.0 {
        return Err(MetricsError::ZeroBaseline(baseline));
    }
    Ok(100.0 * (ours / baseline - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eq_arithmetic_on_hand_counts() {
        let m = metrics_from_counts(BinaryCounts { true_pos: 80, false_neg: 20, false_pos: 10, true_neg: 90 });
        assert_relative_eq!(m.sensitivity.unwrap(), 0.8);
        assert_relative_eq!(m.specificity.unwrap(), 0.9);
        assert_relative_eq!(m.precision.unwrap(), 80.0 / 90.0);
        let (p, r) = (80.0 / 90.0, 0.8);
        assert_relative_eq!(m.f_measure.unwrap(), 2.0 * p * r / (p + r));
    }

    #[test]
    fn f_is_zero_when_never_predicted_but_present() {
        // class has support but is never predicted: recall 0, precision 0/0
        let m = metrics_from_counts(BinaryCounts { true_pos: 0, false_neg: 5, false_pos: 0, true_neg: 10 });
        assert_eq!(m.sensitivity, Some(0.0));
        assert_eq!(m.precision, None);
        assert_eq!(m.f_measure, Some(0.0));
        // no support and never predicted: everything positive-side undefined
        let m = metrics_from_counts(BinaryCounts { true_pos: 0, false_neg: 0, false_pos: 0, true_neg: 10 });
        assert_eq!((m.sensitivity, m.precision, m.f_measure), (None, None, None));
        assert_eq!(m.specificity, Some(1.0));
    }

    #[test]
    fn diagonal_matrix_is_perfect() {
        let cm = ConfusionMatrix::from_labels(&[0, 1, 1, 2, 4], &[0, 1, 1, 2, 4], 5).unwrap();
        for (k, m) in all_class_metrics(&cm).iter().enumerate() {
            assert_eq!(m.specificity, Some(1.0));
            if cm.support(k) > 0 {
                assert_eq!((m.sensitivity, m.f_measure), (Some(1.0), Some(1.0)));
            } else {
                assert_eq!(m.sensitivity, None);
            }
        }
    }

    #[test]
    fn macro_and_improvement() {
        let col = |v: &[f64]| -> Vec<ClassMetrics> {
            v.iter().map(|&s| ClassMetrics { sensitivity: Some(s), ..Default::default() }).collect()
        };
        let edlm = macro_average(&col(&[0.96, 0.92, 0.95, 0.93, 0.93])).unwrap();
        assert_relative_eq!(edlm.sensitivity.mean.unwrap(), 0.938, epsilon = 1e-12);
        assert_eq!(edlm.specificity.excluded, 5);
        let vgg = macro_average(&col(&[0.91, 0.83, 0.90, 0.85, 0.84])).unwrap();
        assert_relative_eq!(vgg.sensitivity.mean.unwrap(), 0.866, epsilon = 1e-12);
        let same = macro_average(&col(&[0.7; 5])).unwrap();
        assert_relative_eq!(same.sensitivity.mean.unwrap(), 0.7, epsilon = 1e-12);

        let d = relative_improvement(0.938, 0.866).unwrap();
        assert!((d - 8.3141).abs() < 1e-3, "{d}");
        assert!((d - 8.28).abs() <= 0.15);
        assert_eq!(relative_improvement(0.5, 0.5).unwrap(), 0.0);
        let d = relative_improvement(0.938, 0.92).unwrap();
        assert!((d - 1.9565).abs() < 1e-3 && (d - 2.04).abs() <= 0.15);
        assert!(matches!(relative_improvement(1.0, 0.0), Err(MetricsError::ZeroBaseline(_))));

        assert!(matches!(macro_average(&[ClassMetrics::default()]), Err(MetricsError::AllUndefined)));
        assert!(matches!(macro_average(&[]), Err(MetricsError::AllUndefined)));
    }
}
