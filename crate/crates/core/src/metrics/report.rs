use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{macro_average, relative_improvement, ClassMetrics, MacroMetrics, MetricsError};

pub const REPORT_FORMAT_VERSION: u32 = 1;
/// Allowed gap between recomputed and reported sensitivity improvements.
pub const SENSITIVITY_TOLERANCE_PP: f64 = 0.15;
/// Informational bound for specificity and F-measure improvements, whose
/// recomputation from two-decimal table values drifts further.
pub const SECONDARY_TOLERANCE_PP: f64 = 1.0;

const PUBLISHED_JSON: &str = include_str!("../../data/published_metrics.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Sensitivity,
    Specificity,
    Precision,
    FMeasure,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Sensitivity, Metric::Specificity, Metric::Precision, Metric::FMeasure];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Sensitivity => "Sensitivity",
            Metric::Specificity => "Specificity",
            Metric::Precision => "Precision",
            Metric::FMeasure => "F measure",
        }
    }

    fn tolerance_pp(self) -> f64 {
        match self {
            Metric::Sensitivity => SENSITIVITY_TOLERANCE_PP,
            _ => SECONDARY_TOLERANCE_PP,
        }
    }
}

/// Input to [`render_report`]: one model's per-class metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub name: String,
    pub per_class: Vec<ClassMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub name: String,
    pub per_class: Vec<ClassMetrics>,
    #[serde(rename = "macro")]
    pub macro_avg: MacroMetrics,
}

/// Macro improvement of the reference model over one baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub metric: Metric,
    pub baseline: String,
    pub reference_value: f64,
    pub baseline_value: f64,
    pub percent: f64,
    pub claimed_percent: Option<f64>,
    pub gap_pp: Option<f64>,
    pub status: Option<String>,
}

/// Machine-readable report. Field order is fixed, so JSON output is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format_version: u32,
    pub class_names: Vec<String>,
    pub reference_model: String,
    pub models: Vec<ModelEntry>,
    pub improvements: Vec<Improvement>,
}

/// Per-metric reported improvements keyed by baseline name.
pub type Claims = BTreeMap<Metric, BTreeMap<String, f64>>;

/// The bundled transcription of the published per-class results.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PublishedTable {
    pub class_names: Vec<String>,
    pub models: Vec<PublishedModel>,
    pub claimed_improvements: Claims,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PublishedModel {
    pub name: String,
    pub sensitivity: Vec<f64>,
    pub specificity: Vec<f64>,
    pub f_measure: Vec<f64>,
}

impl PublishedTable {
    pub fn bundled() -> Self {
        serde_json::from_str(PUBLISHED_JSON).expect("bundled published metrics parse")
    }

    pub fn model_metrics(&self) -> Vec<ModelMetrics> {
        self.models
            .iter()
            .map(|m| ModelMetrics {
                name: m.name.clone(),
                per_class: (0..m.sensitivity.len())
                    .map(|k| ClassMetrics {
                        sensitivity: Some(m.sensitivity[k]),
                        specificity: m.specificity.get(k).copied(),
                        precision: None,
                        f_measure: m.f_measure.get(k).copied(),
                    })
                    .collect(),
            })
            .collect()
    }

    pub fn render(&self) -> Result<Report, MetricsError> {
        render_report(&self.class_names, &self.model_metrics(), Some(&self.claimed_improvements))
    }
}

/// Builds a report. The last model is the reference every other model is compared against.
pub fn render_report(
    class_names: &[String],
    models: &[ModelMetrics],
    claims: Option<&Claims>,
) -> Result<Report, MetricsError> {
    let reference = models.last().ok_or(MetricsError::NoModels)?;
    let entries = models
        .iter()
        .map(|m| {
            Ok(ModelEntry { name: m.name.clone(), per_class: m.per_class.clone(), macro_avg: macro_average(&m.per_class)? })
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;
    let ours = entries.last().expect("non-empty").macro_avg;

    let mut improvements = Vec::new();
    for metric in Metric::ALL {
        let Some(reference_value) = ours.get(metric).mean else { continue };
        for base in &entries[..entries.len() - 1] {
            let Some(baseline_value) = base.macro_avg.get(metric).mean else { continue };
            let Ok(percent) = relative_improvement(reference_value, baseline_value) else { continue };
            let claimed_percent = claims.and_then(|c| c.get(&metric)).and_then(|c| c.get(&base.name)).copied();
            let gap_pp = claimed_percent.map(|c| percent - c);
            let status = gap_pp.map(|gap| {
                let tol = metric.tolerance_pp();
                match (gap.abs() <= tol, metric) {
                    (true, Metric::Sensitivity) => format!("matches within {tol} pp"),
                    (true, _) => format!("consistent within table rounding (±{tol} pp)"),
                    (false, _) => format!("outside ±{tol} pp"),
                }
            });
            improvements.push(Improvement {
                metric,
                baseline: base.name.clone(),
                reference_value,
                baseline_value,
                percent,
                claimed_percent,
                gap_pp,
                status,
            });
        }
    }

    Ok(Report {
        format_version: REPORT_FORMAT_VERSION,
        class_names: class_names.to_vec(),
        reference_model: reference.name.clone(),
        models: entries,
        improvements,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "undef".to_string(), |v| format!("{v:.4}"))
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, MetricsError> {
        let report: Report = serde_json::from_str(text).map_err(|e| MetricsError::Format(e.to_string()))?;
        if report.format_version != REPORT_FORMAT_VERSION {
            return Err(MetricsError::Format(format!(
                "format version {} unsupported (expected {REPORT_FORMAT_VERSION})",
                report.format_version
            )));
        }
        Ok(report)
    }

    pub fn improvement(&self, metric: Metric, baseline: &str) -> Option<&Improvement> {
        self.improvements.iter().find(|i| i.metric == metric && i.baseline == baseline)
    }

    /// Plain-text table: one row per metric and class, one column per model.
    pub fn to_text(&self) -> String {
        let metrics: Vec<Metric> = Metric::ALL
            .into_iter()
            .filter(|&m| self.models.iter().any(|e| e.per_class.iter().any(|c| c.get(m).is_some())))
            .collect();
        let mut out = String::new();
        let header = |out: &mut String, first: &str| {
            let _ = write!(out, "{:<13}{:<18}", first, "Class");
            for m in &self.models {
                let _ = write!(out, "{:>10}", m.name);
            }
            out.push('\n');
        };

        header(&mut out, "Metric");
        for &metric in &metrics {
            for (k, class) in self.class_names.iter().enumerate() {
                let first = if k == 0 { metric.label() } else { "" };
                let _ = write!(out, "{first:<13}{class:<18}");
                for m in &self.models {
                    let _ = write!(out, "{:>10}", cell(m.per_class.get(k).and_then(|c| c.get(metric))));
                }
                out.push('\n');
            }
        }
        out.push('\n');
        header(&mut out, "Macro");
        for &metric in &metrics {
            let _ = write!(out, "{:<13}{:<18}", metric.label(), "(mean)");
            for m in &self.models {
                let _ = write!(out, "{:>10}", cell(m.macro_avg.get(metric).mean));
            }
            out.push('\n');
        }

        if !self.improvements.is_empty() {
            let _ = writeln!(out, "\nImprovement of {} over baselines", self.reference_model);
            let _ = writeln!(
                out,
                "{:<13}{:<10}{:>10}{:>10}{:>10}{:>10}{:>9}  Status",
                "Metric", "Baseline", "Ours", "Base", "Delta%", "Claimed%", "Gap pp"
            );
            for imp in &self.improvements {
                let claimed = imp.claimed_percent.map_or_else(|| "-".to_string(), |c| format!("{c:.2}"));
                let gap = imp.gap_pp.map_or_else(|| "-".to_string(), |g| format!("{g:+.2}"));
                let _ = writeln!(
                    out,
                    "{:<13}{:<10}{:>10.4}{:>10.4}{:>10.2}{:>10}{:>9}  {}",
                    imp.metric.label(),
                    imp.baseline,
                    imp.reference_value,
                    imp.baseline_value,
                    imp.percent,
                    claimed,
                    gap,
                    imp.status.as_deref().unwrap_or("-")
                );
            }
        }
        out
    }
}
