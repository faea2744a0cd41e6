use serde::{Deserialize, Serialize};

use super::{predict_labels, train, Result, TrainConfig, TrainError};
use crate::dataset::stratified_split_indices;
use crate::metrics::{all_class_metrics, macro_average, ConfusionMatrix};
use crate::model::NetworkSpec;
use crate::tensor::{Scalar, Tensor};

/// Validation outcome of one candidate config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub index: usize,
    pub config: TrainConfig,
    /// `None` when training diverged or macro-F is undefined.
    pub macro_f: Option<f64>,
    pub accuracy: Option<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub best_index: usize,
    pub best: TrainConfig,
    pub rows: Vec<GridRow>,
}

/// Splits once (stratified, `split_seed`), trains every config on the training
/// side and keeps the one with the highest validation macro F-measure.
/// Diverged or undefined candidates rank last; ties go to the lower index.
pub fn grid_search<T: Scalar>(
    configs: &[TrainConfig],
    spec: &NetworkSpec,
    inputs: &[Tensor<T>],
    labels: &[usize],
    split_fraction: f64,
    split_seed: u64,
) -> Result<GridOutcome> {
    if configs.is_empty() {
        return Err(TrainError::NoConfigs);
    }
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(TrainError::InvalidConfig(format!("split fraction {split_fraction} is outside (0, 1)")));
    }
    if inputs.len() != labels.len() {
        return Err(TrainError::LengthMismatch { inputs: inputs.len(), labels: labels.len() });
    }
    let (train_idx, val_idx) = stratified_split_indices(labels, split_fraction, split_seed);
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(TrainError::InvalidConfig("split leaves an empty training or validation side".into()));
    }
    let pick = |idx: &[usize]| -> (Vec<Tensor<T>>, Vec<usize>) {
        (idx.iter().map(|&i| inputs[i].clone()).collect(), idx.iter().map(|&i| labels[i]).collect())
    };
    let (train_x, train_y) = pick(&train_idx);
    let (val_x, val_y) = pick(&val_idx);

    let mut rows = Vec::with_capacity(configs.len());
    for (index, config) in configs.iter().enumerate() {
        let row = match train(spec, &train_x, &train_y, config) {
            Ok((params, _)) if params.is_finite() => {
                let pred = predict_labels(spec, &params, &val_x)?;
                let cm = ConfusionMatrix::from_labels(&pred, &val_y, spec.num_classes)
                    .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
                let macro_f = macro_average(&all_class_metrics(&cm)).ok().and_then(|m| m.f_measure.mean);
                GridRow { index, config: *config, macro_f, accuracy: cm.accuracy(), diverged: false }
            }
            Ok(_) | Err(TrainError::NonFiniteLoss { .. }) => {
                GridRow { index, config: *config, macro_f: None, accuracy: None, diverged: true }
            }
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    let mut best_index = 0;
    for row in &rows[1..] {
        let better = match (row.macro_f, rows[best_index].macro_f) {
            (Some(a), Some(b)) => a > b,
            (Some(_), None) => true,
            _ => false,
        };
        if better {
            best_index = row.index;
        }
    }
    Ok(GridOutcome { best_index, best: configs[best_index], rows })
}
