//! SGD training with L2 weight decay, per-epoch shuffling or loss-weighted
//! informative sampling, and grid search over configurations.

mod grid;
mod sampling;

pub use grid::{grid_search, GridOutcome, GridRow};
pub use sampling::{balanced_order, shuffle_epoch, update_sample_weights, SampleWeights};

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{forward, init_parameters, predict, ModelError, NetworkSpec, Parameters};
use crate::tensor::{backward_from_loss, cross_entropy, LayerWeights, LossForm, Scalar, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{inputs} inputs but {labels} labels")]
    LengthMismatch { inputs: usize, labels: usize },
    #[error("label {label} at sample {index} is outside 0..{classes}")]
    LabelOutOfRange { index: usize, label: usize, classes: usize },
    #[error("loss {value} at sample {index} is negative or non-finite")]
    InvalidLoss { index: usize, value: f64 },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("non-finite gradient in parameter slot {slot}")]
    NonFiniteGradient { slot: usize },
    #[error("gradient shapes do not match parameters: {0}")]
    ShapeMismatch(String),
    #[error("grid search needs at least one config")]
    NoConfigs,
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        TrainError::Model(ModelError::Tensor(e))
    }
}

pub type Result<T> = std::result::Result<T, TrainError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    #[default]
    Uniform,
    /// Epochs after the first draw samples with probability proportional to their last loss.
    Informative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub sampling: SamplingMode,
    pub loss_form: LossForm,
    /// Class-interleaved epoch order instead of a plain shuffle (uniform sampling only).
    pub balanced_batches: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            weight_decay: 5e-5,
            batch_size: 1,
            epochs: 20,
            seed: 0,
            sampling: SamplingMode::Uniform,
            loss_form: LossForm::BinarySum,
            balanced_batches: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::InvalidConfig(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(TrainError::InvalidConfig(format!("weight_decay must be >= 0, got {}", self.weight_decay)));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub seconds: f64,
}

/// Per-epoch mean loss, running training accuracy and wall-clock time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    /// One JSON object per line.
    pub fn to_lines(&self) -> String {
        self.epochs.iter().map(|e| serde_json::to_string(e).expect("plain record") + "\n").collect()
    }

    pub fn from_lines(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let epochs = text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect::<std::result::Result<_, _>>()?;
        Ok(Self { epochs })
    }
}

/// `w ← w − lr·(g + wd·w)` on weights; biases get `b ← b − lr·g`.
pub fn sgd_step<T: Scalar>(params: &mut Parameters<T>, grads: &[LayerWeights<T>], lr: f64, weight_decay: f64) -> Result<()> {
    if grads.len() != params.slots().len() {
        return Err(TrainError::ShapeMismatch(format!("{} gradient slots for {} parameter slots", grads.len(), params.slots().len())));
    }
    for (slot, (p, g)) in params.slots().iter().zip(grads).enumerate() {
        if p.weight.shape() != g.weight.shape() || p.bias.shape() != g.bias.shape() {
            return Err(TrainError::ShapeMismatch(format!("slot {slot}")));
        }
        if !(g.weight.is_finite() && g.bias.is_finite()) {
            return Err(TrainError::NonFiniteGradient { slot });
        }
    }
    let (lr, wd) = (T::lit(lr), T::lit(weight_decay));
    for (p, g) in params.slots_mut().iter_mut().zip(grads) {
        for (w, &d) in p.weight.data_mut().iter_mut().zip(g.weight.data()) {
            *w = *w - lr * (d + wd * *w);
        }
        for (b, &d) in p.bias.data_mut().iter_mut().zip(g.bias.data()) {
            *b = *b - lr * d;
        }
    }
    Ok(())
}

pub fn one_hot<T: Scalar>(label: usize, classes: usize) -> Tensor<T> {
    Tensor::from_fn(&[classes], |i| if i == label { T::one() } else { T::zero() }).expect("classes >= 1")
}

fn argmax<T: Scalar>(t: &Tensor<T>) -> usize {
    let mut best = 0;
    for (i, &v) in t.data().iter().enumerate() {
        if v > t.data()[best] {
            best = i;
        }
    }
    best
}

fn is_non_finite(e: &ModelError) -> bool {
    matches!(
        e,
        ModelError::Tensor(TensorError::NonFinite(_)) | ModelError::Layer { source: TensorError::NonFinite(_), .. }
    )
}

fn check_dataset<T>(spec: &NetworkSpec, inputs: &[Tensor<T>], labels: &[usize]) -> Result<()> {
    if inputs.len() != labels.len() {
        return Err(TrainError::LengthMismatch { inputs: inputs.len(), labels: labels.len() });
    }
    if inputs.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= spec.num_classes) {
        return Err(TrainError::LabelOutOfRange { index, label, classes: spec.num_classes });
    }
    Ok(())
}

/// Predicted class index per input (ties go to the lower class).
pub fn predict_labels<T: Scalar>(spec: &NetworkSpec, params: &Parameters<T>, inputs: &[Tensor<T>]) -> Result<Vec<usize>> {
    inputs.iter().map(|x| Ok(argmax(&predict(spec, params, x)?))).collect()
}

/// Fraction of inputs whose predicted class matches the label.
pub fn accuracy<T: Scalar>(spec: &NetworkSpec, params: &Parameters<T>, inputs: &[Tensor<T>], labels: &[usize]) -> Result<f64> {
    check_dataset(spec, inputs, labels)?;
    let pred = predict_labels(spec, params, inputs)?;
    Ok(pred.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / labels.len() as f64)
}

pub fn train<T: Scalar>(
    spec: &NetworkSpec,
    inputs: &[Tensor<T>],
    labels: &[usize],
    config: &TrainConfig,
) -> Result<(Parameters<T>, TrainHistory)> {
    train_with_observer(spec, inputs, labels, config, |_| {})
}

/// [`train`] that reports every finished epoch to `on_epoch`.
pub fn train_with_observer<T: Scalar>(
    spec: &NetworkSpec,
    inputs: &[Tensor<T>],
    labels: &[usize],
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Parameters<T>, TrainHistory)> {
    config.validate()?;
    check_dataset(spec, inputs, labels)?;
    let params = init_parameters::<T>(spec, config.seed)?;
    train_from(spec, params, inputs, labels, config, on_epoch)
}

/// Continues training from `params` (for example a loaded checkpoint) instead of a fresh draw.
pub fn train_from<T: Scalar>(
    spec: &NetworkSpec,
    mut params: Parameters<T>,
    inputs: &[Tensor<T>],
    labels: &[usize],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Parameters<T>, TrainHistory)> {
    config.validate()?;
    check_dataset(spec, inputs, labels)?;
    // sampling draws from a stream separate from initialization
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5a3b_1e00_0001);
    let targets: Vec<Tensor<T>> = labels.iter().map(|&l| one_hot(l, spec.num_classes)).collect();
    let n = inputs.len();
    let mut last_loss = vec![0.0f64; n];
    let mut history = TrainHistory::default();

    for epoch in 0..config.epochs {
        let started = Instant::now();
        let order = match config.sampling {
            SamplingMode::Informative if epoch > 0 => update_sample_weights(&last_loss)?.draw(n, &mut rng),
            _ if config.balanced_batches => balanced_order(labels, &mut rng),
            _ => shuffle_epoch(n, &mut rng),
        };
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut acc: Option<Vec<LayerWeights<T>>> = None;
            for &i in chunk {
                let (probs, tape) = match forward(spec, &params, &inputs[i]) {
                    Err(e) if is_non_finite(&e) => return Err(TrainError::NonFiniteLoss { epoch, batch }),
                    other => other?,
                };
                let loss = cross_entropy(&targets[i], &probs, config.loss_form)
                    .map(Scalar::as_f64)
                    .unwrap_or(f64::NAN);
                if !loss.is_finite() {
                    return Err(TrainError::NonFiniteLoss { epoch, batch });
                }
                last_loss[i] = loss;
                loss_sum += loss;
                correct += usize::from(argmax(&probs) == labels[i]);
                let g = backward_from_loss(&tape, params.slots(), &targets[i], config.loss_form)?.weights;
                acc = Some(match acc {
                    None => g,
                    Some(mut a) => {
                        for (a, g) in a.iter_mut().zip(&g) {
                            a.weight.data_mut().iter_mut().zip(g.weight.data()).for_each(|(x, &y)| *x = *x + y);
                            a.bias.data_mut().iter_mut().zip(g.bias.data()).for_each(|(x, &y)| *x = *x + y);
                        }
                        a
                    }
                });
            }
            let mut grads = acc.expect("chunks are non-empty");
            if chunk.len() > 1 {
                let scale = T::lit(1.0 / chunk.len() as f64);
                for g in &mut grads {
                    g.weight.data_mut().iter_mut().for_each(|x| *x = *x * scale);
                    g.bias.data_mut().iter_mut().for_each(|x| *x = *x * scale);
                }
            }
            match sgd_step(&mut params, &grads, config.learning_rate, config.weight_decay) {
                Err(TrainError::NonFiniteGradient { .. }) => return Err(TrainError::NonFiniteLoss { epoch, batch }),
                other => other?,
            }
        }
        let record = EpochRecord {
            epoch,
            loss: loss_sum / n as f64,
            accuracy: correct as f64 / n as f64,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        history.epochs.push(record);
    }
    Ok((params, history))
}
