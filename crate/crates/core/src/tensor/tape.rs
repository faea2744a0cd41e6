use serde::{Deserialize, Serialize};

use super::ops::{
    conv2d_backward, fully_connected_backward, loss_grad_logits, maxpool2_backward, relu_backward,
    softmax_backward, ArgIndices, ConvGeometry, LossForm,
};
use super::{Result, Scalar, Tensor, TensorError};

/// Weight and bias of one parameterized layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> LayerWeights<T> {
    pub fn zeros_like(&self) -> Self {
        Self {
            weight: Tensor::zeros(self.weight.shape()).expect("valid shape"),
            bias: Tensor::zeros(self.bias.shape()).expect("valid shape"),
        }
    }
}

/// Cached forward intermediates of one layer. `slot` indexes the weight list.
#[derive(Debug, Clone)]
pub enum TapeEntry<T> {
    Conv { input: Tensor<T>, geom: ConvGeometry, slot: usize },
    Relu { input: Tensor<T> },
    MaxPool { args: ArgIndices },
    Flatten { input_shape: Vec<usize> },
    Dense { input: Tensor<T>, slot: usize },
    Softmax { output: Tensor<T> },
}

#[derive(Debug, Clone)]
pub struct Tape<T> {
    entries: Vec<TapeEntry<T>>,
    weight_shapes: Vec<(Vec<usize>, Vec<usize>)>,
}

impl<T: Scalar> Tape<T> {
    /// Starts a tape against the weights the forward pass is about to use.
    pub fn new(weights: &[LayerWeights<T>]) -> Self {
        Self {
            entries: Vec::new(),
            weight_shapes: weights
                .iter()
                .map(|w| (w.weight.shape().to_vec(), w.bias.shape().to_vec()))
                .collect(),
        }
    }

    pub fn push(&mut self, entry: TapeEntry<T>) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[TapeEntry<T>] {
        &self.entries
    }

    fn check_fresh(&self, weights: &[LayerWeights<T>]) -> Result<()> {
        if weights.len() != self.weight_shapes.len() {
            return Err(TensorError::StaleTape(format!(
                "tape recorded {} weight slots, got {}",
                self.weight_shapes.len(),
                weights.len()
            )));
        }
        for (slot, (w, (ws, bs))) in weights.iter().zip(&self.weight_shapes).enumerate() {
            if w.weight.shape() != ws.as_slice() || w.bias.shape() != bs.as_slice() {
                return Err(TensorError::StaleTape(format!(
                    "slot {slot} changed shape since forward: {:?}/{:?} -> {:?}/{:?}",
                    ws,
                    bs,
                    w.weight.shape(),
                    w.bias.shape()
                )));
            }
        }
        Ok(())
    }
}

/// Parameter gradients (slot-aligned with the weights) plus the input gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<LayerWeights<T>>,
    pub input: Tensor<T>,
}

/// Reverse-mode pass given the gradient of the loss with respect to the tape's final output.
pub fn backward<T: Scalar>(
    tape: &Tape<T>,
    weights: &[LayerWeights<T>],
    upstream: &Tensor<T>,
) -> Result<Gradients<T>> {
    tape.check_fresh(weights)?;
    run_backward(tape.entries(), weights, upstream.clone())
}

/// Reverse-mode pass from the cross-entropy loss of a tape that ends in softmax.
///
/// The softmax and loss derivatives are fused (see [`loss_grad_logits`]).
pub fn backward_from_loss<T: Scalar>(
    tape: &Tape<T>,
    weights: &[LayerWeights<T>],
    labels: &Tensor<T>,
    form: LossForm,
) -> Result<Gradients<T>> {
    tape.check_fresh(weights)?;
    let Some((TapeEntry::Softmax { output }, rest)) = tape.entries().split_last() else {
        return Err(TensorError::StaleTape("tape does not end in softmax".into()));
    };
    let grad = loss_grad_logits(labels, output, form)?;
    run_backward(rest, weights, grad)
}

fn run_backward<T: Scalar>(
    entries: &[TapeEntry<T>],
    weights: &[LayerWeights<T>],
    mut grad: Tensor<T>,
) -> Result<Gradients<T>> {
    let mut grads: Vec<LayerWeights<T>> = weights.iter().map(LayerWeights::zeros_like).collect();
    for entry in entries.iter().rev() {
        grad = match entry {
            TapeEntry::Conv { input, geom, slot } => {
                let w = slot_weights(weights, *slot)?;
                let (dx, dw, db) = conv2d_backward(input, &w.weight, geom, &grad)?;
                grads[*slot] = LayerWeights { weight: dw, bias: db };
                dx
            }
            TapeEntry::Relu { input } => relu_backward(input, &grad)?,
            TapeEntry::MaxPool { args } => maxpool2_backward(args, &grad)?,
            TapeEntry::Flatten { input_shape } => grad.reshape(input_shape).map_err(|e| {
                TensorError::StaleTape(format!("flatten gradient no longer fits: {e}"))
            })?,
            TapeEntry::Dense { input, slot } => {
                let w = slot_weights(weights, *slot)?;
                let (dx, dw, db) = fully_connected_backward(input, &w.weight, &grad)?;
                grads[*slot] = LayerWeights { weight: dw, bias: db };
                dx
            }
            TapeEntry::Softmax { output } => softmax_backward(output, &grad)?,
        };
    }
    Ok(Gradients { weights: grads, input: grad })
}

fn slot_weights<T>(weights: &[LayerWeights<T>], slot: usize) -> Result<&LayerWeights<T>> {
    weights
        .get(slot)
        .ok_or_else(|| TensorError::StaleTape(format!("weight slot {slot} missing")))
}
