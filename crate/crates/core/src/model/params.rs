use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ModelError, NetworkSpec, Result};
use crate::tensor::{LayerWeights, Scalar, Tensor};

/// Variance of the normal distribution every weight and bias is drawn from.
pub const INIT_VARIANCE: f64 = 0.05;

/// Learnable tensors of a network, one slot per Conv or FC layer in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<T> {
    layer_indices: Vec<usize>,
    slots: Vec<LayerWeights<T>>,
}

impl<T: Scalar> Parameters<T> {
    /// Pairs slots with their layer indices, checking shapes against `spec`.
    pub fn from_slots(spec: &NetworkSpec, slots: Vec<LayerWeights<T>>) -> Result<Self> {
        let expected = spec.parameter_shapes()?;
        if expected.len() != slots.len() {
            return Err(ModelError::ShapeInconsistent(format!(
                "spec has {} parameterized layers, got {} slots",
                expected.len(),
                slots.len()
            )));
        }
        for (slot, ((layer, ws, bs), w)) in expected.iter().zip(&slots).enumerate() {
            if w.weight.shape() != ws.as_slice() || w.bias.shape() != bs.as_slice() {
                return Err(ModelError::ShapeInconsistent(format!(
                    "slot {slot} (layer {layer}) expects {ws:?}/{bs:?}, got {:?}/{:?}",
                    w.weight.shape(),
                    w.bias.shape()
                )));
            }
        }
        Ok(Self { layer_indices: expected.into_iter().map(|(l, _, _)| l).collect(), slots })
    }

    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        let slots = spec
            .parameter_shapes()?
            .iter()
            .map(|(_, w, b)| LayerWeights { weight: Tensor::zeros(w).unwrap(), bias: Tensor::zeros(b).unwrap() })
            .collect();
        Self::from_slots(spec, slots)
    }

    pub fn slots(&self) -> &[LayerWeights<T>] {
        &self.slots
    }

    pub fn slots_mut(&mut self) -> &mut [LayerWeights<T>] {
        &mut self.slots
    }

    pub fn layer_indices(&self) -> &[usize] {
        &self.layer_indices
    }

    /// Weights of the layer at `layer` in the spec, if it is parameterized.
    pub fn for_layer(&self, layer: usize) -> Option<&LayerWeights<T>> {
        self.layer_indices.iter().position(|&l| l == layer).map(|s| &self.slots[s])
    }

    pub fn is_finite(&self) -> bool {
        self.slots.iter().all(|s| s.weight.is_finite() && s.bias.is_finite())
    }

    pub fn len(&self) -> usize {
        self.slots.iter().map(|s| s.weight.len() + s.bias.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cast<U: Scalar>(&self) -> Parameters<U> {
        Parameters {
            layer_indices: self.layer_indices.clone(),
            slots: self
                .slots
                .iter()
                .map(|s| LayerWeights { weight: s.weight.cast(), bias: s.bias.cast() })
                .collect(),
        }
    }
}

/// Draws every weight and bias i.i.d. from `Normal(0, 0.05)` with a ChaCha8 stream seeded by `seed`.
pub fn init_parameters<T: Scalar>(spec: &NetworkSpec, seed: u64) -> Result<Parameters<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_VARIANCE.sqrt()).expect("positive std");
    let mut draw = |shape: &[usize]| {
        Tensor::from_fn(shape, |_| T::lit(normal.sample(&mut rng))).expect("spec shapes are valid")
    };
    let slots = spec
        .parameter_shapes()?
        .iter()
        .map(|(_, w, b)| {
            let weight = draw(w);
            let bias = draw(b);
            LayerWeights { weight, bias }
        })
        .collect();
    Parameters::from_slots(spec, slots)
}
