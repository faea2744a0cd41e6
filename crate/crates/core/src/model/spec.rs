use serde::{Deserialize, Serialize};

use super::{ModelError, Result};
use crate::tensor::ConvGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv { out_channels: usize, kernel: usize, stride: usize, padding: usize },
    Relu,
    MaxPool2,
    Flatten,
    FullyConnected { out_features: usize },
    Softmax,
}

pub type ParamShape = (usize, Vec<usize>, Vec<usize>);

impl LayerSpec {
    pub fn conv3x3(out_channels: usize) -> Self {
        LayerSpec::Conv { out_channels, kernel: 3, stride: 1, padding: 1 }
    }

    pub fn has_parameters(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::FullyConnected { .. })
    }

    pub fn geometry(&self) -> Option<ConvGeometry> {
        match *self {
            LayerSpec::Conv { kernel, stride, padding, .. } => {
                Some(ConvGeometry::square(kernel, stride, padding))
            }
            _ => None,
        }
    }
}

/// An ordered layer list over a fixed `H×W×C` input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
    pub num_classes: usize,
}

/// Smallest input extent that survives five stride-2 pools.
pub const MIN_INPUT_EXTENT: usize = 32;

fn check_input(input_shape: [usize; 3]) -> Result<()> {
    let [h, w, c] = input_shape;
    if h < MIN_INPUT_EXTENT || w < MIN_INPUT_EXTENT || c == 0 {
        return Err(ModelError::InputTooSmall { h, w, min: MIN_INPUT_EXTENT });
    }
    Ok(())
}

/// The thirteen-convolution VGG16-style layout: blocks of 2, 2, 3, 3, 3 convolutions
/// at widths 64, 128, 256, 512, 512, each block closed by a 2×2 max pool, then
/// FC(4096) and FC(`num_classes`) with softmax.
pub fn edlm_default_spec(input_shape: [usize; 3], num_classes: usize) -> Result<NetworkSpec> {
    check_input(input_shape)?;
    let mut layers = Vec::new();
    for (width, convs) in [(64, 2), (128, 2), (256, 3), (512, 3), (512, 3)] {
        for _ in 0..convs {
            layers.push(LayerSpec::conv3x3(width));
            layers.push(LayerSpec::Relu);
        }
        layers.push(LayerSpec::MaxPool2);
    }
    layers.extend([
        LayerSpec::Flatten,
        LayerSpec::FullyConnected { out_features: 4096 },
        LayerSpec::Relu,
        LayerSpec::FullyConnected { out_features: num_classes },
        LayerSpec::Softmax,
    ]);
    NetworkSpec::new(input_shape, layers, num_classes)
}

/// Five blocks of a single 32-filter 3×3 convolution, ReLU and 2×2 max pool,
/// then one FC layer to `num_classes` with softmax.
pub fn edlm_compact_spec(input_shape: [usize; 3], num_classes: usize) -> Result<NetworkSpec> {
    check_input(input_shape)?;
    let mut layers = Vec::new();
    for _ in 0..5 {
        layers.extend([LayerSpec::conv3x3(32), LayerSpec::Relu, LayerSpec::MaxPool2]);
    }
    layers.extend([
        LayerSpec::Flatten,
        LayerSpec::FullyConnected { out_features: num_classes },
        LayerSpec::Softmax,
    ]);
    NetworkSpec::new(input_shape, layers, num_classes)
}

impl NetworkSpec {
    /// Builds and validates a spec.
    pub fn new(input_shape: [usize; 3], layers: Vec<LayerSpec>, num_classes: usize) -> Result<Self> {
        let spec = Self { input_shape, layers, num_classes };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(ModelError::InvalidSpec("num_classes must be >= 1".into()));
        }
        if let Some(pos) = self.layers.iter().position(|l| *l == LayerSpec::Softmax) {
            if pos + 1 != self.layers.len() {
                return Err(ModelError::InvalidSpec(format!(
                    "softmax at layer {pos} is not the final layer"
                )));
            }
        }
        let shapes = self.infer_shapes()?;
        let out: usize = shapes.last().map_or(self.input_shape.iter().product(), |s| s.iter().product());
        if out != self.num_classes {
            return Err(ModelError::InvalidSpec(format!(
                "network emits {out} values but num_classes is {}",
                self.num_classes
            )));
        }
        Ok(())
    }

    /// Output shape of every layer, in order.
    pub fn infer_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut shape = self.input_shape.to_vec();
        if shape.contains(&0) {
            return Err(ModelError::InvalidSpec(format!("input shape {shape:?} has a zero extent")));
        }
        let mut out = Vec::with_capacity(self.layers.len());
        for (index, layer) in self.layers.iter().enumerate() {
            let underflow = |detail: String| ModelError::ExtentUnderflow { layer: index, detail };
            shape = match (*layer, shape.as_slice()) {
                (LayerSpec::Conv { out_channels, .. }, &[h, w, _]) => {
                    if out_channels == 0 {
                        return Err(ModelError::InvalidSpec(format!("layer {index}: zero out_channels")));
                    }
                    let geom = layer.geometry().expect("conv has geometry");
                    let (oh, ow) = geom.output_hw(h, w).map_err(|e| underflow(e.to_string()))?;
                    vec![oh, ow, out_channels]
                }
                (LayerSpec::MaxPool2, &[h, w, c]) => {
                    if h < 2 || w < 2 {
                        return Err(underflow(format!("cannot pool a {h}×{w} map")));
                    }
                    vec![h / 2, w / 2, c]
                }
                (LayerSpec::Conv { .. } | LayerSpec::MaxPool2, s) => {
                    return Err(underflow(format!("spatial layer needs H×W×C input, got {s:?}")));
                }
                (LayerSpec::Relu | LayerSpec::Softmax, _) => shape,
                (LayerSpec::Flatten, s) => vec![s.iter().product()],
                (LayerSpec::FullyConnected { out_features }, _) => {
                    if out_features == 0 {
                        return Err(ModelError::InvalidSpec(format!("layer {index}: zero out_features")));
                    }
                    vec![out_features]
                }
            };
            out.push(shape.clone());
        }
        Ok(out)
    }

    /// `(layer index, weight shape, bias shape)` for every parameterized layer.
    pub fn parameter_shapes(&self) -> Result<Vec<ParamShape>> {
        let shapes = self.infer_shapes()?;
        let mut prev = self.input_shape.to_vec();
        let mut slots = Vec::new();
        for (index, (layer, out)) in self.layers.iter().zip(&shapes).enumerate() {
            match *layer {
                LayerSpec::Conv { out_channels, kernel, .. } => {
                    slots.push((index, vec![kernel, kernel, prev[2], out_channels], vec![out_channels]));
                }
                LayerSpec::FullyConnected { out_features } => {
                    let fan_in = prev.iter().product();
                    slots.push((index, vec![fan_in, out_features], vec![out_features]));
                }
                _ => {}
            }
            prev = out.clone();
        }
        Ok(slots)
    }

    pub fn parameter_count(&self) -> Result<usize> {
        Ok(self
            .parameter_shapes()?
            .iter()
            .map(|(_, w, b)| w.iter().product::<usize>() + b.iter().product::<usize>())
            .sum())
    }
}
