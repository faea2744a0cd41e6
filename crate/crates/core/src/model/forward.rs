use super::{LayerSpec, ModelError, NetworkSpec, Parameters, Result};
use crate::tensor::{self, Scalar, Tape, TapeEntry, Tensor};

/// Runs the network and records a tape for [`crate::tensor::backward`].
pub fn forward<T: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<T>,
    input: &Tensor<T>,
) -> Result<(Tensor<T>, Tape<T>)> {
    let mut tape = Tape::new(params.slots());
    let out = execute(spec, params, input, Some(&mut tape))?;
    Ok((out, tape))
}

/// Runs the network without recording intermediates.
pub fn predict<T: Scalar>(spec: &NetworkSpec, params: &Parameters<T>, input: &Tensor<T>) -> Result<Tensor<T>> {
    execute(spec, params, input, None)
}

fn execute<T: Scalar>(
    spec: &NetworkSpec,
    params: &Parameters<T>,
    input: &Tensor<T>,
    mut tape: Option<&mut Tape<T>>,
) -> Result<Tensor<T>> {
    if input.shape() != spec.input_shape {
        return Err(ModelError::InputShape { expected: spec.input_shape.to_vec(), got: input.shape().to_vec() });
    }
    let mut record = |entry: TapeEntry<T>| {
        if let Some(t) = tape.as_deref_mut() {
            t.push(entry);
        }
    };
    let mut x = input.clone();
    let mut slot = 0;
    for (index, layer) in spec.layers.iter().enumerate() {
        let tagged = |e: crate::tensor::TensorError| ModelError::Layer { layer: index, source: e };
        x = match *layer {
            LayerSpec::Conv { .. } => {
                let w = params.slots().get(slot).ok_or(ModelError::MissingParameters(index))?;
                let geom = layer.geometry().expect("conv geometry");
                let y = tensor::conv2d(&x, &w.weight, &w.bias, &geom).map_err(tagged)?;
                record(TapeEntry::Conv { input: x, geom, slot });
                slot += 1;
                y
            }
            LayerSpec::FullyConnected { .. } => {
                let w = params.slots().get(slot).ok_or(ModelError::MissingParameters(index))?;
                let y = tensor::fully_connected(&x, &w.weight, &w.bias).map_err(tagged)?;
                record(TapeEntry::Dense { input: x, slot });
                slot += 1;
                y
            }
            LayerSpec::Relu => {
                let y = tensor::relu(&x);
                record(TapeEntry::Relu { input: x });
                y
            }
            LayerSpec::MaxPool2 => {
                let (y, args) = tensor::maxpool2(&x).map_err(tagged)?;
                record(TapeEntry::MaxPool { args });
                y
            }
            LayerSpec::Flatten => {
                let input_shape = x.shape().to_vec();
                let n = x.len();
                record(TapeEntry::Flatten { input_shape });
                x.reshape(&[n]).map_err(tagged)?
            }
            LayerSpec::Softmax => {
                let y = tensor::softmax(&x).map_err(tagged)?;
                record(TapeEntry::Softmax { output: y.clone() });
                y
            }
        };
    }
    Ok(x)
}
