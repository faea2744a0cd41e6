//! Whole-network gradient verification: random small networks in double
//! precision, analytic reverse mode against central finite differences.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{forward, init_parameters, LayerSpec, ModelError, NetworkSpec, Parameters};
use crate::tensor::{backward_from_loss, cross_entropy, finite_diff_grad, relative_error, LossForm, Tensor};
use crate::training::one_hot;

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
pub const MAX_PARAMETER_LAYERS: usize = 3;
pub const MAX_PARAMETERS: usize = 500;
const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheck {
    pub spec: NetworkSpec,
    pub loss_form: LossForm,
    pub parameters: usize,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub checks: Vec<NetworkCheck>,
}

impl GradcheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.checks.iter().map(|c| c.relative_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&NetworkCheck> {
        self.checks.iter().max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
    }

    pub fn passed(&self, tolerance: f64) -> bool {
        self.checks.iter().all(|c| c.relative_error <= tolerance)
    }
}

/// Draws a valid network with at most [`MAX_PARAMETER_LAYERS`] parameterized
/// layers and [`MAX_PARAMETERS`] scalars, ending in FC + softmax.
pub fn random_network(rng: &mut impl Rng) -> NetworkSpec {
    loop {
        let input = [rng.gen_range(3..=7), rng.gen_range(3..=7), rng.gen_range(1..=3)];
        let mut layers = Vec::new();
        let convs = rng.gen_range(0..=2);
        for _ in 0..convs {
            layers.push(LayerSpec::Conv {
                out_channels: rng.gen_range(1..=3),
                kernel: rng.gen_range(1..=3),
                stride: rng.gen_range(1..=2),
                padding: rng.gen_range(0..=1),
            });
            if rng.gen_bool(0.7) {
                layers.push(LayerSpec::Relu);
            }
            if rng.gen_bool(0.4) {
                layers.push(LayerSpec::MaxPool2);
            }
        }
        layers.push(LayerSpec::Flatten);
        if convs < 2 && rng.gen_bool(0.5) {
            layers.push(LayerSpec::FullyConnected { out_features: rng.gen_range(2..=5) });
            layers.push(LayerSpec::Relu);
        }
        let classes = rng.gen_range(2..=4);
        layers.push(LayerSpec::FullyConnected { out_features: classes });
        layers.push(LayerSpec::Softmax);
        if let Ok(spec) = NetworkSpec::new(input, layers, classes) {
            if spec.parameter_count().is_ok_and(|n| n <= MAX_PARAMETERS) {
                return spec;
            }
        }
    }
}

/// Norm-relative error between the analytic and numeric gradient of the loss
/// with respect to every parameter and the input.
pub fn check_network(
    spec: &NetworkSpec,
    params: &Parameters<f64>,
    input: &Tensor<f64>,
    label: usize,
    form: LossForm,
) -> Result<f64, ModelError> {
    let target = one_hot::<f64>(label, spec.num_classes);
    let (_, tape) = forward(spec, params, input)?;
    let grads = backward_from_loss(&tape, params.slots(), &target, form)?;

    let loss_at = |p: &Parameters<f64>, x: &Tensor<f64>| -> f64 {
        let (probs, _) = forward(spec, p, x).expect("shapes fixed by spec");
        cross_entropy(&target, &probs, form).expect("softmax output")
    };
    let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
    for (slot, g) in grads.weights.iter().enumerate() {
        for bias in [false, true] {
            let current = if bias { &params.slots()[slot].bias } else { &params.slots()[slot].weight };
            let fd = finite_diff_grad(
                |t: &Tensor<f64>| {
                    let mut p = params.clone();
                    let s = &mut p.slots_mut()[slot];
                    *(if bias { &mut s.bias } else { &mut s.weight }) = t.clone();
                    loss_at(&p, input)
                },
                current,
                FD_STEP,
            );
            analytic.extend_from_slice(if bias { g.bias.data() } else { g.weight.data() });
            numeric.extend_from_slice(fd.data());
        }
    }
    analytic.extend_from_slice(grads.input.data());
    numeric.extend_from_slice(finite_diff_grad(|x: &Tensor<f64>| loss_at(params, x), input, FD_STEP).data());
    Ok(relative_error(&analytic, &numeric))
}

/// Checks `networks` random networks drawn from `seed`.
pub fn run_gradcheck_suite(seed: u64, networks: usize) -> Result<GradcheckReport, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::with_capacity(networks);
    for _ in 0..networks {
        let spec = random_network(&mut rng);
        let params = init_parameters::<f64>(&spec, rng.gen())?;
        let input = Tensor::from_fn(&spec.input_shape, |_| rng.gen_range(-1.0..1.0))?;
        let label = rng.gen_range(0..spec.num_classes);
        let form = if rng.gen_bool(0.5) { LossForm::BinarySum } else { LossForm::Categorical };
        let relative_error = check_network(&spec, &params, &input, label, form)?;
        checks.push(NetworkCheck { parameters: spec.parameter_count()?, spec, loss_form: form, relative_error });
    }
    Ok(GradcheckReport { seed, checks })
}
