use super::{Scalar, Tensor};

/// Central-difference gradient of `loss` at `params`:
/// `g[i] = (loss(p + eps·e_i) − loss(p − eps·e_i)) / (2·eps)`.
pub fn finite_diff_grad<T: Scalar>(
    mut loss: impl FnMut(&Tensor<T>) -> T,
    params: &Tensor<T>,
    eps: T,
) -> Tensor<T> {
    let mut probe = params.clone();
    let two = T::one() + T::one();
    let grad: Vec<T> = (0..params.len())
        .map(|i| {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + eps;
            let up = loss(&probe);
            probe.data_mut()[i] = orig - eps;
            let down = loss(&probe);
            probe.data_mut()[i] = orig;
            (up - down) / (two * eps)
        })
        .collect();
    Tensor::new(params.shape(), grad).expect("same shape as params")
}

/// `‖a − b‖₂ / max(‖a‖₂ + ‖b‖₂, 1e-10)` over two equally long slices.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "relative_error needs equal lengths");
    let norm = |it: &mut dyn Iterator<Item = f64>| it.map(|v| v * v).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()) + norm(&mut b.iter().copied());
    diff / scale.max(1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{cross_entropy, softmax, LossForm};
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_and_constant() {
        let g = finite_diff_grad(|p: &Tensor<f64>| p.data()[0] * p.data()[0], &Tensor::vector(&[3.0]), 1e-5);
        assert_relative_eq!(g.data()[0], 6.0, epsilon = 1e-8);
        let g = finite_diff_grad(|_: &Tensor<f64>| 4.2, &Tensor::vector(&[1.0, -2.0, 0.5]), 1e-5);
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn softmax_categorical_gradient_is_s_minus_l() {
        let logits = Tensor::vector(&[0.3, -1.2, 0.8]);
        let labels = Tensor::vector(&[0.0, 1.0, 0.0]);
        let loss = |z: &Tensor<f64>| {
            cross_entropy(&labels, &softmax(z).unwrap(), LossForm::Categorical).unwrap()
        };
        let numeric = finite_diff_grad(loss, &logits, 1e-5);
        let s = softmax(&logits).unwrap();
        for i in 0..3 {
            let analytic = s.data()[i] - labels.data()[i];
            assert!((numeric.data()[i] - analytic).abs() < 1e-6, "{i}: {numeric:?} vs {analytic}");
        }
    }

    #[test]
    fn binary_sum_logit_gradient_matches_numeric() {
        let logits = Tensor::vector(&[0.3, -1.2, 0.8]);
        let labels = Tensor::vector(&[1.0, 0.0, 0.0]);
        let loss = |z: &Tensor<f64>| {
            cross_entropy(&labels, &softmax(z).unwrap(), LossForm::BinarySum).unwrap()
        };
        let numeric = finite_diff_grad(loss, &logits, 1e-5);
        let analytic =
            crate::tensor::loss_grad_logits(&labels, &softmax(&logits).unwrap(), LossForm::BinarySum)
                .unwrap();
        assert!(relative_error(numeric.data(), analytic.data()) < 1e-8);
    }

    #[test]
    fn relative_error_basics() {
        assert_eq!(relative_error(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(relative_error(&[0.0], &[0.0]), 0.0);
        assert_relative_eq!(relative_error(&[1.0], &[-1.0]), 1.0);
    }
}
