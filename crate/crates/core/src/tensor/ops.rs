use serde::{Deserialize, Serialize};

use super::{Result, Scalar, Tensor, TensorError};

/// Clamp applied to every logarithm argument in [`cross_entropy`].
pub const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn square(kernel: usize, stride: usize, padding: usize) -> Self {
        Self { kernel_h: kernel, kernel_w: kernel, stride, padding }
    }

    /// `floor((input + 2·padding − kernel) / stride) + 1`, rejecting extents below one.
    pub fn output_extent(&self, input: usize, kernel: usize) -> Result<usize> {
        if self.stride == 0 {
            return Err(TensorError::InvalidGeometry("stride must be >= 1".into()));
        }
        if kernel == 0 {
            return Err(TensorError::InvalidGeometry("kernel extent must be >= 1".into()));
        }
        let padded = input + 2 * self.padding;
        if padded < kernel {
            return Err(TensorError::InvalidGeometry(format!(
                "kernel {kernel} larger than padded input {padded}"
            )));
        }
        Ok((padded - kernel) / self.stride + 1)
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        Ok((self.output_extent(h, self.kernel_h)?, self.output_extent(w, self.kernel_w)?))
    }
}

fn dims3<T: Scalar>(t: &Tensor<T>, op: &'static str) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [h, w, c] => Ok((h, w, c)),
        ref s => Err(TensorError::ShapeMismatch { op, detail: format!("expected H×W×C, got {s:?}") }),
    }
}

struct ConvDims {
    h: usize,
    w: usize,
    c: usize,
    k: usize,
    oh: usize,
    ow: usize,
}

fn conv_dims<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    geom: &ConvGeometry,
) -> Result<ConvDims> {
    let (h, w, c) = dims3(input, "conv2d")?;
    let [kh, kw, kc, k] = *kernels.shape() else {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d",
            detail: format!("kernels must be kh×kw×C×K, got {:?}", kernels.shape()),
        });
    };
    if kh != geom.kernel_h || kw != geom.kernel_w {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d",
            detail: format!(
                "kernel extent {kh}×{kw} differs from geometry {}×{}",
                geom.kernel_h, geom.kernel_w
            ),
        });
    }
    if kc != c {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d",
            detail: format!("kernel channels {kc} != input channels {c}"),
        });
    }
    let (oh, ow) = geom.output_hw(h, w)?;
    Ok(ConvDims { h, w, c, k, oh, ow })
}

/// Input coordinate for an output coordinate and kernel tap, or `None` inside the zero padding.
#[inline]
fn source(out: usize, tap: usize, stride: usize, padding: usize, extent: usize) -> Option<usize> {
    (out * stride + tap).checked_sub(padding).filter(|&i| i < extent)
}

/// 2-D cross-correlation over an `H×W×C` input with `kh×kw×C×K` kernels and zero padding.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    geom: &ConvGeometry,
) -> Result<Tensor<T>> {
    let d = conv_dims(input, kernels, geom)?;
    if bias.len() != d.k {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d",
            detail: format!("bias length {} != output channels {}", bias.len(), d.k),
        });
    }
    let (x, kern, b) = (input.data(), kernels.data(), bias.data());
    let mut out = vec![T::zero(); d.oh * d.ow * d.k];
    for oy in 0..d.oh {
        for ox in 0..d.ow {
            let acc = &mut out[(oy * d.ow + ox) * d.k..][..d.k];
            acc.copy_from_slice(b);
            for dy in 0..geom.kernel_h {
                let Some(iy) = source(oy, dy, geom.stride, geom.padding, d.h) else { continue };
                for dx in 0..geom.kernel_w {
                    let Some(ix) = source(ox, dx, geom.stride, geom.padding, d.w) else { continue };
                    let pixel = &x[(iy * d.w + ix) * d.c..][..d.c];
                    let tap = (dy * geom.kernel_w + dx) * d.c * d.k;
                    for (ci, &v) in pixel.iter().enumerate() {
                        if v == T::zero() {
                            continue;
                        }
                        let row = &kern[tap + ci * d.k..][..d.k];
                        for (a, &wv) in acc.iter_mut().zip(row) {
                            *a = *a + v * wv;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&[d.oh, d.ow, d.k], out)
}

/// Gradients of [`conv2d`] with respect to input, kernels and bias.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    geom: &ConvGeometry,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let d = conv_dims(input, kernels, geom)?;
    if upstream.shape() != [d.oh, d.ow, d.k] {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d_backward",
            detail: format!("upstream {:?} != output [{}, {}, {}]", upstream.shape(), d.oh, d.ow, d.k),
        });
    }
    let (x, kern, g) = (input.data(), kernels.data(), upstream.data());
    let mut dx_buf = vec![T::zero(); x.len()];
    let mut dk_buf = vec![T::zero(); kern.len()];
    let mut db_buf = vec![T::zero(); d.k];
    for oy in 0..d.oh {
        for ox in 0..d.ow {
            let grow = &g[(oy * d.ow + ox) * d.k..][..d.k];
            for (b, &gv) in db_buf.iter_mut().zip(grow) {
                *b = *b + gv;
            }
            for dy in 0..geom.kernel_h {
                let Some(iy) = source(oy, dy, geom.stride, geom.padding, d.h) else { continue };
                for dx in 0..geom.kernel_w {
                    let Some(ix) = source(ox, dx, geom.stride, geom.padding, d.w) else { continue };
                    let pix = (iy * d.w + ix) * d.c;
                    let tap = (dy * geom.kernel_w + dx) * d.c * d.k;
                    for ci in 0..d.c {
                        let row = tap + ci * d.k;
                        let krow = &kern[row..][..d.k];
                        let dot = krow.iter().zip(grow).fold(T::zero(), |s, (&a, &b)| s + a * b);
                        dx_buf[pix + ci] = dx_buf[pix + ci] + dot;
                        let v = x[pix + ci];
                        if v != T::zero() {
                            for (dkv, &gv) in dk_buf[row..][..d.k].iter_mut().zip(grow) {
                                *dkv = *dkv + v * gv;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((
        Tensor::new(input.shape(), dx_buf)?,
        Tensor::new(kernels.shape(), dk_buf)?,
        Tensor::new(&[d.k], db_buf)?,
    ))
}

pub fn relu<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    t.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes upstream gradient where the forward input was strictly positive.
pub fn relu_backward<T: Scalar>(input: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    if input.shape() != upstream.shape() {
        return Err(TensorError::ShapeMismatch {
            op: "relu_backward",
            detail: format!("input {:?} vs upstream {:?}", input.shape(), upstream.shape()),
        });
    }
    let data = input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(input.shape(), data)
}

/// Winning input offsets of a 2×2 max pool, one per output cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArgIndices {
    pub input_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
    pub offsets: Vec<usize>,
}

impl ArgIndices {
    /// `(y, x, channel)` of the winner for output cell `cell`.
    pub fn coordinate(&self, cell: usize) -> (usize, usize, usize) {
        let (w, c) = (self.input_shape[1], self.input_shape[2]);
        let off = self.offsets[cell];
        (off / (w * c), (off / c) % w, off % c)
    }
}

/// Non-overlapping 2×2 max pooling with stride 2. Odd trailing rows and columns are dropped.
pub fn maxpool2<T: Scalar>(t: &Tensor<T>) -> Result<(Tensor<T>, ArgIndices)> {
    let (h, w, c) = dims3(t, "maxpool2")?;
    if h < 2 || w < 2 {
        return Err(TensorError::DegenerateExtent { h, w });
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = t.data();
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut offsets = Vec::with_capacity(oh * ow * c);
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut best = (2 * oy * w + 2 * ox) * c + ch;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let off = ((2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                    // strict comparison keeps the first maximum in scan order
                    if x[off] > x[best] {
                        best = off;
                    }
                }
                out.push(x[best]);
                offsets.push(best);
            }
        }
    }
    let args = ArgIndices { input_shape: vec![h, w, c], output_shape: vec![oh, ow, c], offsets };
    Ok((Tensor::new(&[oh, ow, c], out)?, args))
}

pub fn maxpool2_backward<T: Scalar>(args: &ArgIndices, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    if upstream.shape() != args.output_shape.as_slice() {
        return Err(TensorError::ShapeMismatch {
            op: "maxpool2_backward",
            detail: format!("upstream {:?} vs pooled {:?}", upstream.shape(), args.output_shape),
        });
    }
    let mut din = Tensor::zeros(&args.input_shape)?;
    let buf = din.data_mut();
    for (&off, &g) in args.offsets.iter().zip(upstream.data()) {
        buf[off] = buf[off] + g;
    }
    Ok(din)
}

fn dense_dims<T: Scalar>(x: &Tensor<T>, weights: &Tensor<T>, op: &'static str) -> Result<(usize, usize)> {
    let [n, m] = *weights.shape() else {
        return Err(TensorError::ShapeMismatch {
            op,
            detail: format!("weights must be N×M, got {:?}", weights.shape()),
        });
    };
    if x.len() != n {
        return Err(TensorError::ShapeMismatch {
            op,
            detail: format!("input length {} != weight rows {n}", x.len()),
        });
    }
    Ok((n, m))
}

/// `out[m] = Σ_n x[n]·weights[n, m] + bias[m]`; `x` is read flattened.
pub fn fully_connected<T: Scalar>(
    x: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (_, m) = dense_dims(x, weights, "fully_connected")?;
    if bias.len() != m {
        return Err(TensorError::ShapeMismatch {
            op: "fully_connected",
            detail: format!("bias length {} != output width {m}", bias.len()),
        });
    }
    let mut out = bias.data().to_vec();
    for (&v, row) in x.data().iter().zip(weights.data().chunks_exact(m)) {
        if v == T::zero() {
            continue;
        }
        for (o, &wv) in out.iter_mut().zip(row) {
            *o = *o + v * wv;
        }
    }
    Tensor::new(&[m], out)
}

/// Gradients of [`fully_connected`]; the input gradient keeps `x`'s shape.
pub fn fully_connected_backward<T: Scalar>(
    x: &Tensor<T>,
    weights: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (_, m) = dense_dims(x, weights, "fully_connected_backward")?;
    if upstream.len() != m {
        return Err(TensorError::ShapeMismatch {
            op: "fully_connected_backward",
            detail: format!("upstream length {} != output width {m}", upstream.len()),
        });
    }
    let g = upstream.data();
    let mut dx = Vec::with_capacity(x.len());
    let mut dw = vec![T::zero(); weights.len()];
    for ((&v, row), drow) in x.data().iter().zip(weights.data().chunks_exact(m)).zip(dw.chunks_exact_mut(m)) {
        dx.push(row.iter().zip(g).fold(T::zero(), |s, (&a, &b)| s + a * b));
        if v != T::zero() {
            for (d, &gv) in drow.iter_mut().zip(g) {
                *d = v * gv;
            }
        }
    }
    Ok((Tensor::new(x.shape(), dx)?, Tensor::new(weights.shape(), dw)?, Tensor::new(&[m], g.to_vec())?))
}

/// Max-shifted softmax over the flattened tensor.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    if !logits.is_finite() {
        return Err(TensorError::NonFinite("softmax logits"));
    }
    let peak = logits.max();
    let exps: Vec<T> = logits.data().iter().map(|&z| (z - peak).exp()).collect();
    let total: T = exps.iter().copied().sum();
    Tensor::new(logits.shape(), exps.into_iter().map(|e| e / total).collect())
}

/// Vector-Jacobian product of softmax given its output `probs`.
pub fn softmax_backward<T: Scalar>(probs: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    if probs.len() != upstream.len() {
        return Err(TensorError::ShapeMismatch {
            op: "softmax_backward",
            detail: format!("probs {:?} vs upstream {:?}", probs.shape(), upstream.shape()),
        });
    }
    let s = probs.data();
    let g = upstream.data();
    let inner: T = s.iter().zip(g).map(|(&a, &b)| a * b).sum();
    Tensor::new(probs.shape(), s.iter().zip(g).map(|(&si, &gi)| si * (gi - inner)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossForm {
    /// `−Σ [l·log s + (1−l)·log(1−s)]` summed over every class.
    #[default]
    BinarySum,
    /// `−Σ l·log s`.
    Categorical,
}

fn check_probabilities<T: Scalar>(labels: &Tensor<T>, scores: &Tensor<T>) -> Result<()> {
    if labels.len() != scores.len() {
        return Err(TensorError::ShapeMismatch {
            op: "cross_entropy",
            detail: format!("labels {:?} vs scores {:?}", labels.shape(), scores.shape()),
        });
    }
    for (index, &s) in scores.data().iter().enumerate() {
        let v = s.as_f64();
        if !(-LOG_EPS..=1.0 + LOG_EPS).contains(&v) {
            return Err(TensorError::NotProbability { index, value: v });
        }
    }
    Ok(())
}

/// Cross-entropy cost of `scores` against one-hot `labels`, with `0·log 0 = 0`
/// and every log argument clamped to at least [`LOG_EPS`].
pub fn cross_entropy<T: Scalar>(labels: &Tensor<T>, scores: &Tensor<T>, form: LossForm) -> Result<T> {
    check_probabilities(labels, scores)?;
    let eps = T::lit(LOG_EPS);
    let (zero, one) = (T::zero(), T::one());
    let safe_log = |v: T| v.max(eps).min(one).ln();
    let mut total = zero;
    for (&l, &s) in labels.data().iter().zip(scores.data()) {
        if l != zero {
            total = total - l * safe_log(s);
        }
        if form == LossForm::BinarySum && l != one {
            total = total - (one - l) * safe_log(one - s);
        }
    }
    Ok(total.max(zero))
}

/// Gradient of [`cross_entropy`] composed with softmax, taken with respect to the logits.
///
/// Mathematically `h − s·Σh` with `h_i = s_i·∂C/∂s_i`. For the binary-sum form
/// `h_i` contains `s_i/(1−s_i)`, which overflows or cancels once a score
/// saturates in single precision, so the product is expanded: `1−s_i` is taken
/// as `u_i = Σ_{k≠i} s_k` and every cross term `s_k·h_i` is formed as
/// `s_i·(s_k/u_i)` where `s_k/u_i ≤ 1`.
pub fn loss_grad_logits<T: Scalar>(labels: &Tensor<T>, probs: &Tensor<T>, form: LossForm) -> Result<Tensor<T>> {
    check_probabilities(labels, probs)?;
    let (zero, one) = (T::zero(), T::one());
    let l = labels.data();
    let s = probs.data();
    if form == LossForm::Categorical {
        let total: T = l.iter().copied().sum();
        return Tensor::new(probs.shape(), l.iter().zip(s).map(|(&li, &si)| si * total - li).collect());
    }
    let sum: T = s.iter().copied().sum();
    let u: Vec<T> = s.iter().map(|&si| (sum - si).max(zero)).collect();
    let grad = (0..s.len())
        .map(|k| {
            let own = (one - l[k]) * s[k] - l[k] * u[k];
            let cross: T = (0..s.len())
                .filter(|&i| i != k)
                .map(|i| {
                    let ratio = if u[i] > zero { (s[k] / u[i]).min(one) } else { zero };
                    -l[i] * s[k] + (one - l[i]) * s[i] * ratio
                })
                .sum();
            own - cross
        })
        .collect();
    Tensor::new(probs.shape(), grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn t3(h: usize, w: usize, c: usize, v: &[f64]) -> Tensor<f64> {
        Tensor::new(&[h, w, c], v.to_vec()).unwrap()
    }

    #[test]
    fn conv_identity_kernel() {
        let out = conv2d(
            &t3(1, 1, 1, &[5.0]),
            &Tensor::new(&[1, 1, 1, 1], vec![1.0]).unwrap(),
            &Tensor::vector(&[0.0]),
            &ConvGeometry::square(1, 1, 0),
        )
        .unwrap();
        assert_eq!(out.data(), &[5.0]);
    }

    #[test]
    fn conv_counts_overlap_with_padding() {
        let out = conv2d(
            &Tensor::<f64>::full(&[3, 3, 1], 1.0).unwrap(),
            &Tensor::full(&[3, 3, 1, 1], 1.0).unwrap(),
            &Tensor::vector(&[0.0]),
            &ConvGeometry::square(3, 1, 1),
        )
        .unwrap();
        assert_eq!(out.shape(), &[3, 3, 1]);
        assert_eq!(out.get(&[1, 1, 0]), Some(9.0));
        for corner in [[0, 0, 0], [0, 2, 0], [2, 0, 0], [2, 2, 0]] {
            assert_eq!(out.get(&corner), Some(4.0));
        }
        assert_eq!(out.get(&[0, 1, 0]), Some(6.0));
    }

    #[test]
    fn conv_rejects_channel_mismatch_and_bad_geometry() {
        let x = Tensor::<f64>::zeros(&[4, 4, 2]).unwrap();
        let k = Tensor::zeros(&[3, 3, 3, 1]).unwrap();
        let err = conv2d(&x, &k, &Tensor::vector(&[0.0]), &ConvGeometry::square(3, 1, 1)).unwrap_err();
        assert!(err.to_string().contains("kernel channels 3 != input channels 2"), "{err}");

        let k = Tensor::zeros(&[3, 3, 2, 1]).unwrap();
        let err = conv2d(&x, &k, &Tensor::vector(&[0.0]), &ConvGeometry::square(3, 0, 1)).unwrap_err();
        assert!(matches!(err, TensorError::InvalidGeometry(_)));

        let tiny = Tensor::<f64>::zeros(&[2, 2, 2]).unwrap();
        let err = conv2d(&tiny, &k, &Tensor::vector(&[0.0]), &ConvGeometry::square(3, 1, 0)).unwrap_err();
        assert!(matches!(err, TensorError::InvalidGeometry(_)));
    }

    #[test]
    fn relu_cases() {
        let out = relu(&Tensor::vector(&[-3.0, 0.0, 2.0]));
        assert_eq!(out.data(), &[0.0, 0.0, 2.0]);
        let zeros = Tensor::<f32>::zeros(&[2, 2]).unwrap();
        assert_eq!(relu(&zeros), zeros);
        let g = relu_backward(&Tensor::vector(&[-1.0, 2.0]), &Tensor::vector(&[1.0, 1.0])).unwrap();
        assert_eq!(g.data(), &[0.0, 1.0]);
    }

    #[test]
    fn maxpool_small_cases() {
        let (out, args) = maxpool2(&t3(2, 2, 1, &[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(out.data(), &[4.0]);
        assert_eq!(args.coordinate(0), (1, 1, 0));

        let (out, _) = maxpool2(&Tensor::<f64>::full(&[4, 6, 2], 7.0).unwrap()).unwrap();
        assert_eq!(out.shape(), &[2, 3, 2]);
        assert!(out.data().iter().all(|&v| v == 7.0));

        let (out, _) = maxpool2(&Tensor::<f64>::zeros(&[5, 3, 1]).unwrap()).unwrap();
        assert_eq!(out.shape(), &[2, 1, 1]);

        assert!(matches!(
            maxpool2(&Tensor::<f64>::zeros(&[1, 4, 1]).unwrap()),
            Err(TensorError::DegenerateExtent { h: 1, w: 4 })
        ));
    }

    #[test]
    fn maxpool_backward_routes_to_winners_only() {
        let x = t3(2, 4, 1, &[1.0, 5.0, 0.0, 2.0, 3.0, 4.0, 8.0, 1.0]);
        let (_, args) = maxpool2(&x).unwrap();
        let g = maxpool2_backward(&args, &Tensor::new(&[1, 2, 1], vec![10.0, 20.0]).unwrap()).unwrap();
        assert_eq!(g.data(), &[0.0, 10.0, 0.0, 0.0, 0.0, 0.0, 20.0, 0.0]);
    }

    #[test]
    fn fully_connected_cases() {
        let eye = Tensor::new(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let out = fully_connected(&Tensor::vector(&[1.0, 0.0]), &eye, &Tensor::vector(&[0.0, 0.0])).unwrap();
        assert_eq!(out.data(), &[1.0, 0.0]);
        let w = Tensor::new(&[2, 1], vec![1.0, 1.0]).unwrap();
        let out = fully_connected(&Tensor::vector(&[1.0, 2.0]), &w, &Tensor::vector(&[3.0])).unwrap();
        assert_eq!(out.data(), &[6.0]);
        assert!(fully_connected(&Tensor::vector(&[1.0]), &w, &Tensor::vector(&[3.0])).is_err());
    }

    #[test]
    fn softmax_cases() {
        let s = softmax(&Tensor::vector(&[0.0, 0.0, 0.0])).unwrap();
        for &v in s.data() {
            assert_relative_eq!(v, 1.0 / 3.0, epsilon = 1e-12);
        }
        for c in [-7.5, 0.0, 3.0, 400.0] {
            let s = softmax(&Tensor::vector(&[c, c + 2f64.ln()])).unwrap();
            assert_relative_eq!(s.data()[0], 1.0 / 3.0, epsilon = 1e-9);
            assert_relative_eq!(s.data()[1], 2.0 / 3.0, epsilon = 1e-9);
        }
        let s = softmax(&Tensor::vector(&[1000.0f32, 0.0])).unwrap();
        assert!(s.is_finite());
        assert_relative_eq!(s.data()[0], 1.0);
        assert!(s.data()[1] < 1e-30);
        assert!(matches!(softmax(&Tensor::vector(&[f64::NAN, 0.0])), Err(TensorError::NonFinite(_))));
    }

    #[test]
    fn cross_entropy_closed_forms() {
        let l = Tensor::vector(&[1.0, 0.0]);
        let ce = |s: &[f64]| cross_entropy(&l, &Tensor::vector(s), LossForm::BinarySum).unwrap();
        assert_eq!(ce(&[1.0, 0.0]), 0.0);
        assert_relative_eq!(ce(&[0.5, 0.5]), 2.0 * 2f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(ce(&[0.9, 0.1]), 0.210_721_031_315_652_6, epsilon = 1e-12);
        let cat = cross_entropy(&l, &Tensor::vector(&[0.5, 0.5]), LossForm::Categorical).unwrap();
        assert_relative_eq!(cat, 2f64.ln(), epsilon = 1e-12);
        let big = ce(&[0.0, 1.0]);
        assert!(big.is_finite() && big > 50.0);
        assert!(matches!(
            cross_entropy(&l, &Tensor::vector(&[1.5, -0.5]), LossForm::BinarySum),
            Err(TensorError::NotProbability { index: 0, .. })
        ));
    }

    #[test]
    fn categorical_logit_gradient_is_probs_minus_labels() {
        let p = Tensor::vector(&[0.2, 0.5, 0.3]);
        let l = Tensor::vector(&[0.0, 1.0, 0.0]);
        let g = loss_grad_logits(&l, &p, LossForm::Categorical).unwrap();
        for (gi, e) in g.data().iter().zip([0.2, -0.5, 0.3]) {
            assert_relative_eq!(*gi, e, epsilon = 1e-12);
        }
    }
}
