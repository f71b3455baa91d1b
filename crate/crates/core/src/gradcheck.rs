//! Central finite-difference check of hand-written backward passes.
//!
//! The scalar loss is `sum_i w_i * y_i` over the layer output, with fixed
//! weights `w_i` drawn from `[0.5, 1.5)`. With every weight equal to one,
//! batch norm's gradients vanish identically and the check degenerates to
//! comparing rounding noise, so the weights are deliberately uneven.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::layers::{softmax_cross_entropy, Module};
use crate::rng::Rng;
use crate::tensor::Tensor;

const LOSS_WEIGHT_SEED: u64 = 0x6772_6164_6368_6b; // "gradchk"

#[derive(Clone, Debug, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    /// Maximum over the input and every parameter.
    pub max_rel_error: f64,
    pub input_rel_error: f64,
    pub params: Vec<ParamCheck>,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn loss_weights(n: usize) -> Tensor<f64> {
    let mut rng = Rng::new(LOSS_WEIGHT_SEED);
    Tensor::from_fn(&[n], |_| rng.uniform_range(0.5, 1.5))
}

fn weighted_sum(y: &Tensor<f64>, w: &Tensor<f64>) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

fn check_eps(eps: f64) -> Result<()> {
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(Error::InvalidArgument(format!("grad_check eps {eps} outside [1e-6, 1e-3]")));
    }
    Ok(())
}

fn ensure_finite(t: &Tensor<f64>, what: &str) -> Result<()> {
    if t.all_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { what: what.to_string() })
    }
}

/// Compares `layer.backward` against central differences of a training
/// forward pass, for every input element and every parameter element.
pub fn grad_check<M: Module<f64>>(layer: &mut M, input: &Tensor<f64>, eps: f64) -> Result<GradCheckReport> {
    check_eps(eps)?;
    ensure_finite(input, "grad_check input")?;
    let (y, cache) = layer.forward_train(input)?;
    ensure_finite(&y, "layer output")?;
    let w = loss_weights(y.numel()).into_reshaped(y.shape())?;
    let mut grads = layer.zero_grads();
    let dx = layer.backward(&cache, &w, &mut grads)?;
    ensure_finite(&dx, "input gradient")?;

    let names = layer.param_names();
    let mut params = Vec::with_capacity(grads.len());
    for (p, (name, analytic)) in names.into_iter().zip(&grads).enumerate() {
        ensure_finite(analytic, &format!("gradient of {name}"))?;
        let mut worst: f64 = 0.0;
        for i in 0..analytic.numel() {
            let original = layer.params()[p].data()[i];
            layer.params_mut()[p].data_mut()[i] = original + eps;
            let plus = weighted_sum(&layer.forward_train(input)?.0, &w);
            layer.params_mut()[p].data_mut()[i] = original - eps;
            let minus = weighted_sum(&layer.forward_train(input)?.0, &w);
            layer.params_mut()[p].data_mut()[i] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            if !numeric.is_finite() {
                return Err(Error::NonFinite {
                    what: format!("finite difference of {name}[{i}]"),
                });
            }
            worst = worst.max(relative_error(analytic.data()[i], numeric));
        }
        params.push(ParamCheck {
            name,
            max_rel_error: worst,
        });
    }

    let mut x = input.clone();
    let mut input_rel_error: f64 = 0.0;
    for i in 0..x.numel() {
        let original = x.data()[i];
        x.data_mut()[i] = original + eps;
        let plus = weighted_sum(&layer.forward_train(&x)?.0, &w);
        x.data_mut()[i] = original - eps;
        let minus = weighted_sum(&layer.forward_train(&x)?.0, &w);
        x.data_mut()[i] = original;
        let numeric = (plus - minus) / (2.0 * eps);
        if !numeric.is_finite() {
            return Err(Error::NonFinite {
                what: format!("finite difference of input[{i}]"),
            });
        }
        input_rel_error = input_rel_error.max(relative_error(dx.data()[i], numeric));
    }

    let max_rel_error = params.iter().map(|p| p.max_rel_error).fold(input_rel_error, f64::max);
    Ok(GradCheckReport {
        max_rel_error,
        input_rel_error,
        params,
    })
}

/// Checks the logits gradient of [`softmax_cross_entropy`].
pub fn grad_check_softmax_ce(logits: &Tensor<f64>, labels: &[usize], eps: f64) -> Result<GradCheckReport> {
    check_eps(eps)?;
    ensure_finite(logits, "logits")?;
    let (_, analytic) = softmax_cross_entropy(logits, labels)?;
    let mut z = logits.clone();
    let mut worst: f64 = 0.0;
    for i in 0..z.numel() {
        let original = z.data()[i];
        z.data_mut()[i] = original + eps;
        let plus = softmax_cross_entropy(&z, labels)?.0;
        z.data_mut()[i] = original - eps;
        let minus = softmax_cross_entropy(&z, labels)?.0;
        z.data_mut()[i] = original;
        worst = worst.max(relative_error(analytic.data()[i], (plus - minus) / (2.0 * eps)));
    }
    Ok(GradCheckReport {
        max_rel_error: worst,
        input_rel_error: worst,
        params: Vec::new(),
    })
}

/// Layer families covered by [`check_random_layer`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv2d,
    DepthwiseSeparable,
    Conv3d,
    Conv2Plus1d,
    BatchNorm,
    Dense,
    MaxPool,
    GlobalAvgPool,
    SoftmaxCrossEntropy,
}

impl LayerKind {
    pub const ALL: [LayerKind; 9] = [
        LayerKind::Conv2d,
        LayerKind::DepthwiseSeparable,
        LayerKind::Conv3d,
        LayerKind::Conv2Plus1d,
        LayerKind::BatchNorm,
        LayerKind::Dense,
        LayerKind::MaxPool,
        LayerKind::GlobalAvgPool,
        LayerKind::SoftmaxCrossEntropy,
    ];
}

#[derive(Clone, Debug, Serialize)]
pub struct LayerCheck {
    pub kind: LayerKind,
    pub seed: u64,
    pub input_shape: Vec<usize>,
    pub report: GradCheckReport,
}

fn uniform_input(shape: &[usize], rng: &mut Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.uniform_range(-1.0, 1.0))
}

/// Builds a small randomly shaped instance of `kind` from `seed` and
/// checks it at `eps = 1e-5`.
pub fn check_random_layer(kind: LayerKind, seed: u64) -> Result<LayerCheck> {
    use crate::layers::{
        BatchNorm, BatchNormSpec, Conv2Plus1d, Conv2Plus1dSpec, Conv2d, Conv2dSpec, Conv3d, Conv3dSpec, Dense,
        GlobalAvgPool, MaxPool2d, Padding, SeparableConv2d, SeparableSpec,
    };
    const EPS: f64 = 1e-5;
    let mut rng = Rng::new(seed).derive(kind as u64);
    let mut pick = |lo: usize, hi: usize| pick_rng(&mut rng, lo, hi);
    let (b, c, o, k) = (pick(1, 2), pick(1, 3), pick(1, 3), pick(1, 3));
    let (h, w, t) = (pick(k, 6), pick(k, 6), pick(1, 3));
    let stride = pick(1, 2);
    let pad = pick(0, 1);
    let mut rng = Rng::new(seed).derive(0x100 + kind as u64);
    let (shape, report) = match kind {
        LayerKind::Conv2d => {
            let spec = Conv2dSpec::new(c, o, k).stride(stride).pad(pad);
            let x = uniform_input(&[b, c, h, w], &mut rng);
            (x.shape().to_vec(), grad_check(&mut randomized(Conv2d::new("conv", spec, &mut rng)?, &mut rng), &x, EPS)?)
        }
        LayerKind::DepthwiseSeparable => {
            let spec = SeparableSpec::new(c, o, k).pad(pad);
            let x = uniform_input(&[b, c, h, w], &mut rng);
            (x.shape().to_vec(), grad_check(&mut randomized(SeparableConv2d::new("sep", spec, &mut rng)?, &mut rng), &x, EPS)?)
        }
        LayerKind::Conv3d => {
            let kt = 1 + rng.below(t);
            let spec = Conv3dSpec::new(c, o, kt, k).stride(1, stride).pad(0, pad);
            let x = uniform_input(&[b, c, t, h, w], &mut rng);
            (x.shape().to_vec(), grad_check(&mut randomized(Conv3d::new("conv3d", spec, &mut rng)?, &mut rng), &x, EPS)?)
        }
        LayerKind::Conv2Plus1d => {
            let kt = 1 + rng.below(t);
            let m = 1 + rng.below(3);
            let spec = Conv2Plus1dSpec::new(c, m, o, k, kt, stride, Padding::symmetric(pad), Padding::NONE, true);
            let x = uniform_input(&[b, c, t, h, w], &mut rng);
            (x.shape().to_vec(), grad_check(&mut randomized(Conv2Plus1d::new("c21", spec, &mut rng)?, &mut rng), &x, EPS)?)
        }
        LayerKind::BatchNorm => {
            // at least two values per channel, or the batch variance is zero
            let x = uniform_input(&[b + 1, c, h, w], &mut rng);
            let mut bn = BatchNorm::new("bn", BatchNormSpec::new(c))?;
            for p in crate::layers::Module::<f64>::params_mut(&mut bn) {
                *p = uniform_input(p.shape(), &mut rng).map(|v| v + 1.0);
            }
            (x.shape().to_vec(), grad_check(&mut bn, &x, EPS)?)
        }
        LayerKind::Dense => {
            let (i, n) = (pick_rng(&mut rng, 1, 8), pick_rng(&mut rng, 1, 8));
            let x = uniform_input(&[b, i], &mut rng);
            (x.shape().to_vec(), grad_check(&mut randomized(Dense::new("dense", i, n, &mut rng)?, &mut rng), &x, EPS)?)
        }
        LayerKind::MaxPool => {
            let x = uniform_input(&[b, c, h, w], &mut rng);
            let mut pool = MaxPool2d::new(k.max(2).min(h.min(w)), stride);
            if pad == 1 {
                pool = pool.same_for(h, w);
            }
            (x.shape().to_vec(), grad_check(&mut pool, &x, EPS)?)
        }
        LayerKind::GlobalAvgPool => {
            let x = uniform_input(&[b, c, h, w], &mut rng);
            (x.shape().to_vec(), grad_check(&mut GlobalAvgPool, &x, EPS)?)
        }
        LayerKind::SoftmaxCrossEntropy => {
            let classes = pick_rng(&mut rng, 2, 7);
            let x = uniform_input(&[b + 1, classes], &mut rng).map(|v| 3.0 * v);
            let labels: Vec<usize> = (0..b + 1).map(|_| rng.below(classes)).collect();
            (x.shape().to_vec(), grad_check_softmax_ce(&x, &labels, EPS)?)
        }
    };
    Ok(LayerCheck {
        kind,
        seed,
        input_shape: shape,
        report,
    })
}

/// Replaces every parameter, biases included, with uniform values so no
/// activation sits exactly on a ReLU kink.
fn randomized<M: Module<f64>>(mut layer: M, rng: &mut Rng) -> M {
    for p in layer.params_mut() {
        *p = uniform_input(p.shape(), rng);
    }
    layer
}

fn pick_rng(rng: &mut Rng, lo: usize, hi: usize) -> usize {
    lo + rng.below(hi - lo + 1)
}
