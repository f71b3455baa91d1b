use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor<f32>>,
    pub v: Vec<Tensor<f32>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &[&Tensor<f32>]) -> Self {
        AdamState {
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. `names` label errors and must be
/// aligned with `params` and `grads`.
pub fn adam_step(
    params: Vec<&mut Tensor<f32>>,
    grads: &[Tensor<f32>],
    names: &[String],
    state: &mut AdamState,
    lr: f64,
    hyper: &AdamHyper,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::InvalidArgument(format!(
            "adam: {} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, g) in grads.iter().enumerate() {
        if g.shape() != params[i].shape() {
            return Err(Error::dim(
                "adam_step",
                crate::tensor::shape_str(params[i].shape()),
                crate::tensor::shape_str(g.shape()),
            ));
        }
        if !g.all_finite() {
            return Err(Error::NonFinite {
                what: format!("gradient of {}", names.get(i).map_or("?", |s| s.as_str())),
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (hyper.beta1, hyper.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let (b1f, b2f) = (b1 as f32, b2 as f32);
    let step = (lr / c1) as f32;
    let inv_c2 = (1.0 / c2) as f32;
    let eps = hyper.epsilon as f32;
    for ((p, g), (m, v)) in params.into_iter().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        let iter = p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
        for ((w, &gi), (mi, vi)) in iter {
            *mi = b1f * *mi + (1.0 - b1f) * gi;
            *vi = b2f * *vi + (1.0 - b2f) * gi * gi;
            *w -= step * *mi / ((*vi * inv_c2).sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = Tensor::from_fn(&[3], |i| i as f32 - 1.0);
        let before = p.clone();
        let mut st = AdamState::new(&[&p]);
        adam_step(vec![&mut p], &[Tensor::zeros(&[3])], &names(1), &mut st, 1e-3, &AdamHyper::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Tensor::new(vec![2], vec![0.5f32, 0.5]).unwrap();
        let mut st = AdamState::new(&[&p]);
        let g = Tensor::new(vec![2], vec![3.0f32, -0.02]).unwrap();
        adam_step(vec![&mut p], &[g], &names(1), &mut st, 1e-2, &AdamHyper::default()).unwrap();
        assert!((p.data()[0] - (0.5 - 1e-2)).abs() < 1e-6);
        assert!((p.data()[1] - (0.5 + 1e-2)).abs() < 1e-6);
    }

    #[test]
    fn non_finite_gradient_named() {
        let mut p = Tensor::<f32>::zeros(&[1]);
        let mut st = AdamState::new(&[&p]);
        let g = Tensor::new(vec![1], vec![f32::INFINITY]).unwrap();
        let err = adam_step(vec![&mut p], &[g], &["stem.weight".into()], &mut st, 1e-3, &AdamHyper::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("stem.weight"), "{err}");
    }
}
