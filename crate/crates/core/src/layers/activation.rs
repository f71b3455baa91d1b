use serde::{Deserialize, Serialize};

use super::{Cache, Module};
use crate::error::Result;
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    /// `min(max(x, 0), 6)`
    Relu6,
}

impl Activation {
    pub fn apply<T: Scalar>(&self, x: &Tensor<T>) -> Tensor<T> {
        match self {
            Activation::Relu => x.map(|v| v.max(T::zero())),
            Activation::Relu6 => {
                let six = T::from_f64_lossy(6.0);
                x.map(|v| v.max(T::zero()).min(six))
            }
        }
    }

    /// Gradient given the pre-activation input. The derivative at a kink is 0.
    pub fn backward<T: Scalar>(&self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Activation::Relu => x.zip_map(grad_out, "relu_backward", |v, g| if v > T::zero() { g } else { T::zero() }),
            Activation::Relu6 => {
                let six = T::from_f64_lossy(6.0);
                x.zip_map(grad_out, "relu6_backward", |v, g| {
                    if v > T::zero() && v < six {
                        g
                    } else {
                        T::zero()
                    }
                })
            }
        }
    }
}

impl<T: Scalar> Module<T> for Activation {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.apply(x))
    }

    fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, Cache<T>)> {
        Ok((self.apply(x), Cache::with_tensors(vec![x.clone()])))
    }

    fn backward(&self, cache: &Cache<T>, grad_out: &Tensor<T>, _grads: &mut [Tensor<T>]) -> Result<Tensor<T>> {
        Activation::backward(self, &cache.tensors[0], grad_out)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        Vec::new()
    }

    fn param_names(&self) -> Vec<String> {
        Vec::new()
    }
}
