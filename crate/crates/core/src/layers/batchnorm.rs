//! Batch normalization over axis 1 of tensors of any rank >= 2.

use serde::{Deserialize, Serialize};

use super::{prefixed, Cache, Module};
use crate::error::{Error, Result};
use crate::tensor::{shape_str, Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNormSpec {
    pub channels: usize,
    pub epsilon: f64,
    /// Running statistics follow `r = momentum * r + (1 - momentum) * batch`.
    pub momentum: f64,
}

impl BatchNormSpec {
    pub const DEFAULT_EPSILON: f64 = 1e-3;
    pub const DEFAULT_MOMENTUM: f64 = 0.99;

    pub fn new(channels: usize) -> Self {
        BatchNormSpec {
            channels,
            epsilon: Self::DEFAULT_EPSILON,
            momentum: Self::DEFAULT_MOMENTUM,
        }
    }

    /// Learnable scalars (gamma and beta).
    pub fn param_count(&self) -> usize {
        2 * self.channels
    }
}

#[derive(Clone, Debug)]
pub struct BatchNorm<T: Scalar = f32> {
    pub name: String,
    pub spec: BatchNormSpec,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(name: impl Into<String>, spec: BatchNormSpec) -> Result<Self> {
        if spec.channels == 0 || spec.epsilon <= 0.0 || !(0.0..=1.0).contains(&spec.momentum) {
            return Err(Error::InvalidArgument(format!("invalid batch norm spec {spec:?}")));
        }
        let c = [spec.channels];
        Ok(BatchNorm {
            name: name.into(),
            spec,
            gamma: Tensor::ones(&c),
            beta: Tensor::zeros(&c),
            running_mean: Tensor::zeros(&c),
            running_var: Tensor::ones(&c),
        })
    }

    /// (batch, channels, elements per channel per sample)
    fn layout(&self, x: &Tensor<T>) -> Result<(usize, usize, usize)> {
        let s = x.shape();
        if s.len() < 2 || s[1] != self.spec.channels {
            return Err(Error::dim(
                "batchnorm",
                format!("[B x {} x ...]", self.spec.channels),
                shape_str(s),
            ));
        }
        Ok((s[0], s[1], s[2..].iter().product()))
    }
}

impl<T: Scalar> Module<T> for BatchNorm<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (batch, c, inner) = self.layout(x)?;
        let eps = T::from_f64_lossy(self.spec.epsilon);
        let scale: Vec<T> = (0..c)
            .map(|ch| self.gamma.data()[ch] / (self.running_var.data()[ch] + eps).sqrt())
            .collect();
        let shift: Vec<T> = (0..c)
            .map(|ch| self.beta.data()[ch] - self.running_mean.data()[ch] * scale[ch])
            .collect();
        let mut out = x.clone();
        for b in 0..batch {
            for ch in 0..c {
                let start = (b * c + ch) * inner;
                for v in &mut out.data_mut()[start..start + inner] {
                    *v = *v * scale[ch] + shift[ch];
                }
            }
        }
        Ok(out)
    }

    fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, Cache<T>)> {
        let (batch, c, inner) = self.layout(x)?;
        let count = batch * inner;
        if count == 0 {
            return Err(Error::InvalidArgument("batchnorm needs a non-empty batch in train mode".into()));
        }
        let n = T::from_usize(count).unwrap();
        let eps = T::from_f64_lossy(self.spec.epsilon);
        let xd = x.data();
        let mut mean = vec![T::zero(); c];
        let mut var = vec![T::zero(); c];
        for b in 0..batch {
            for ch in 0..c {
                let start = (b * c + ch) * inner;
                mean[ch] += xd[start..start + inner].iter().copied().sum::<T>();
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        for b in 0..batch {
            for ch in 0..c {
                let start = (b * c + ch) * inner;
                let m = mean[ch];
                var[ch] += xd[start..start + inner].iter().map(|&v| (v - m) * (v - m)).sum::<T>();
            }
        }
        var.iter_mut().for_each(|v| *v /= n);
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();

        let mut x_hat = x.clone();
        let mut y = x.clone();
        for b in 0..batch {
            for ch in 0..c {
                let start = (b * c + ch) * inner;
                let (g, be) = (self.gamma.data()[ch], self.beta.data()[ch]);
                for i in start..start + inner {
                    let h = (xd[i] - mean[ch]) * inv_std[ch];
                    x_hat.data_mut()[i] = h;
                    y.data_mut()[i] = g * h + be;
                }
            }
        }

        let mom = T::from_f64_lossy(self.spec.momentum);
        for ch in 0..c {
            let rm = &mut self.running_mean.data_mut()[ch];
            *rm = mom * *rm + (T::one() - mom) * mean[ch];
            let rv = &mut self.running_var.data_mut()[ch];
            *rv = mom * *rv + (T::one() - mom) * var[ch];
        }

        let inv_std = Tensor::new(vec![c], inv_std)?;
        Ok((y, Cache::with_tensors(vec![x_hat, inv_std])))
    }

    fn backward(&self, cache: &Cache<T>, grad_out: &Tensor<T>, grads: &mut [Tensor<T>]) -> Result<Tensor<T>> {
        let x_hat = &cache.tensors[0];
        let inv_std = cache.tensors[1].data();
        let (batch, c, inner) = self.layout(x_hat)?;
        grad_out.expect_same_shape(x_hat, "batchnorm_backward")?;
        let n = T::from_usize(batch * inner).unwrap();
        let (gd, hd) = (grad_out.data(), x_hat.data());

        let mut sum_dy = vec![T::zero(); c];
        let mut sum_dy_xhat = vec![T::zero(); c];
        for b in 0..batch {
            for ch in 0..c {
                let start = (b * c + ch) * inner;
                for i in start..start + inner {
                    sum_dy[ch] += gd[i];
                    sum_dy_xhat[ch] += gd[i] * hd[i];
                }
            }
        }
        for ch in 0..c {
            grads[0].data_mut()[ch] += sum_dy_xhat[ch];
            grads[1].data_mut()[ch] += sum_dy[ch];
        }

        let mut dx = Tensor::zeros(x_hat.shape());
        for b in 0..batch {
            for ch in 0..c {
                let start = (b * c + ch) * inner;
                let k = self.gamma.data()[ch] * inv_std[ch] / n;
                for i in start..start + inner {
                    dx.data_mut()[i] = k * (n * gd[i] - sum_dy[ch] - hd[i] * sum_dy_xhat[ch]);
                }
            }
        }
        Ok(dx)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn param_names(&self) -> Vec<String> {
        vec![prefixed(&self.name, "gamma"), prefixed(&self.name, "beta")]
    }

    fn buffers(&self) -> Vec<&Tensor<T>> {
        vec![&self.running_mean, &self.running_var]
    }

    fn buffers_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.running_mean, &mut self.running_var]
    }
}
