//! Factorized (2+1)D convolution: a `1 x k x k` spatial convolution into
//! `M` intermediate channels, ReLU, then a `kt x 1 x 1` temporal convolution.

use serde::{Deserialize, Serialize};

use super::{prefixed, Activation, Cache, Conv3d, Conv3dSpec, Module, Padding};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conv2Plus1dSpec {
    pub spatial: Conv3dSpec,
    pub temporal: Conv3dSpec,
}

impl Conv2Plus1dSpec {
    /// `in -> M` spatial (`1 x k x k`, spatial stride `stride`, padding
    /// `pad`) then `M -> out` temporal (`kt x 1 x 1`, padding `pad_t`).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        in_channels: usize,
        intermediate: usize,
        out_channels: usize,
        kernel: usize,
        kernel_t: usize,
        stride: usize,
        pad: Padding,
        pad_t: Padding,
        has_bias: bool,
    ) -> Self {
        let spatial = Conv3dSpec::new(in_channels, intermediate, 1, kernel)
            .stride(1, stride)
            .pad_thw(Padding::NONE, pad, pad)
            .bias(has_bias);
        let temporal = Conv3dSpec::new(intermediate, out_channels, kernel_t, 1)
            .pad_thw(pad_t, Padding::NONE, Padding::NONE)
            .bias(has_bias);
        Conv2Plus1dSpec { spatial, temporal }
    }

    pub fn intermediate_channels(&self) -> usize {
        self.spatial.out_channels
    }

    pub fn param_count(&self) -> usize {
        self.spatial.param_count() + self.temporal.param_count()
    }

    fn validate(&self) -> Result<()> {
        let s = &self.spatial;
        let t = &self.temporal;
        if s.kernel_t != 1 || s.stride_t != 1 || s.pad_t.total() != 0 {
            return Err(Error::InvalidArgument("(2+1)D spatial stage must be 1 x k x k".into()));
        }
        if t.kernel_h != 1 || t.kernel_w != 1 || t.stride != 1 || t.pad_h.total() + t.pad_w.total() != 0 {
            return Err(Error::InvalidArgument("(2+1)D temporal stage must be kt x 1 x 1".into()));
        }
        if s.out_channels != t.in_channels || s.out_channels == 0 {
            return Err(Error::InvalidArgument(format!(
                "(2+1)D intermediate channels disagree: spatial emits {}, temporal takes {}",
                s.out_channels, t.in_channels
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Conv2Plus1d<T: Scalar = f32> {
    pub name: String,
    pub spatial: Conv3d<T>,
    pub temporal: Conv3d<T>,
}

impl<T: Scalar> Conv2Plus1d<T> {
    pub fn new(name: impl Into<String>, spec: Conv2Plus1dSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let name = name.into();
        Ok(Conv2Plus1d {
            spatial: Conv3d::new(prefixed(&name, "spatial"), spec.spatial, rng)?,
            temporal: Conv3d::new(prefixed(&name, "temporal"), spec.temporal, rng)?,
            name,
        })
    }
}

impl<T: Scalar> Module<T> for Conv2Plus1d<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let h = Activation::Relu.apply(&self.spatial.forward(x)?);
        self.temporal.forward(&h)
    }

    fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, Cache<T>)> {
        let (pre, c_spatial) = self.spatial.forward_train(x)?;
        let h = Activation::Relu.apply(&pre);
        let (y, c_temporal) = self.temporal.forward_train(&h)?;
        Ok((
            y,
            Cache {
                tensors: vec![pre],
                children: vec![c_spatial, c_temporal],
                ..Cache::default()
            },
        ))
    }

    fn backward(&self, cache: &Cache<T>, grad_out: &Tensor<T>, grads: &mut [Tensor<T>]) -> Result<Tensor<T>> {
        let n_spatial = self.spatial.params().len();
        let (g_s, g_t) = grads.split_at_mut(n_spatial);
        let gh = self.temporal.backward(&cache.children[1], grad_out, g_t)?;
        let gpre = Activation::Relu.backward(&cache.tensors[0], &gh)?;
        self.spatial.backward(&cache.children[0], &gpre, g_s)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        let mut p = self.spatial.params();
        p.extend(self.temporal.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p = self.spatial.params_mut();
        p.extend(self.temporal.params_mut());
        p
    }

    fn param_names(&self) -> Vec<String> {
        let mut p = self.spatial.param_names();
        p.extend(self.temporal.param_names());
        p
    }
}
