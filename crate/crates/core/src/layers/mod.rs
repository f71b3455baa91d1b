//! Layer implementations with hand-derived backward passes.
//!
//! Every layer implements [`Module`]: an inference forward that never
//! mutates state, a training forward that returns a [`Cache`] of whatever
//! the backward pass needs, and a backward that returns the input gradient
//! while accumulating parameter gradients into caller-owned buffers.

mod activation;
mod batchnorm;
mod container;
mod conv;
mod conv2plus1d;
mod dense;
mod depthwise;
mod loss;
mod pool;

pub use activation::Activation;
pub use batchnorm::{BatchNorm, BatchNormSpec};
pub use container::{Residual, Sequential};
pub use conv::{Conv2d, Conv2dSpec, Conv3d, Conv3dSpec, Padding};
pub use conv2plus1d::{Conv2Plus1d, Conv2Plus1dSpec};
pub use dense::Dense;
pub use depthwise::{DepthwiseConv2d, DepthwiseSpec, SeparableConv2d, SeparableSpec};
pub use loss::{softmax, softmax_cross_entropy};
pub use pool::{GlobalAvgPool, MaxPool2d};

use crate::error::Result;
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

/// Activations and indices saved by a training forward pass.
#[derive(Clone, Debug, Default)]
pub struct Cache<T> {
    pub(crate) tensors: Vec<Tensor<T>>,
    pub(crate) children: Vec<Cache<T>>,
    pub(crate) indices: Vec<usize>,
    pub(crate) shape: Vec<usize>,
}

impl<T> Cache<T> {
    pub(crate) fn with_tensors(tensors: Vec<Tensor<T>>) -> Self {
        Cache {
            tensors,
            children: Vec::new(),
            indices: Vec::new(),
            shape: Vec::new(),
        }
    }

    pub(crate) fn with_shape(shape: &[usize]) -> Self {
        Cache {
            tensors: Vec::new(),
            children: Vec::new(),
            indices: Vec::new(),
            shape: shape.to_vec(),
        }
    }
}

pub trait Module<T: Scalar> {
    /// Inference forward. Batch norm uses its running statistics.
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>>;

    /// Training forward. Batch norm normalizes with batch statistics and
    /// updates its running statistics.
    fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, Cache<T>)>;

    /// Returns dL/dx and adds dL/dθ into `grads`, which is aligned with
    /// [`Module::params`].
    fn backward(&self, cache: &Cache<T>, grad_out: &Tensor<T>, grads: &mut [Tensor<T>]) -> Result<Tensor<T>>;

    fn params(&self) -> Vec<&Tensor<T>>;

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>>;

    /// Dotted names aligned with [`Module::params`].
    fn param_names(&self) -> Vec<String>;

    /// Non-learned state (batch norm running statistics).
    fn buffers(&self) -> Vec<&Tensor<T>> {
        Vec::new()
    }

    fn buffers_mut(&mut self) -> Vec<&mut Tensor<T>> {
        Vec::new()
    }

    /// Learnable scalar count; running statistics are not included.
    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.numel()).sum()
    }

    fn zero_grads(&self) -> Vec<Tensor<T>> {
        self.params().iter().map(|p| Tensor::zeros(p.shape())).collect()
    }
}

/// Any layer a network can be assembled from.
#[derive(Clone, Debug)]
pub enum Layer<T: Scalar = f32> {
    Conv2d(Conv2d<T>),
    Conv3d(Conv3d<T>),
    Depthwise(DepthwiseConv2d<T>),
    Separable(SeparableConv2d<T>),
    Conv2Plus1d(Conv2Plus1d<T>),
    BatchNorm(BatchNorm<T>),
    Activation(Activation),
    MaxPool2d(MaxPool2d),
    GlobalAvgPool(GlobalAvgPool),
    Dense(Dense<T>),
    Sequential(Sequential<T>),
    Residual(Residual<T>),
}

macro_rules! dispatch {
    ($self:expr, $l:ident => $body:expr) => {
        match $self {
            Layer::Conv2d($l) => $body,
            Layer::Conv3d($l) => $body,
            Layer::Depthwise($l) => $body,
            Layer::Separable($l) => $body,
            Layer::Conv2Plus1d($l) => $body,
            Layer::BatchNorm($l) => $body,
            Layer::Activation($l) => $body,
            Layer::MaxPool2d($l) => $body,
            Layer::GlobalAvgPool($l) => $body,
            Layer::Dense($l) => $body,
            Layer::Sequential($l) => $body,
            Layer::Residual($l) => $body,
        }
    };
}

impl<T: Scalar> Module<T> for Layer<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        dispatch!(self, l => Module::<T>::forward(l, x))
    }

    fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, Cache<T>)> {
        dispatch!(self, l => Module::<T>::forward_train(l, x))
    }

    fn backward(&self, cache: &Cache<T>, grad_out: &Tensor<T>, grads: &mut [Tensor<T>]) -> Result<Tensor<T>> {
        dispatch!(self, l => Module::<T>::backward(l, cache, grad_out, grads))
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        dispatch!(self, l => Module::<T>::params(l))
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        dispatch!(self, l => Module::<T>::params_mut(l))
    }

    fn param_names(&self) -> Vec<String> {
        dispatch!(self, l => Module::<T>::param_names(l))
    }

    fn buffers(&self) -> Vec<&Tensor<T>> {
        dispatch!(self, l => Module::<T>::buffers(l))
    }

    fn buffers_mut(&mut self) -> Vec<&mut Tensor<T>> {
        dispatch!(self, l => Module::<T>::buffers_mut(l))
    }
}

macro_rules! impl_from_layer {
    ($($variant:ident($ty:ty)),* $(,)?) => {
        $(impl<T: Scalar> From<$ty> for Layer<T> {
            fn from(l: $ty) -> Self {
                Layer::$variant(l)
            }
        })*
    };
}

impl_from_layer!(
    Conv2d(Conv2d<T>),
    Conv3d(Conv3d<T>),
    Depthwise(DepthwiseConv2d<T>),
    Separable(SeparableConv2d<T>),
    Conv2Plus1d(Conv2Plus1d<T>),
    BatchNorm(BatchNorm<T>),
    Activation(Activation),
    MaxPool2d(MaxPool2d),
    GlobalAvgPool(GlobalAvgPool),
    Dense(Dense<T>),
    Sequential(Sequential<T>),
    Residual(Residual<T>),
);

/// Fan-in scaled uniform initializer: `U(-sqrt(6/fan_in), sqrt(6/fan_in))`.
pub(crate) fn fan_in_uniform<T: Scalar>(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Tensor<T> {
    let limit = (6.0 / fan_in.max(1) as f64).sqrt();
    Tensor::from_fn(shape, |_| T::from_f64_lossy(rng.uniform_range(-limit, limit)))
}

pub(crate) fn prefixed(prefix: &str, field: &str) -> String {
    if prefix.is_empty() {
        field.to_string()
    } else {
        format!("{prefix}.{field}")
    }
}
