//! The six classification networks, their input contracts and checkpoints.

mod checkpoint;
mod mobilenet;
mod resnet;
mod xception;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, read_checkpoint, save_checkpoint, write_checkpoint};

use crate::error::{Error, Result};
use crate::layers::{Activation, BatchNorm, BatchNormSpec, Cache, Layer, Module, Sequential};
use crate::rng::Rng;
use crate::tensor::{shape_str, Scalar, Tensor};

pub const NUM_CLASSES: usize = 7;
/// Frames per sub-sequence stack.
pub const WINDOW: usize = 5;
/// Height and width of every preprocessed frame.
pub const FRAME_SIDE: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchId {
    Xception2d,
    #[serde(rename = "resnet20_2plus1d")]
    Resnet20_2plus1d,
    #[serde(rename = "resnet20_3d")]
    Resnet20_3d,
    TimeconvXception,
    #[serde(rename = "timeconv_resnet20")]
    TimeconvResnet20,
    #[serde(rename = "timeconv_mobilenetv2")]
    TimeconvMobilenetv2,
}

/// How a `[B, t, H, W]` stack batch is presented to a network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputKind {
    /// Only the final frame: `[B, 1, H, W]`.
    LastFrame,
    /// Frames as channels: `[B, t, H, W]`.
    Stacked,
    /// Frames as a depth axis: `[B, 1, t, H, W]`.
    Volume,
}

impl ArchId {
    pub const ALL: [ArchId; 6] = [
        ArchId::Xception2d,
        ArchId::Resnet20_2plus1d,
        ArchId::Resnet20_3d,
        ArchId::TimeconvXception,
        ArchId::TimeconvResnet20,
        ArchId::TimeconvMobilenetv2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ArchId::Xception2d => "xception2d",
            ArchId::Resnet20_2plus1d => "resnet20_2plus1d",
            ArchId::Resnet20_3d => "resnet20_3d",
            ArchId::TimeconvXception => "timeconv_xception",
            ArchId::TimeconvResnet20 => "timeconv_resnet20",
            ArchId::TimeconvMobilenetv2 => "timeconv_mobilenetv2",
        }
    }

    /// Stable on-disk code.
    pub fn code(self) -> u8 {
        match self {
            ArchId::Xception2d => 1,
            ArchId::Resnet20_2plus1d => 2,
            ArchId::Resnet20_3d => 3,
            ArchId::TimeconvXception => 4,
            ArchId::TimeconvResnet20 => 5,
            ArchId::TimeconvMobilenetv2 => 6,
        }
    }

    pub fn from_code(code: u8) -> Option<ArchId> {
        ArchId::ALL.into_iter().find(|a| a.code() == code)
    }

    pub fn input_kind(self) -> InputKind {
        match self {
            ArchId::Xception2d => InputKind::LastFrame,
            ArchId::TimeconvXception | ArchId::TimeconvResnet20 | ArchId::TimeconvMobilenetv2 => InputKind::Stacked,
            ArchId::Resnet20_3d | ArchId::Resnet20_2plus1d => InputKind::Volume,
        }
    }

    /// Per-sample input shape (batch axis excluded).
    pub fn input_shape(self) -> Vec<usize> {
        match self.input_kind() {
            InputKind::LastFrame => vec![1, FRAME_SIDE, FRAME_SIDE],
            InputKind::Stacked => vec![WINDOW, FRAME_SIDE, FRAME_SIDE],
            InputKind::Volume => vec![1, WINDOW, FRAME_SIDE, FRAME_SIDE],
        }
    }
}

impl fmt::Display for ArchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArchId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ArchId::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = ArchId::ALL.iter().map(|a| a.as_str()).collect();
            Error::InvalidArgument(format!("unknown architecture {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

/// Converts a `[B, t, H, W]` batch of stacks to the layout `kind` expects.
pub fn prepare_input<T: Scalar>(stacks: &Tensor<T>, kind: InputKind) -> Result<Tensor<T>> {
    let s = stacks.shape();
    if s.len() != 4 {
        return Err(Error::dim("prepare_input", "[B x t x H x W]", shape_str(s)));
    }
    let (b, t, plane) = (s[0], s[1], s[2] * s[3]);
    match kind {
        InputKind::Stacked => Ok(stacks.clone()),
        InputKind::Volume => stacks.reshape(&[b, 1, t, s[2], s[3]]),
        InputKind::LastFrame => {
            let mut data = Vec::with_capacity(b * plane);
            for sample in stacks.data().chunks(t * plane) {
                data.extend_from_slice(&sample[(t - 1) * plane..]);
            }
            Tensor::new(vec![b, 1, s[2], s[3]], data)
        }
    }
}

/// Parameter tally for one top-level block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockCount {
    pub block: String,
    pub learnable: usize,
    /// Batch norm running mean and variance.
    pub running: usize,
}

#[derive(Clone, Debug)]
pub struct Network<T: Scalar = f32> {
    arch: ArchId,
    body: Sequential<T>,
}

/// Builds an initialized network. Weights use the fan-in uniform
/// initializer; biases and batch norm shifts start at zero.
pub fn build_network<T: Scalar>(arch: ArchId, rng: &mut Rng) -> Network<T> {
    let body = match arch {
        ArchId::Xception2d => xception::mini_xception(1, rng),
        ArchId::TimeconvXception => xception::mini_xception(WINDOW, rng),
        ArchId::TimeconvResnet20 => resnet::resnet20(resnet::ConvKind::Planar, WINDOW, rng),
        ArchId::Resnet20_3d => resnet::resnet20(resnet::ConvKind::Volumetric, 1, rng),
        ArchId::Resnet20_2plus1d => resnet::resnet20(resnet::ConvKind::Factorized, 1, rng),
        ArchId::TimeconvMobilenetv2 => mobilenet::mobilenet_v2(WINDOW, rng),
    };
    Network {
        arch,
        body: body.expect("builder specs are statically valid"),
    }
}

impl<T: Scalar> Network<T> {
    pub fn arch(&self) -> ArchId {
        self.arch
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.body.layers
    }

    /// Learnable scalars: weights, biases, batch norm gamma and beta.
    pub fn count_params(&self) -> usize {
        self.param_count()
    }

    /// Learnable scalars plus batch norm running statistics.
    pub fn count_params_with_running_stats(&self) -> usize {
        self.count_params() + self.buffers().iter().map(|b| b.numel()).sum::<usize>()
    }

    /// Per-block tallies, grouped by the first component of each
    /// parameter name, in build order.
    pub fn block_counts(&self) -> Vec<BlockCount> {
        let mut out: Vec<BlockCount> = Vec::new();
        for (name, p) in self.param_names().iter().zip(self.params()) {
            let block = name.split('.').next().unwrap_or(name).to_string();
            // gamma and beta are the only parameters paired with running statistics
            let running = if name.ends_with(".gamma") || name.ends_with(".beta") {
                p.numel()
            } else {
                0
            };
            match out.last_mut() {
                Some(last) if last.block == block => {
                    last.learnable += p.numel();
                    last.running += running;
                }
                _ => out.push(BlockCount {
                    block,
                    learnable: p.numel(),
                    running,
                }),
            }
        }
        out
    }

    pub fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let expected = self.arch.input_shape();
        let s = x.shape();
        if s.len() != expected.len() + 1 || s[1..] != expected[..] {
            let dims: Vec<String> = expected.iter().map(|d| d.to_string()).collect();
            return Err(Error::Dimension {
                op: "network input",
                expected: format!("[Bx{}] for {}", dims.join("x"), self.arch),
                actual: shape_str(s),
            });
        }
        Ok(())
    }

    /// Converts to another precision, keeping every value.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let mut out = build_network::<U>(self.arch, &mut Rng::new(0));
        for (dst, src) in out.params_mut().into_iter().zip(self.params()) {
            *dst = src.cast();
        }
        for (dst, src) in out.buffers_mut().into_iter().zip(self.buffers()) {
            *dst = src.cast();
        }
        out
    }
}

impl<T: Scalar> Module<T> for Network<T> {
    /// Inference forward returning `[B, 7]` logits.
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        self.body.forward(x)
    }

    fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, Cache<T>)> {
        self.check_input(x)?;
        self.body.forward_train(x)
    }

    fn backward(&self, cache: &Cache<T>, grad_out: &Tensor<T>, grads: &mut [Tensor<T>]) -> Result<Tensor<T>> {
        self.body.backward(cache, grad_out, grads)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        self.body.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.body.params_mut()
    }

    fn param_names(&self) -> Vec<String> {
        self.body.param_names()
    }

    fn buffers(&self) -> Vec<&Tensor<T>> {
        self.body.buffers()
    }

    fn buffers_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.body.buffers_mut()
    }
}

/// `layer -> batch norm -> activation?` appended to `seq`.
pub(crate) fn push_conv_bn<T: Scalar>(
    seq: &mut Sequential<T>,
    name: &str,
    conv: impl Into<Layer<T>>,
    channels: usize,
    act: Option<Activation>,
) -> Result<()> {
    seq.push(conv);
    seq.push(BatchNorm::new(format!("{name}_bn"), BatchNormSpec::new(channels))?);
    if let Some(a) = act {
        seq.push(a);
    }
    Ok(())
}
