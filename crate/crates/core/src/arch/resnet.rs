//! ResNet20 in planar, volumetric and factorized (2+1)D forms.
//!
//! Three stages of three basic blocks at 16, 32 and 64 channels. The first
//! block of stages two and three halves height and width and projects its
//! shortcut with a strided 1x1 (or 1x1x1) convolution that has a bias and
//! no batch norm. Every other convolution has a bias and is followed by
//! batch norm. The time axis is never strided. A global average pool and
//! a dense layer form the head.

use super::{push_conv_bn, FRAME_SIDE, NUM_CLASSES};
use crate::error::Result;
use crate::layers::{
    Activation, Conv2Plus1d, Conv2Plus1dSpec, Conv2d, Conv2dSpec, Conv3d, Conv3dSpec, Dense, GlobalAvgPool, Layer,
    Padding, Residual, Sequential,
};
use crate::rng::Rng;
use crate::tensor::Scalar;

const STAGE_CHANNELS: [usize; 3] = [16, 32, 64];
const BLOCKS_PER_STAGE: usize = 3;
const KERNEL_T: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(super) enum ConvKind {
    /// 3x3 on `[B, C, H, W]`.
    Planar,
    /// 3x3x3 on `[B, C, T, H, W]`.
    Volumetric,
    /// 1x3x3, ReLU, 3x1x1 with as many intermediate channels as outputs.
    Factorized,
}

#[allow(clippy::too_many_arguments)]
fn conv<T: Scalar>(
    kind: ConvKind,
    name: &str,
    c_in: usize,
    c_out: usize,
    kernel: usize,
    stride: usize,
    side: usize,
    rng: &mut Rng,
) -> Result<Layer<T>> {
    let pad = Padding::same(side, kernel, stride);
    let pad_t = Padding::same(super::WINDOW, if kernel == 1 { 1 } else { KERNEL_T }, 1);
    Ok(match kind {
        ConvKind::Planar => {
            Conv2d::new(name, Conv2dSpec::new(c_in, c_out, kernel).stride(stride).pad_hw(pad, pad), rng)?.into()
        }
        ConvKind::Factorized if kernel > 1 => {
            let spec = Conv2Plus1dSpec::new(c_in, c_out, c_out, kernel, KERNEL_T, stride, pad, pad_t, true);
            Conv2Plus1d::new(name, spec, rng)?.into()
        }
        ConvKind::Volumetric | ConvKind::Factorized => {
            let kt = if kernel == 1 { 1 } else { KERNEL_T };
            let spec = Conv3dSpec::new(c_in, c_out, kt, kernel).stride(1, stride).pad_thw(pad_t, pad, pad);
            Conv3d::new(name, spec, rng)?.into()
        }
    })
}

pub(super) fn resnet20<T: Scalar>(kind: ConvKind, in_channels: usize, rng: &mut Rng) -> Result<Sequential<T>> {
    let relu = Some(Activation::Relu);
    let mut net = Sequential::default();
    let mut side = FRAME_SIDE;
    let stem = conv(kind, "stem", in_channels, STAGE_CHANNELS[0], 3, 1, side, rng)?;
    push_conv_bn(&mut net, "stem", stem, STAGE_CHANNELS[0], relu)?;

    let mut prev = STAGE_CHANNELS[0];
    for (s, &c) in STAGE_CHANNELS.iter().enumerate() {
        for b in 0..BLOCKS_PER_STAGE {
            let name = format!("stage{}_block{}", s + 1, b + 1);
            let stride = if s > 0 && b == 0 { 2 } else { 1 };
            let mut main = Sequential::default();
            let c1 = format!("{name}.conv1");
            let c2 = format!("{name}.conv2");
            push_conv_bn(&mut main, &c1, conv(kind, &c1, prev, c, 3, stride, side, rng)?, c, relu)?;
            let inner = side.div_ceil(stride);
            push_conv_bn(&mut main, &c2, conv(kind, &c2, c, c, 3, 1, inner, rng)?, c, None)?;
            let shortcut = if stride != 1 || prev != c {
                Some(conv(kind, &format!("{name}.shortcut"), prev, c, 1, stride, side, rng)?)
            } else {
                None
            };
            net.push(Residual::new(main, shortcut, relu));
            prev = c;
            side = inner;
        }
    }
    net.push(GlobalAvgPool);
    net.push(Dense::new("classifier", prev, NUM_CLASSES, rng)?);
    Ok(net)
}
