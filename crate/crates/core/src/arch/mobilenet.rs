//! MobileNetV2 at width multiplier 1.0.
//!
//! The stem runs at stride 1 instead of 2 so a 48x48 input still leaves a
//! 3x3 map before the final 1x1 expansion to 1280 channels. No convolution
//! carries a bias; the dense head does.

use super::{push_conv_bn, NUM_CLASSES, FRAME_SIDE};
use crate::error::Result;
use crate::layers::{
    Activation, Conv2d, Conv2dSpec, Dense, DepthwiseConv2d, DepthwiseSpec, GlobalAvgPool, Layer, Residual, Sequential,
};
use crate::rng::Rng;
use crate::tensor::Scalar;

const STEM_CHANNELS: usize = 32;
const HEAD_CHANNELS: usize = 1280;

/// (expansion, output channels, repeats, first stride)
const STAGES: [(usize, usize, usize, usize); 7] = [
    (1, 16, 1, 1),
    (6, 24, 2, 2),
    (6, 32, 3, 2),
    (6, 64, 4, 2),
    (6, 96, 3, 1),
    (6, 160, 3, 2),
    (6, 320, 1, 1),
];

pub(super) fn mobilenet_v2<T: Scalar>(in_channels: usize, rng: &mut Rng) -> Result<Sequential<T>> {
    let relu6 = Some(Activation::Relu6);
    let mut side = FRAME_SIDE;
    let mut net = Sequential::default();
    let stem = Conv2dSpec::new(in_channels, STEM_CHANNELS, 3).same_for(side, side).bias(false);
    push_conv_bn(&mut net, "stem", Conv2d::new("stem", stem, rng)?, STEM_CHANNELS, relu6)?;

    let mut prev = STEM_CHANNELS;
    let mut id = 0;
    for &(expansion, c_out, repeats, first_stride) in &STAGES {
        for r in 0..repeats {
            let stride = if r == 0 { first_stride } else { 1 };
            net.push(inverted_residual(&format!("block{id}"), prev, c_out, expansion, stride, side, rng)?);
            side = side.div_ceil(stride);
            prev = c_out;
            id += 1;
        }
    }

    let head = Conv2dSpec::new(prev, HEAD_CHANNELS, 1).bias(false);
    push_conv_bn(&mut net, "head", Conv2d::new("head", head, rng)?, HEAD_CHANNELS, relu6)?;
    net.push(GlobalAvgPool);
    net.push(Dense::new("classifier", HEAD_CHANNELS, NUM_CLASSES, rng)?);
    Ok(net)
}

fn inverted_residual<T: Scalar>(
    name: &str,
    c_in: usize,
    c_out: usize,
    expansion: usize,
    stride: usize,
    side: usize,
    rng: &mut Rng,
) -> Result<Layer<T>> {
    let relu6 = Some(Activation::Relu6);
    let hidden = c_in * expansion;
    let mut seq = Sequential::default();
    if expansion != 1 {
        let n = format!("{name}.expand");
        let spec = Conv2dSpec::new(c_in, hidden, 1).bias(false);
        push_conv_bn(&mut seq, &n, Conv2d::new(&n, spec, rng)?, hidden, relu6)?;
    }
    let n = format!("{name}.depthwise");
    let spec = DepthwiseSpec::new(hidden, 3).stride(stride).same_for(side, side);
    push_conv_bn(&mut seq, &n, DepthwiseConv2d::new(&n, spec, rng)?, hidden, relu6)?;
    let n = format!("{name}.project");
    let spec = Conv2dSpec::new(hidden, c_out, 1).bias(false);
    push_conv_bn(&mut seq, &n, Conv2d::new(&n, spec, rng)?, c_out, None)?;

    Ok(if stride == 1 && c_in == c_out {
        Residual::new(seq, None, None).into()
    } else {
        seq.into()
    })
}
