//! Compact Xception-style classifier for 48x48 faces.
//!
//! Two valid 3x3 convolutions with 8 filters, four residual modules of
//! separable convolutions (16, 32, 64, 128 channels) that each halve the
//! resolution, then a 3x3 convolution to the class logits and global
//! average pooling. Only the final convolution carries a bias.
//!
//! | block   | weights | bias | gamma+beta | running stats |
//! |---------|--------:|-----:|-----------:|--------------:|
//! | conv1   | 9·c·8   |      | 16         | 16            |
//! | conv2   | 576     |      | 16         | 16            |
//! | module1 | 728     |      | 96         | 96            |
//! | module2 | 2480    |      | 192        | 192           |
//! | module3 | 9056    |      | 384        | 384           |
//! | module4 | 34496   |      | 768        | 768           |
//! | head    | 8064    | 7    |            |               |

use super::{push_conv_bn, FRAME_SIDE, NUM_CLASSES};
use crate::error::Result;
use crate::layers::{
    Activation, BatchNorm, BatchNormSpec, Conv2d, Conv2dSpec, GlobalAvgPool, MaxPool2d, Residual, SeparableConv2d,
    SeparableSpec, Sequential,
};
use crate::rng::Rng;
use crate::tensor::Scalar;

pub(super) const STEM_FILTERS: usize = 8;
const MODULE_CHANNELS: [usize; 4] = [16, 32, 64, 128];

pub(super) fn mini_xception<T: Scalar>(in_channels: usize, rng: &mut Rng) -> Result<Sequential<T>> {
    let relu = Some(Activation::Relu);
    let mut net = Sequential::default();
    let conv1 = Conv2dSpec::new(in_channels, STEM_FILTERS, 3).bias(false);
    push_conv_bn(&mut net, "conv1", Conv2d::new("conv1", conv1, rng)?, STEM_FILTERS, relu)?;
    let conv2 = Conv2dSpec::new(STEM_FILTERS, STEM_FILTERS, 3).bias(false);
    push_conv_bn(&mut net, "conv2", Conv2d::new("conv2", conv2, rng)?, STEM_FILTERS, relu)?;

    let mut side = FRAME_SIDE - 4;
    let mut prev = STEM_FILTERS;
    for (i, &c) in MODULE_CHANNELS.iter().enumerate() {
        let name = format!("module{}", i + 1);
        net.push(module(&name, prev, c, side, rng)?);
        prev = c;
        side = side.div_ceil(2);
    }

    net.push(Conv2d::new("head", Conv2dSpec::new(prev, NUM_CLASSES, 3).pad(1), rng)?);
    net.push(GlobalAvgPool);
    Ok(net)
}

fn module<T: Scalar>(name: &str, c_in: usize, c_out: usize, side: usize, rng: &mut Rng) -> Result<Residual<T>> {
    let shortcut_name = format!("{name}.shortcut");
    let mut shortcut = Sequential::default();
    shortcut.push(Conv2d::new(
        &shortcut_name,
        Conv2dSpec::new(c_in, c_out, 1).stride(2).same_for(side, side).bias(false),
        rng,
    )?);
    shortcut.push(BatchNorm::new(format!("{shortcut_name}_bn"), BatchNormSpec::new(c_out))?);

    let mut main = Sequential::default();
    let sep1 = format!("{name}.sep1");
    let sep2 = format!("{name}.sep2");
    push_conv_bn(
        &mut main,
        &sep1,
        SeparableConv2d::new(&sep1, SeparableSpec::new(c_in, c_out, 3).pad(1), rng)?,
        c_out,
        Some(Activation::Relu),
    )?;
    push_conv_bn(
        &mut main,
        &sep2,
        SeparableConv2d::new(&sep2, SeparableSpec::new(c_out, c_out, 3).pad(1), rng)?,
        c_out,
        None,
    )?;
    main.push(MaxPool2d::new(3, 2).same_for(side, side));
    Ok(Residual::new(main, Some(shortcut.into()), None))
}
