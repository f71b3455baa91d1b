//! Depthwise and depthwise-separable 2D convolution.

use serde::{Deserialize, Serialize};

use super::conv::out_extent;
use super::{fan_in_uniform, prefixed, Cache, Conv2d, Conv2dSpec, Module, Padding};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{shape_str, Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthwiseSpec {
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad_h: Padding,
    pub pad_w: Padding,
    pub has_bias: bool,
}

impl DepthwiseSpec {
    pub fn new(channels: usize, kernel: usize) -> Self {
        DepthwiseSpec {
            channels,
            kernel,
            stride: 1,
            pad_h: Padding::NONE,
            pad_w: Padding::NONE,
            has_bias: false,
        }
    }

    pub fn stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn pad(mut self, pad: usize) -> Self {
        self.pad_h = Padding::symmetric(pad);
        self.pad_w = Padding::symmetric(pad);
        self
    }

    pub fn same_for(mut self, h: usize, w: usize) -> Self {
        self.pad_h = Padding::same(h, self.kernel, self.stride);
        self.pad_w = Padding::same(w, self.kernel, self.stride);
        self
    }

    pub fn bias(mut self, has_bias: bool) -> Self {
        self.has_bias = has_bias;
        self
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        Some((
            out_extent(h, self.kernel, self.stride, self.pad_h)?,
            out_extent(w, self.kernel, self.stride, self.pad_w)?,
        ))
    }

    pub fn param_count(&self) -> usize {
        self.channels * self.kernel * self.kernel + if self.has_bias { self.channels } else { 0 }
    }
}

/// One `k x k` filter per input channel (depth multiplier 1).
/// Weights are `[C, 1, k, k]`.
#[derive(Clone, Debug)]
pub struct DepthwiseConv2d<T: Scalar = f32> {
    pub name: String,
    pub spec: DepthwiseSpec,
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
}

impl<T: Scalar> DepthwiseConv2d<T> {
    pub fn new(name: impl Into<String>, spec: DepthwiseSpec, rng: &mut Rng) -> Result<Self> {
        if spec.channels == 0 || spec.kernel == 0 || spec.stride == 0 {
            return Err(Error::InvalidArgument(format!("depthwise extents must be positive: {spec:?}")));
        }
        let k = spec.kernel;
        Ok(DepthwiseConv2d {
            name: name.into(),
            spec,
            weight: fan_in_uniform(&[spec.channels, 1, k, k], k * k, rng),
            bias: spec.has_bias.then(|| Tensor::zeros(&[spec.channels])),
        })
    }

    fn dims(&self, x: &Tensor<T>) -> Result<(usize, usize, usize, usize, usize)> {
        let s = x.shape();
        if s.len() != 4 || s[1] != self.spec.channels {
            return Err(Error::dim(
                "depthwise_conv2d",
                format!("[B x {} x H x W]", self.spec.channels),
                shape_str(s),
            ));
        }
        let (oh, ow) = self
            .spec
            .output_hw(s[2], s[3])
            .ok_or_else(|| Error::dim("depthwise_conv2d", "input at least as large as the kernel", shape_str(s)))?;
        Ok((s[0], s[2], s[3], oh, ow))
    }

    /// Calls `f(out_index, in_index, weight_index)` for every in-bounds tap.
    #[inline]
    fn for_each_tap(&self, h: usize, w: usize, oh: usize, ow: usize, mut f: impl FnMut(usize, usize, usize)) {
        let k = self.spec.kernel;
        let s = self.spec.stride;
        let (pt, pl) = (self.spec.pad_h.before as isize, self.spec.pad_w.before as isize);
        for y in 0..oh {
            for x in 0..ow {
                let o = y * ow + x;
                for a in 0..k {
                    let iy = (y * s + a) as isize - pt;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for b in 0..k {
                        let ix = (x * s + b) as isize - pl;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        f(o, iy as usize * w + ix as usize, a * k + b);
                    }
                }
            }
        }
    }
}

impl<T: Scalar> Module<T> for DepthwiseConv2d<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (batch, h, w, oh, ow) = self.dims(x)?;
        let c = self.spec.channels;
        let kk = self.spec.kernel * self.spec.kernel;
        let mut out = vec![T::zero(); batch * c * oh * ow];
        let xd = x.data();
        let wd = self.weight.data();
        for b in 0..batch {
            for ch in 0..c {
                let xin = &xd[(b * c + ch) * h * w..(b * c + ch + 1) * h * w];
                let kernel = &wd[ch * kk..(ch + 1) * kk];
                let dst = &mut out[(b * c + ch) * oh * ow..(b * c + ch + 1) * oh * ow];
                if let Some(bias) = &self.bias {
                    dst.fill(bias.data()[ch]);
                }
                self.for_each_tap(h, w, oh, ow, |o, i, k| dst[o] += xin[i] * kernel[k]);
            }
        }
        Tensor::new(vec![batch, c, oh, ow], out)
    }

    fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, Cache<T>)> {
        let y = self.forward(x)?;
        Ok((y, Cache::with_tensors(vec![x.clone()])))
    }

    fn backward(&self, cache: &Cache<T>, grad_out: &Tensor<T>, grads: &mut [Tensor<T>]) -> Result<Tensor<T>> {
        let x = &cache.tensors[0];
        let (batch, h, w, oh, ow) = self.dims(x)?;
        let c = self.spec.channels;
        let kk = self.spec.kernel * self.spec.kernel;
        let xd = x.data();
        let gd = grad_out.data();
        let wd = self.weight.data();
        let mut dx = vec![T::zero(); xd.len()];
        let (dw, rest) = grads.split_at_mut(1);
        let dw = dw[0].data_mut();
        let mut db = rest.first_mut().map(|t| t.data_mut());
        for b in 0..batch {
            for ch in 0..c {
                let plane_in = (b * c + ch) * h * w;
                let plane_out = (b * c + ch) * oh * ow;
                let xin = &xd[plane_in..plane_in + h * w];
                let g = &gd[plane_out..plane_out + oh * ow];
                let kernel = &wd[ch * kk..(ch + 1) * kk];
                let dkernel = &mut dw[ch * kk..(ch + 1) * kk];
                let dxin = &mut dx[plane_in..plane_in + h * w];
                self.for_each_tap(h, w, oh, ow, |o, i, k| {
                    dkernel[k] += g[o] * xin[i];
                    dxin[i] += g[o] * kernel[k];
                });
                if let Some(db) = db.as_deref_mut() {
                    db[ch] += g.iter().copied().sum::<T>();
                }
            }
        }
        Tensor::new(x.shape().to_vec(), dx)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        std::iter::once(&self.weight).chain(self.bias.as_ref()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        std::iter::once(&mut self.weight).chain(self.bias.as_mut()).collect()
    }

    fn param_names(&self) -> Vec<String> {
        let mut names = vec![prefixed(&self.name, "weight")];
        if self.bias.is_some() {
            names.push(prefixed(&self.name, "bias"));
        }
        names
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparableSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad_h: Padding,
    pub pad_w: Padding,
    /// Bias on the pointwise stage; the depthwise stage never has one.
    pub has_bias: bool,
}

impl SeparableSpec {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        SeparableSpec {
            in_channels,
            out_channels,
            kernel,
            stride: 1,
            pad_h: Padding::NONE,
            pad_w: Padding::NONE,
            has_bias: false,
        }
    }

    pub fn pad(mut self, pad: usize) -> Self {
        self.pad_h = Padding::symmetric(pad);
        self.pad_w = Padding::symmetric(pad);
        self
    }

    pub fn bias(mut self, has_bias: bool) -> Self {
        self.has_bias = has_bias;
        self
    }

    pub fn depthwise(&self) -> DepthwiseSpec {
        DepthwiseSpec {
            channels: self.in_channels,
            kernel: self.kernel,
            stride: self.stride,
            pad_h: self.pad_h,
            pad_w: self.pad_w,
            has_bias: false,
        }
    }

    pub fn pointwise(&self) -> Conv2dSpec {
        Conv2dSpec::new(self.in_channels, self.out_channels, 1).bias(self.has_bias)
    }

    pub fn param_count(&self) -> usize {
        self.depthwise().param_count() + self.pointwise().param_count()
    }
}

/// Depthwise `k x k` followed by pointwise `1 x 1`, no activation between.
#[derive(Clone, Debug)]
pub struct SeparableConv2d<T: Scalar = f32> {
    pub name: String,
    pub depthwise: DepthwiseConv2d<T>,
    pub pointwise: Conv2d<T>,
}

impl<T: Scalar> SeparableConv2d<T> {
    pub fn new(name: impl Into<String>, spec: SeparableSpec, rng: &mut Rng) -> Result<Self> {
        let name = name.into();
        let depthwise = DepthwiseConv2d::new(prefixed(&name, "depthwise"), spec.depthwise(), rng)?;
        let pointwise = Conv2d::new(prefixed(&name, "pointwise"), spec.pointwise(), rng)?;
        Ok(SeparableConv2d {
            name,
            depthwise,
            pointwise,
        })
    }
}

impl<T: Scalar> Module<T> for SeparableConv2d<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.pointwise.forward(&self.depthwise.forward(x)?)
    }

    fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, Cache<T>)> {
        let (h, c1) = self.depthwise.forward_train(x)?;
        let (y, c2) = self.pointwise.forward_train(&h)?;
        Ok((
            y,
            Cache {
                children: vec![c1, c2],
                ..Cache::default()
            },
        ))
    }

    fn backward(&self, cache: &Cache<T>, grad_out: &Tensor<T>, grads: &mut [Tensor<T>]) -> Result<Tensor<T>> {
        let n_dw = self.depthwise.params().len();
        let (g_dw, g_pw) = grads.split_at_mut(n_dw);
        let gh = self.pointwise.backward(&cache.children[1], grad_out, g_pw)?;
        self.depthwise.backward(&cache.children[0], &gh, g_dw)
    }

    fn params(&self) -> Vec<&Tensor<T>> {
        let mut p = self.depthwise.params();
        p.extend(self.pointwise.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p = self.depthwise.params_mut();
        p.extend(self.pointwise.params_mut());
        p
    }

    fn param_names(&self) -> Vec<String> {
        let mut p = self.depthwise.param_names();
        p.extend(self.pointwise.param_names());
        p
    }
}
