//! Dense 2D and 3D convolution (cross-correlation, no kernel flip).
//!
//! Both share one im2col + GEMM kernel over three spatial axes; a 2D
//! convolution is the same computation with a depth of one.

use serde::{Deserialize, Serialize};

use super::{fan_in_uniform, prefixed, Cache, Module};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{shape_str, Scalar, Tensor};

/// Zero padding on the two sides of one spatial axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Padding {
    pub before: usize,
    pub after: usize,
}

impl Padding {
    pub const NONE: Padding = Padding { before: 0, after: 0 };

    pub fn symmetric(p: usize) -> Self {
        Padding { before: p, after: p }
    }

    /// TensorFlow-style "same" padding: output extent `ceil(input / stride)`,
    /// any odd remainder goes on the trailing side.
    pub fn same(input: usize, kernel: usize, stride: usize) -> Self {
        let out = input.div_ceil(stride);
        let total = ((out - 1) * stride + kernel).saturating_sub(input);
        Padding {
            before: total / 2,
            after: total - total / 2,
        }
    }

    pub fn total(&self) -> usize {
        self.before + self.after
    }
}

/// `floor((input + pad - kernel) / stride) + 1`, or `None` if that is below 1.
pub(crate) fn out_extent(input: usize, kernel: usize, stride: usize, pad: Padding) -> Option<usize> {
    let padded = input + pad.total();
    if padded < kernel || stride == 0 {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Geometry of a convolution over (depth, height, width).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Geometry {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub pad: [Padding; 3],
}

impl Geometry {
    pub fn kernel_volume(&self) -> usize {
        self.kernel.iter().product()
    }

    pub fn out_dims(&self, input: [usize; 3]) -> Option<[usize; 3]> {
        Some([
            out_extent(input[0], self.kernel[0], self.stride[0], self.pad[0])?,
            out_extent(input[1], self.kernel[1], self.stride[1], self.pad[1])?,
            out_extent(input[2], self.kernel[2], self.stride[2], self.pad[2])?,
        ])
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == [1, 1, 1] && self.stride == [1, 1, 1] && self.pad.iter().all(|p| p.total() == 0)
    }
}

/// Range of output positions `o` for which `o * stride + k - pad` lands
/// inside `[0, input)`.
#[inline]
fn valid_range(out: usize, input: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
    // o * stride >= pad - k
    let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
    // o * stride <= input - 1 + pad - k
    let hi = if input + pad > k {
        ((input - 1 + pad - k) / stride + 1).min(out)
    } else {
        0
    };
    (lo.min(out), hi.max(lo.min(out)))
}

/// Unfolds one sample `[C, D, H, W]` into `[C*kd*kh*kw, Do*Ho*Wo]`.
fn im2col<T: Scalar>(x: &[T], g: &Geometry, in_d: [usize; 3], out_d: [usize; 3], col: &mut [T]) {
    let [kd, kh, kw] = g.kernel;
    let [sd, sh, sw] = g.stride;
    let [id, ih, iw] = in_d;
    let [od, oh, ow] = out_d;
    let plane = oh * ow;
    let positions = od * plane;
    let mut row = 0;
    for c in 0..g.c_in {
        let xc = &x[c * id * ih * iw..(c + 1) * id * ih * iw];
        for a in 0..kd {
            let (d_lo, d_hi) = valid_range(od, id, a, sd, g.pad[0].before);
            for b in 0..kh {
                let (h_lo, h_hi) = valid_range(oh, ih, b, sh, g.pad[1].before);
                for e in 0..kw {
                    let (w_lo, w_hi) = valid_range(ow, iw, e, sw, g.pad[2].before);
                    let dst = &mut col[row * positions..(row + 1) * positions];
                    dst.fill(T::zero());
                    for z in d_lo..d_hi {
                        let zi = z * sd + a - g.pad[0].before;
                        for y in h_lo..h_hi {
                            let yi = y * sh + b - g.pad[1].before;
                            let src_row = &xc[(zi * ih + yi) * iw..(zi * ih + yi + 1) * iw];
                            let dst_row = &mut dst[z * plane + y * ow..z * plane + (y + 1) * ow];
                            if sw == 1 {
                                let start = w_lo + e - g.pad[2].before;
                                dst_row[w_lo..w_hi].copy_from_slice(&src_row[start..start + (w_hi - w_lo)]);
                            } else {
                                for xo in w_lo..w_hi {
                                    dst_row[xo] = src_row[xo * sw + e - g.pad[2].before];
                                }
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters columns back, accumulating into `dx`.
fn col2im<T: Scalar>(col: &[T], g: &Geometry, in_d: [usize; 3], out_d: [usize; 3], dx: &mut [T]) {
    let [kd, kh, kw] = g.kernel;
    let [sd, sh, sw] = g.stride;
    let [id, ih, iw] = in_d;
    let [od, oh, ow] = out_d;
    let plane = oh * ow;
    let positions = od * plane;
    let mut row = 0;
    for c in 0..g.c_in {
        let xc = &mut dx[c * id * ih * iw..(c + 1) * id * ih * iw];
        for a in 0..kd {
            let (d_lo, d_hi) = valid_range(od, id, a, sd, g.pad[0].before);
            for b in 0..kh {
                let (h_lo, h_hi) = valid_range(oh, ih, b, sh, g.pad[1].before);
                for e in 0..kw {
                    let (w_lo, w_hi) = valid_range(ow, iw, e, sw, g.pad[2].before);
                    let src = &col[row * positions..(row + 1) * positions];
                    for z in d_lo..d_hi {
                        let zi = z * sd + a - g.pad[0].before;
                        for y in h_lo..h_hi {
                            let yi = y * sh + b - g.pad[1].before;
                            let dst_row = &mut xc[(zi * ih + yi) * iw..(zi * ih + yi + 1) * iw];
                            let src_row = &src[z * plane + y * ow..z * plane + (y + 1) * ow];
                            for xo in w_lo..w_hi {
                                dst_row[xo * sw + e - g.pad[2].before] += src_row[xo];
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

/// `x` is `[B, C, D, H, W]` flattened; returns `[B, O, Do, Ho, Wo]` flattened.
pub(crate) fn conv_forward<T: Scalar>(
    x: &[T],
    batch: usize,
    in_d: [usize; 3],
    g: &Geometry,
    weight: &[T],
    bias: Option<&[T]>,
) -> (Vec<T>, [usize; 3]) {
    let out_d = g.out_dims(in_d).expect("output extent validated by caller");
    let in_len = g.c_in * in_d.iter().product::<usize>();
    let positions: usize = out_d.iter().product();
    let rows = g.c_in * g.kernel_volume();
    let mut out = vec![T::zero(); batch * g.c_out * positions];
    let pointwise = g.is_pointwise();
    let mut col = if pointwise { Vec::new() } else { vec![T::zero(); rows * positions] };
    for b in 0..batch {
        let xb = &x[b * in_len..(b + 1) * in_len];
        let cols: &[T] = if pointwise {
            xb
        } else {
            im2col(xb, g, in_d, out_d, &mut col);
            &col
        };
        let ob = &mut out[b * g.c_out * positions..(b + 1) * g.c_out * positions];
        if let Some(bias) = bias {
            for (o, chunk) in ob.chunks_mut(positions).enumerate() {
                chunk.fill(bias[o]);
            }
        }
        let beta = if bias.is_some() { T::one() } else { T::zero() };
        T::gemm(
            g.c_out,
            rows,
            positions,
            T::one(),
            weight,
            rows as isize,
            1,
            cols,
            positions as isize,
            1,
            beta,
            ob,
            positions as isize,
            1,
        );
    }
    (out, out_d)
}

/// Returns dx and accumulates into `dw` (and `db` when present).
pub(crate) fn conv_backward<T: Scalar>(
    x: &[T],
    batch: usize,
    in_d: [usize; 3],
    g: &Geometry,
    weight: &[T],
    grad_out: &[T],
    dw: &mut [T],
    db: Option<&mut [T]>,
) -> Vec<T> {
    let out_d = g.out_dims(in_d).expect("output extent validated by caller");
    let in_len = g.c_in * in_d.iter().product::<usize>();
    let positions: usize = out_d.iter().product();
    let rows = g.c_in * g.kernel_volume();
    let mut dx = vec![T::zero(); batch * in_len];
    let pointwise = g.is_pointwise();
    let mut col = if pointwise { Vec::new() } else { vec![T::zero(); rows * positions] };
    let mut dcol = vec![T::zero(); rows * positions];
    let mut db = db;
    for b in 0..batch {
        let xb = &x[b * in_len..(b + 1) * in_len];
        let gb = &grad_out[b * g.c_out * positions..(b + 1) * g.c_out * positions];
        if let Some(db) = db.as_deref_mut() {
            for (o, chunk) in gb.chunks(positions).enumerate() {
                db[o] += chunk.iter().copied().sum::<T>();
            }
        }
        let cols: &[T] = if pointwise {
            xb
        } else {
            im2col(xb, g, in_d, out_d, &mut col);
            &col
        };
        // dW += dY [O, P] * cols^T [P, R]
        T::gemm(
            g.c_out,
            positions,
            rows,
            T::one(),
            gb,
            positions as isize,
            1,
            cols,
            1,
            positions as isize,
            T::one(),
            dw,
            rows as isize,
            1,
        );
        // dcol = W^T [R, O] * dY [O, P]
        let dxb = &mut dx[b * in_len..(b + 1) * in_len];
        if pointwise {
            T::gemm(
                rows,
                g.c_out,
                positions,
                T::one(),
                weight,
                1,
                rows as isize,
                gb,
                positions as isize,
                1,
                T::zero(),
                dxb,
                positions as isize,
                1,
            );
        } else {
            T::gemm(
                rows,
                g.c_out,
                positions,
                T::one(),
                weight,
                1,
                rows as isize,
                gb,
                positions as isize,
                1,
                T::zero(),
                &mut dcol,
                positions as isize,
                1,
            );
            col2im(&dcol, g, in_d, out_d, dxb);
        }
    }
    dx
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conv2dSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub pad_h: Padding,
    pub pad_w: Padding,
    pub has_bias: bool,
}

impl Conv2dSpec {
    /// Square kernel, stride 1, no padding, with bias.
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Conv2dSpec {
            in_channels,
            out_channels,
            kernel_h: kernel,
            kernel_w: kernel,
            stride: 1,
            pad_h: Padding::NONE,
            pad_w: Padding::NONE,
            has_bias: true,
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

    pub fn pad_hw(mut self, pad_h: Padding, pad_w: Padding) -> Self {
        self.pad_h = pad_h;
        self.pad_w = pad_w;
        self
    }

    /// "Same" padding for an input of `input_h x input_w`.
    pub fn same_for(self, input_h: usize, input_w: usize) -> Self {
        let (kh, kw, s) = (self.kernel_h, self.kernel_w, self.stride);
        self.pad_hw(Padding::same(input_h, kh, s), Padding::same(input_w, kw, s))
    }

    pub fn bias(mut self, has_bias: bool) -> Self {
        self.has_bias = has_bias;
        self
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        Some((
            out_extent(h, self.kernel_h, self.stride, self.pad_h)?,
            out_extent(w, self.kernel_w, self.stride, self.pad_w)?,
        ))
    }

    pub fn param_count(&self) -> usize {
        self.in_channels * self.out_channels * self.kernel_h * self.kernel_w
            + if self.has_bias { self.out_channels } else { 0 }
    }

    pub(crate) fn geometry(&self) -> Geometry {
        Geometry {
            c_in: self.in_channels,
            c_out: self.out_channels,
            kernel: [1, self.kernel_h, self.kernel_w],
            stride: [1, self.stride, self.stride],
            pad: [Padding::NONE, self.pad_h, self.pad_w],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.kernel_h == 0 || self.kernel_w == 0 || self.stride == 0 {
            return Err(Error::InvalidArgument(format!("conv2d extents must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// 2D convolution over `[B, C, H, W]`. Weights are `[O, C, kh, kw]`.
#[derive(Clone, Debug)]
pub struct Conv2d<T: Scalar = f32> {
    pub name: String,
    pub spec: Conv2dSpec,
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(name: impl Into<String>, spec: Conv2dSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let fan_in = spec.in_channels * spec.kernel_h * spec.kernel_w;
        let weight = fan_in_uniform(
            &[spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w],
            fan_in,
            rng,
        );
        let bias = spec.has_bias.then(|| Tensor::zeros(&[spec.out_channels]));
        Ok(Conv2d {
            name: name.into(),
            spec,
            weight,
            bias,
        })
    }

    fn input_dims(&self, x: &Tensor<T>) -> Result<(usize, [usize; 3])> {
        let s = x.shape();
        if s.len() != 4 || s[1] != self.spec.in_channels {
            return Err(Error::dim(
                "conv2d",
                format!("[B x {} x H x W]", self.spec.in_channels),
                shape_str(s),
            ));
        }
        let in_d = [1, s[2], s[3]];
        if self.spec.geometry().out_dims(in_d).is_none() {
            return Err(Error::dim("conv2d", "input at least as large as the kernel", shape_str(s)));
        }
        Ok((s[0], in_d))
    }
}

impl<T: Scalar> Module<T> for Conv2d<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (batch, in_d) = self.input_dims(x)?;
        let g = self.spec.geometry();
        let (out, od) = conv_forward(
            x.data(),
            batch,
            in_d,
            &g,
            self.weight.data(),
            self.bias.as_ref().map(|b| b.data()),
        );
        Tensor::new(vec![batch, g.c_out, od[1], od[2]], out)
    }

    fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, Cache<T>)> {
        let y = self.forward(x)?;
        Ok((y, Cache::with_tensors(vec![x.clone()])))
    }

    fn backward(&self, cache: &Cache<T>, grad_out: &Tensor<T>, grads: &mut [Tensor<T>]) -> Result<Tensor<T>> {
        let x = &cache.tensors[0];
        let (batch, in_d) = self.input_dims(x)?;
        let g = self.spec.geometry();
        let (dw, rest) = grads.split_at_mut(1);
        let db = rest.first_mut().map(|t| t.data_mut());
        let dx = conv_backward(x.data(), batch, in_d, &g, self.weight.data(), grad_out.data(), dw[0].data_mut(), db);
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
pub struct Conv3dSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_t: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride_t: usize,
    pub stride: usize,
    pub pad_t: Padding,
    pub pad_h: Padding,
    pub pad_w: Padding,
    pub has_bias: bool,
}

impl Conv3dSpec {
    /// `kt x k x k` kernel, unit strides, no padding, with bias.
    pub fn new(in_channels: usize, out_channels: usize, kernel_t: usize, kernel: usize) -> Self {
        Conv3dSpec {
            in_channels,
            out_channels,
            kernel_t,
            kernel_h: kernel,
            kernel_w: kernel,
            stride_t: 1,
            stride: 1,
            pad_t: Padding::NONE,
            pad_h: Padding::NONE,
            pad_w: Padding::NONE,
            has_bias: true,
        }
    }

    pub fn stride(mut self, stride_t: usize, stride: usize) -> Self {
        self.stride_t = stride_t;
        self.stride = stride;
        self
    }

    pub fn pad(mut self, pad_t: usize, pad: usize) -> Self {
        self.pad_t = Padding::symmetric(pad_t);
        self.pad_h = Padding::symmetric(pad);
        self.pad_w = Padding::symmetric(pad);
        self
    }

    pub fn pad_thw(mut self, pad_t: Padding, pad_h: Padding, pad_w: Padding) -> Self {
        self.pad_t = pad_t;
        self.pad_h = pad_h;
        self.pad_w = pad_w;
        self
    }

    /// "Same" padding on every axis for an input of `t x h x w`.
    pub fn same_for(self, t: usize, h: usize, w: usize) -> Self {
        let (kt, kh, kw) = (self.kernel_t, self.kernel_h, self.kernel_w);
        let (st, s) = (self.stride_t, self.stride);
        self.pad_thw(Padding::same(t, kt, st), Padding::same(h, kh, s), Padding::same(w, kw, s))
    }

    pub fn bias(mut self, has_bias: bool) -> Self {
        self.has_bias = has_bias;
        self
    }

    pub fn output_thw(&self, t: usize, h: usize, w: usize) -> Option<[usize; 3]> {
        self.geometry().out_dims([t, h, w])
    }

    pub fn param_count(&self) -> usize {
        self.in_channels * self.out_channels * self.kernel_t * self.kernel_h * self.kernel_w
            + if self.has_bias { self.out_channels } else { 0 }
    }

    pub(crate) fn geometry(&self) -> Geometry {
        Geometry {
            c_in: self.in_channels,
            c_out: self.out_channels,
            kernel: [self.kernel_t, self.kernel_h, self.kernel_w],
            stride: [self.stride_t, self.stride, self.stride],
            pad: [self.pad_t, self.pad_h, self.pad_w],
        }
    }

    fn validate(&self) -> Result<()> {
        let extents = [
            self.in_channels,
            self.out_channels,
            self.kernel_t,
            self.kernel_h,
            self.kernel_w,
            self.stride_t,
            self.stride,
        ];
        if extents.contains(&0) {
            return Err(Error::InvalidArgument(format!("conv3d extents must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// 3D convolution over `[B, C, T, H, W]`. Weights are `[O, C, kt, kh, kw]`.
#[derive(Clone, Debug)]
pub struct Conv3d<T: Scalar = f32> {
    pub name: String,
    pub spec: Conv3dSpec,
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
}

impl<T: Scalar> Conv3d<T> {
    pub fn new(name: impl Into<String>, spec: Conv3dSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let fan_in = spec.in_channels * spec.kernel_t * spec.kernel_h * spec.kernel_w;
        let weight = fan_in_uniform(
            &[
                spec.out_channels,
                spec.in_channels,
                spec.kernel_t,
                spec.kernel_h,
                spec.kernel_w,
            ],
            fan_in,
            rng,
        );
        let bias = spec.has_bias.then(|| Tensor::zeros(&[spec.out_channels]));
        Ok(Conv3d {
            name: name.into(),
            spec,
            weight,
            bias,
        })
    }

    fn input_dims(&self, x: &Tensor<T>) -> Result<(usize, [usize; 3])> {
        let s = x.shape();
        if s.len() != 5 || s[1] != self.spec.in_channels {
            return Err(Error::dim(
                "conv3d",
                format!("[B x {} x T x H x W]", self.spec.in_channels),
                shape_str(s),
            ));
        }
        let in_d = [s[2], s[3], s[4]];
        if self.spec.geometry().out_dims(in_d).is_none() {
            return Err(Error::dim("conv3d", "input at least as large as the kernel", shape_str(s)));
        }
        Ok((s[0], in_d))
    }
}

impl<T: Scalar> Module<T> for Conv3d<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (batch, in_d) = self.input_dims(x)?;
        let g = self.spec.geometry();
        let (out, od) = conv_forward(
            x.data(),
            batch,
            in_d,
            &g,
            self.weight.data(),
            self.bias.as_ref().map(|b| b.data()),
        );
        Tensor::new(vec![batch, g.c_out, od[0], od[1], od[2]], out)
    }

    fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, Cache<T>)> {
        let y = self.forward(x)?;
        Ok((y, Cache::with_tensors(vec![x.clone()])))
    }

    fn backward(&self, cache: &Cache<T>, grad_out: &Tensor<T>, grads: &mut [Tensor<T>]) -> Result<Tensor<T>> {
        let x = &cache.tensors[0];
        let (batch, in_d) = self.input_dims(x)?;
        let g = self.spec.geometry();
        let (dw, rest) = grads.split_at_mut(1);
        let db = rest.first_mut().map(|t| t.data_mut());
        let dx = conv_backward(x.data(), batch, in_d, &g, self.weight.data(), grad_out.data(), dw[0].data_mut(), db);
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ones_3x3_gives_nine() {
        let mut rng = Rng::new(0);
        let mut conv = Conv2d::<f32>::new("c", Conv2dSpec::new(1, 1, 3).bias(false), &mut rng).unwrap();
        conv.weight = Tensor::ones(&[1, 1, 3, 3]);
        let y = conv.forward(&Tensor::ones(&[1, 1, 3, 3])).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[9.0]);
    }

    #[test]
    fn zero_input_yields_bias() {
        let mut rng = Rng::new(1);
        let mut conv = Conv2d::<f32>::new("c", Conv2dSpec::new(2, 3, 3).pad(1), &mut rng).unwrap();
        conv.bias = Some(Tensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap());
        let y = conv.forward(&Tensor::zeros(&[2, 2, 5, 5])).unwrap();
        for (o, chunk) in y.data().chunks(25).enumerate() {
            let expect = [0.5, -1.0, 2.0][o % 3];
            assert!(chunk.iter().all(|&v| v == expect));
        }
    }

    #[test]
    fn all_ones_3x3x3_gives_twenty_seven() {
        let mut rng = Rng::new(0);
        let mut conv = Conv3d::<f32>::new("c", Conv3dSpec::new(1, 1, 3, 3).bias(false), &mut rng).unwrap();
        conv.weight = Tensor::ones(&[1, 1, 3, 3, 3]);
        let y = conv.forward(&Tensor::ones(&[1, 1, 3, 3, 3])).unwrap();
        assert_eq!(y.data(), &[27.0]);
    }

    #[test]
    fn channel_mismatch_is_dimension_error() {
        let mut rng = Rng::new(0);
        let conv = Conv2d::<f32>::new("c", Conv2dSpec::new(5, 8, 3), &mut rng).unwrap();
        let err = conv.forward(&Tensor::zeros(&[1, 1, 48, 48])).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }), "{err}");
    }

    #[test]
    fn same_padding_matches_tf_rule() {
        assert_eq!(Padding::same(44, 3, 2), Padding { before: 0, after: 1 });
        assert_eq!(Padding::same(11, 3, 2), Padding { before: 1, after: 1 });
        assert_eq!(Padding::same(48, 3, 1), Padding::symmetric(1));
        assert_eq!(Padding::same(44, 1, 2), Padding::NONE);
    }

    #[test]
    fn valid_range_covers_exactly_in_bounds_taps() {
        for input in 1..9 {
            for k in 0..3 {
                for stride in 1..4 {
                    for pad in 0..3 {
                        let out = 12;
                        let (lo, hi) = valid_range(out, input, k, stride, pad);
                        for o in 0..out {
                            let pos = (o * stride + k) as isize - pad as isize;
                            let inside = pos >= 0 && (pos as usize) < input;
                            assert_eq!(inside, (lo..hi).contains(&o), "in={input} k={k} s={stride} p={pad} o={o}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn param_counts() {
        assert_eq!(Conv2dSpec::new(5, 8, 3).bias(false).param_count(), 360);
        assert_eq!(Conv3dSpec::new(1, 16, 3, 3).param_count(), 448);
    }
}
