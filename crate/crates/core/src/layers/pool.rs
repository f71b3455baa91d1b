use serde::{Deserialize, Serialize};

use super::conv::out_extent;
use super::{Cache, Module, Padding};
use crate::error::{Error, Result};
use crate::tensor::{shape_str, Scalar, Tensor};

/// Max pooling over `[B, C, H, W]`. Padded taps never win.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxPool2d {
    pub kernel: usize,
    pub stride: usize,
    pub pad_h: Padding,
    pub pad_w: Padding,
}

impl MaxPool2d {
    pub fn new(kernel: usize, stride: usize) -> Self {
        MaxPool2d {
            kernel,
            stride,
            pad_h: Padding::NONE,
            pad_w: Padding::NONE,
        }
    }

    pub fn same_for(mut self, h: usize, w: usize) -> Self {
        self.pad_h = Padding::same(h, self.kernel, self.stride);
        self.pad_w = Padding::same(w, self.kernel, self.stride);
        self
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        Some((
            out_extent(h, self.kernel, self.stride, self.pad_h)?,
            out_extent(w, self.kernel, self.stride, self.pad_w)?,
        ))
    }

    /// Output tensor and, per output element, the flat input index of the
    /// winning tap (first maximum in scan order).
    fn run<T: Scalar>(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
        let s = x.shape();
        if s.len() != 4 {
            return Err(Error::dim("maxpool2d", "[B x C x H x W]", shape_str(s)));
        }
        let (planes, h, w) = (s[0] * s[1], s[2], s[3]);
        let (oh, ow) = self
            .output_hw(h, w)
            .ok_or_else(|| Error::dim("maxpool2d", "input at least as large as the window", shape_str(s)))?;
        let (pt, pl) = (self.pad_h.before as isize, self.pad_w.before as isize);
        let mut out = Vec::with_capacity(planes * oh * ow);
        let mut argmax = Vec::with_capacity(planes * oh * ow);
        let xd = x.data();
        for p in 0..planes {
            let base = p * h * w;
            for y in 0..oh {
                for xo in 0..ow {
                    let mut best: Option<(T, usize)> = None;
                    for a in 0..self.kernel {
                        let iy = (y * self.stride + a) as isize - pt;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for b in 0..self.kernel {
                            let ix = (xo * self.stride + b) as isize - pl;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let idx = base + iy as usize * w + ix as usize;
                            if best.is_none_or(|(v, _)| xd[idx] > v) {
                                best = Some((xd[idx], idx));
                            }
                        }
                    }
                    let (v, idx) = best.ok_or_else(|| {
                        Error::InvalidArgument(format!("maxpool window at ({y},{xo}) covers only padding"))
                    })?;
                    out.push(v);
                    argmax.push(idx);
                }
            }
        }
        Ok((Tensor::new(vec![s[0], s[1], oh, ow], out)?, argmax))
    }
}

impl<T: Scalar> Module<T> for MaxPool2d {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.run(x)?.0)
    }

    fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, Cache<T>)> {
        let (y, argmax) = self.run(x)?;
        let mut cache = Cache::with_shape(x.shape());
        cache.indices = argmax;
        Ok((y, cache))
    }

    fn backward(&self, cache: &Cache<T>, grad_out: &Tensor<T>, _grads: &mut [Tensor<T>]) -> Result<Tensor<T>> {
        let argmax = &cache.indices;
        if argmax.len() != grad_out.numel() {
            return Err(Error::dim(
                "maxpool2d_backward",
                format!("{} gradient elements", argmax.len()),
                shape_str(grad_out.shape()),
            ));
        }
        let mut dx = Tensor::zeros(&cache.shape);
        for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
            dx.data_mut()[idx] += g;
        }
        Ok(dx)
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

/// Mean over every axis after the channel axis: `[B, C, ...] -> [B, C]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalAvgPool;

impl<T: Scalar> Module<T> for GlobalAvgPool {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let s = x.shape();
        if s.len() < 3 {
            return Err(Error::dim("global_avg_pool", "[B x C x spatial...]", shape_str(s)));
        }
        let inner: usize = s[2..].iter().product();
        let inv = T::one() / T::from_usize(inner).unwrap();
        let data = x
            .data()
            .chunks(inner)
            .map(|plane| plane.iter().copied().sum::<T>() * inv)
            .collect();
        Tensor::new(vec![s[0], s[1]], data)
    }

    fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, Cache<T>)> {
        let y = Module::<T>::forward(self, x)?;
        Ok((y, Cache::with_shape(x.shape())))
    }

    fn backward(&self, cache: &Cache<T>, grad_out: &Tensor<T>, _grads: &mut [Tensor<T>]) -> Result<Tensor<T>> {
        let shape = cache.shape.clone();
        let inner: usize = shape[2..].iter().product();
        let inv = T::one() / T::from_usize(inner).unwrap();
        let mut data = Vec::with_capacity(shape.iter().product());
        for &g in grad_out.data() {
            data.extend(std::iter::repeat_n(g * inv, inner));
        }
        Tensor::new(shape, data)
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_of_constant_map() {
        let x = Tensor::<f32>::full(&[2, 3, 4, 4], 1.75);
        let y = Module::<f32>::forward(&GlobalAvgPool, &x).unwrap();
        assert_eq!(y.shape(), &[2, 3]);
        assert!(y.data().iter().all(|&v| v == 1.75));
    }

    #[test]
    fn gap_of_small_map() {
        let x = Tensor::<f32>::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(Module::<f32>::forward(&GlobalAvgPool, &x).unwrap().data(), &[2.5]);
    }

    #[test]
    fn maxpool_same_padding_shapes_and_routing() {
        let mut pool = MaxPool2d::new(3, 2).same_for(5, 5);
        let x = Tensor::<f64>::from_fn(&[1, 1, 5, 5], |i| i as f64);
        let (y, cache) = Module::<f64>::forward_train(&mut pool, &x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 3, 3]);
        // bottom-right window covers rows/cols 3..5
        assert_eq!(y.get(&[0, 0, 2, 2]), 24.0);
        let dx = Module::<f64>::backward(&pool, &cache, &Tensor::ones(&[1, 1, 3, 3]), &mut []).unwrap();
        assert_eq!(dx.sum_all(), 9.0);
        assert_eq!(dx.get(&[0, 0, 4, 4]), 1.0);
    }
}
