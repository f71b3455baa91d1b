//! Naive loop oracles shared by the integration tests. Everything here is
//! written directly from the definitions and accumulates left to right in
//! f64, without touching the library's kernels.

#![allow(dead_code)]

use timeconv::layers::Padding;
use timeconv::{Rng, Tensor};

pub fn random_vec(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect()
}

pub fn random_tensor(shape: &[usize], rng: &mut Rng) -> Tensor<f64> {
    Tensor::new(shape.to_vec(), random_vec(shape.iter().product(), rng)).unwrap()
}

/// Largest `|a - b| / max(|b|, floor)` over two equal-length slices.
pub fn max_rel_diff(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(floor))
        .fold(0.0, f64::max)
}

pub struct ConvGeom {
    pub kt: usize,
    pub kh: usize,
    pub kw: usize,
    pub st: usize,
    pub s: usize,
    pub pt: Padding,
    pub ph: Padding,
    pub pw: Padding,
}

fn out_len(n: usize, k: usize, stride: usize, p: Padding) -> usize {
    (n + p.before + p.after - k) / stride + 1
}

/// Cross-correlation of `x [B, C, T, H, W]` with `w [O, C, kt, kh, kw]`,
/// zero padding. Returns the output and its shape.
pub fn conv3d(x: &[f64], xs: [usize; 5], w: &[f64], o: usize, bias: Option<&[f64]>, g: &ConvGeom) -> (Vec<f64>, [usize; 5]) {
    let [b, c, t, h, wd] = xs;
    let ot = out_len(t, g.kt, g.st, g.pt);
    let oh = out_len(h, g.kh, g.s, g.ph);
    let ow = out_len(wd, g.kw, g.s, g.pw);
    let mut y = vec![0.0; b * o * ot * oh * ow];
    let xi = |n: usize, ci: usize, ti: usize, hi: usize, wi: usize| (((n * c + ci) * t + ti) * h + hi) * wd + wi;
    let wi_ = |oi: usize, ci: usize, a: usize, p: usize, q: usize| (((oi * c + ci) * g.kt + a) * g.kh + p) * g.kw + q;
    for n in 0..b {
        for oi in 0..o {
            for a in 0..ot {
                for i in 0..oh {
                    for j in 0..ow {
                        let mut acc = bias.map_or(0.0, |bv| bv[oi]);
                        for ci in 0..c {
                            for dt in 0..g.kt {
                                for di in 0..g.kh {
                                    for dj in 0..g.kw {
                                        let tt = (a * g.st + dt) as isize - g.pt.before as isize;
                                        let hh = (i * g.s + di) as isize - g.ph.before as isize;
                                        let ww = (j * g.s + dj) as isize - g.pw.before as isize;
                                        if tt < 0 || hh < 0 || ww < 0 || tt >= t as isize || hh >= h as isize || ww >= wd as isize {
                                            continue;
                                        }
                                        acc += x[xi(n, ci, tt as usize, hh as usize, ww as usize)] * w[wi_(oi, ci, dt, di, dj)];
                                    }
                                }
                            }
                        }
                        y[(((n * o + oi) * ot + a) * oh + i) * ow + j] = acc;
                    }
                }
            }
        }
    }
    (y, [b, o, ot, oh, ow])
}

/// Per-channel `k x k` filtering of `x [B, C, H, W]` with `w [C, 1, k, k]`.
pub fn depthwise(x: &[f64], xs: [usize; 4], w: &[f64], k: usize, stride: usize, ph: Padding, pw: Padding) -> (Vec<f64>, [usize; 4]) {
    let [b, c, h, wd] = xs;
    let oh = out_len(h, k, stride, ph);
    let ow = out_len(wd, k, stride, pw);
    let mut y = vec![0.0; b * c * oh * ow];
    for n in 0..b {
        for ci in 0..c {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = 0.0;
                    for di in 0..k {
                        for dj in 0..k {
                            let hh = (i * stride + di) as isize - ph.before as isize;
                            let ww = (j * stride + dj) as isize - pw.before as isize;
                            if hh < 0 || ww < 0 || hh >= h as isize || ww >= wd as isize {
                                continue;
                            }
                            acc += x[((n * c + ci) * h + hh as usize) * wd + ww as usize] * w[(ci * k + di) * k + dj];
                        }
                    }
                    y[((n * c + ci) * oh + i) * ow + j] = acc;
                }
            }
        }
    }
    (y, [b, c, oh, ow])
}

/// `[m, k] x [k, n]`, i-j-p order.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for p in 0..k {
                acc += a[i * k + p] * b[p * n + j];
            }
            c[i * n + j] = acc;
        }
    }
    c
}

/// Bilinear resampling with half-pixel centres and edge clamping.
pub fn bilinear(src: &[f64], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(dw * dh);
    let at = |x: usize, y: usize| src[y * sw + x];
    for y in 0..dh {
        for x in 0..dw {
            let fx = ((x as f64 + 0.5) * sw as f64 / dw as f64 - 0.5).clamp(0.0, (sw - 1) as f64);
            let fy = ((y as f64 + 0.5) * sh as f64 / dh as f64 - 0.5).clamp(0.0, (sh - 1) as f64);
            let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(sw - 1), (y0 + 1).min(sh - 1));
            let (ax, ay) = (fx - x0 as f64, fy - y0 as f64);
            let top = at(x0, y0) * (1.0 - ax) + at(x1, y0) * ax;
            let bottom = at(x0, y1) * (1.0 - ax) + at(x1, y1) * ax;
            out.push(top * (1.0 - ay) + bottom * ay);
        }
    }
    out
}

/// Sum over one axis of a row-major tensor.
pub fn sum_axis(x: &[f64], shape: &[usize], axis: usize) -> Vec<f64> {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let n = shape[axis];
    let mut out = vec![0.0; outer * inner];
    for o in 0..outer {
        for i in 0..inner {
            let mut acc = 0.0;
            for a in 0..n {
                acc += x[(o * n + a) * inner + i];
            }
            out[o * inner + i] = acc;
        }
    }
    out
}
