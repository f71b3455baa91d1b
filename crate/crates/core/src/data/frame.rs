use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arch::FRAME_SIDE;
use crate::error::{Error, Result};

/// 8-bit grayscale image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "{width}x{height} frame needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(GrayFrame { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayFrame {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    /// Reads any PNG or PGM file, converting color to luma.
    pub fn open(path: &Path) -> std::result::Result<Self, String> {
        let img = image::open(path).map_err(|e| e.to_string())?.to_luma8();
        let (w, h) = img.dimensions();
        Ok(GrayFrame {
            width: w as usize,
            height: h as usize,
            pixels: img.into_raw(),
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        image::save_buffer(
            path,
            &self.pixels,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::L8,
        )
        .map_err(|e| Error::io(path, std::io::Error::other(e)))
    }

    pub fn whole_box(&self) -> FaceBox {
        FaceBox {
            x: 0,
            y: 0,
            w: self.width,
            h: self.height,
        }
    }
}

/// Face box in pixels: top-left corner plus extent. Serialized as
/// `[x, y, w, h]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 4]", into = "[usize; 4]")]
pub struct FaceBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl From<[usize; 4]> for FaceBox {
    fn from([x, y, w, h]: [usize; 4]) -> Self {
        FaceBox { x, y, w, h }
    }
}

impl From<FaceBox> for [usize; 4] {
    fn from(b: FaceBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// Moves every side outward by `frac` of the box width (left, right) or
/// height (top, bottom), rounds half-up and clips to the frame.
pub fn extend_box(b: FaceBox, frac: f64, frame_w: usize, frame_h: usize) -> Result<FaceBox> {
    if !(frac >= 0.0 && frac.is_finite()) {
        return Err(Error::InvalidArgument(format!("box extension {frac} must be finite and >= 0")));
    }
    if b.w == 0 || b.h == 0 {
        return Err(Error::InvalidArgument(format!("degenerate face box {b:?}")));
    }
    let dx = frac * b.w as f64;
    let dy = frac * b.h as f64;
    let x0 = round_half_up(b.x as f64 - dx).clamp(0, frame_w as i64);
    let y0 = round_half_up(b.y as f64 - dy).clamp(0, frame_h as i64);
    let x1 = round_half_up((b.x + b.w) as f64 + dx).clamp(0, frame_w as i64);
    let y1 = round_half_up((b.y + b.h) as f64 + dy).clamp(0, frame_h as i64);
    if x1 <= x0 || y1 <= y0 {
        return Err(Error::InvalidArgument(format!(
            "face box {b:?} lies outside the {frame_w}x{frame_h} frame"
        )));
    }
    Ok(FaceBox {
        x: x0 as usize,
        y: y0 as usize,
        w: (x1 - x0) as usize,
        h: (y1 - y0) as usize,
    })
}

/// Bilinear resize with half-pixel centres and edge clamping.
pub fn resize_bilinear(src: &[f32], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f32> {
    assert_eq!(src.len(), sw * sh, "resize_bilinear source length");
    let taps = |d: usize, s: usize| -> Vec<(usize, usize, f32)> {
        let scale = s as f64 / d as f64;
        (0..d)
            .map(|i| {
                let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (s - 1) as f64);
                let i0 = pos.floor() as usize;
                let i1 = (i0 + 1).min(s - 1);
                (i0, i1, (pos - i0 as f64) as f32)
            })
            .collect()
    };
    let xs = taps(dw, sw);
    let ys = taps(dh, sh);
    let mut out = Vec::with_capacity(dw * dh);
    for &(y0, y1, fy) in &ys {
        let (r0, r1) = (&src[y0 * sw..(y0 + 1) * sw], &src[y1 * sw..(y1 + 1) * sw]);
        for &(x0, x1, fx) in &xs {
            let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
            let bottom = r1[x0] + (r1[x1] - r1[x0]) * fx;
            out.push(top + (bottom - top) * fy);
        }
    }
    out
}

/// Crops `b`, resizes to 48x48 and scales to `[0, 1]`.
pub fn preprocess_frame(frame: &GrayFrame, b: FaceBox) -> Result<Vec<f32>> {
    if b.w == 0 || b.h == 0 || b.x + b.w > frame.width || b.y + b.h > frame.height {
        return Err(Error::InvalidArgument(format!(
            "box {b:?} is not inside the {}x{} frame",
            frame.width, frame.height
        )));
    }
    let mut crop = Vec::with_capacity(b.w * b.h);
    for row in frame.pixels.chunks(frame.width).skip(b.y).take(b.h) {
        crop.extend(row[b.x..b.x + b.w].iter().map(|&p| p as f32));
    }
    let mut out = resize_bilinear(&crop, b.w, b.h, FRAME_SIDE, FRAME_SIDE);
    for v in &mut out {
        *v /= 255.0;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fb(x: usize, y: usize, w: usize, h: usize) -> FaceBox {
        FaceBox { x, y, w, h }
    }

    #[test]
    fn extension_examples() {
        assert_eq!(extend_box(fb(100, 100, 200, 200), 0.1, 640, 480).unwrap(), fb(80, 80, 240, 240));
        assert_eq!(extend_box(fb(0, 0, 100, 100), 0.1, 640, 480).unwrap(), fb(0, 0, 110, 110));
        assert_eq!(extend_box(fb(7, 9, 33, 21), 0.0, 640, 480).unwrap(), fb(7, 9, 33, 21));
        // right/bottom clip
        assert_eq!(extend_box(fb(600, 440, 40, 40), 0.1, 640, 480).unwrap(), fb(596, 436, 44, 44));
    }

    #[test]
    fn half_up_rounding() {
        // edges land on 7.5 and 37.5, which round up to 8 and 38
        assert_eq!(extend_box(fb(10, 10, 25, 25), 0.1, 100, 100).unwrap(), fb(8, 8, 30, 30));
    }

    #[test]
    fn degenerate_box_rejected() {
        assert!(extend_box(fb(5, 5, 0, 10), 0.1, 100, 100).is_err());
        assert!(extend_box(fb(200, 5, 10, 10), 0.0, 100, 100).is_err());
        assert!(extend_box(fb(5, 5, 10, 10), -0.1, 100, 100).is_err());
    }

    #[test]
    fn constant_frame_stays_constant() {
        let f = GrayFrame::filled(97, 61, 128);
        let out = preprocess_frame(&f, f.whole_box()).unwrap();
        assert_eq!(out.len(), 48 * 48);
        assert!(out.iter().all(|&v| v == 128.0 / 255.0));
    }

    #[test]
    fn exact_size_crop_is_scaled_copy() {
        let pixels: Vec<u8> = (0..60 * 50).map(|i| ((i * 37) % 256) as u8).collect();
        let f = GrayFrame::new(60, 50, pixels).unwrap();
        let b = fb(5, 2, 48, 48);
        let out = preprocess_frame(&f, b).unwrap();
        for y in 0..48 {
            for x in 0..48 {
                let p = f.pixels[(y + 2) * 60 + x + 5];
                assert_eq!(out[y * 48 + x], p as f32 / 255.0);
            }
        }
    }

    #[test]
    fn out_of_frame_box_rejected() {
        let f = GrayFrame::filled(50, 50, 0);
        assert!(preprocess_frame(&f, fb(10, 10, 48, 48)).is_err());
    }
}
