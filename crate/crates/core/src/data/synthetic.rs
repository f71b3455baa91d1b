//! Synthetic expression clips that only a temporal model can fully
//! separate.
//!
//! Six classes come in three pairs that share one facial feature (a pair
//! of bright blobs, a bright bar, or a dark oval). Within a pair one class
//! ramps the feature in from faint to full strength, the other starts at
//! full strength, fades and returns. Both end at full strength, so the
//! final frame of a window is identically distributed across the pair.
//! Neutral shows no feature at all.
//!
//! Face geometry for sample `i` of a pair comes from a stream keyed by
//! `(seed, pair, i)`, so the two classes of a pair draw the same faces.
//! Pixel noise comes from a stream keyed by `(seed, class, i)`.

use serde::{Deserialize, Serialize};

use super::{stack_window, DatasetArchive, Emotion, FaceBox, GrayFrame, Provenance};
use crate::arch::{FRAME_SIDE, WINDOW};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trajectory {
    /// 0.2 rising linearly to 1.0.
    Onset,
    /// 1.0 falling to 0.2 at mid-clip and back to 1.0.
    DipReturn,
    /// Feature absent throughout.
    Static,
}

impl Trajectory {
    /// Feature strength at normalized time `tau` in `[0, 1]`.
    pub fn intensity(self, tau: f64) -> f64 {
        match self {
            Trajectory::Onset => 0.2 + 0.8 * tau,
            Trajectory::DipReturn => 0.2 + 0.8 * (2.0 * tau - 1.0).abs(),
            Trajectory::Static => 0.0,
        }
    }
}

pub fn trajectory(e: Emotion) -> Trajectory {
    match e {
        Emotion::Angry | Emotion::Fear | Emotion::Sad => Trajectory::Onset,
        Emotion::Disgust | Emotion::Happy | Emotion::Surprise => Trajectory::DipReturn,
        Emotion::Neutral => Trajectory::Static,
    }
}

/// Index of the feature shared by a class pair; neutral has its own slot.
fn group(e: Emotion) -> u64 {
    match e {
        Emotion::Angry | Emotion::Disgust => 0,
        Emotion::Fear | Emotion::Happy => 1,
        Emotion::Sad | Emotion::Surprise => 2,
        Emotion::Neutral => 3,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub per_class: usize,
    pub frames: usize,
    /// Standard deviation of additive Gaussian pixel noise.
    pub noise: f64,
}

impl SynthConfig {
    pub fn new(per_class: usize) -> Self {
        SynthConfig {
            per_class,
            frames: WINDOW,
            noise: 0.03,
        }
    }
}

/// Per-sample face layout in 48-pixel units.
#[derive(Clone, Copy, Debug)]
struct Face {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    background: f64,
    skin: f64,
    gain: f64,
}

impl Face {
    fn draw(rng: &mut Rng) -> Face {
        Face {
            cx: 24.0 + rng.uniform_range(-2.0, 2.0),
            cy: 24.0 + rng.uniform_range(-2.0, 2.0),
            rx: rng.uniform_range(14.0, 17.0),
            ry: rng.uniform_range(17.0, 20.0),
            background: rng.uniform_range(0.15, 0.3),
            skin: rng.uniform_range(0.5, 0.6),
            gain: rng.uniform_range(0.28, 0.34),
        }
    }

    /// Intensity at `(u, v)` with the group's feature at strength `alpha`.
    fn shade(&self, feature: u64, alpha: f64, u: f64, v: f64) -> f64 {
        let du = (u - self.cx) / self.rx;
        let dv = (v - self.cy) / self.ry;
        let mut value = if du * du + dv * dv <= 1.0 {
            self.skin
        } else {
            self.background
        };
        let blob = |x: f64, y: f64, sx: f64, sy: f64| {
            let a = (u - x) / sx;
            let b = (v - y) / sy;
            (-0.5 * (a * a + b * b)).exp()
        };
        let (cx, cy) = (self.cx, self.cy);
        let pattern = match feature {
            0 => blob(cx - 7.0, cy - 6.0, 2.5, 2.5) + blob(cx + 7.0, cy - 6.0, 2.5, 2.5),
            1 => blob(cx, cy + 8.0, 7.0, 2.0),
            2 => -blob(cx, cy + 7.0, 3.0, 4.0),
            _ => 0.0,
        };
        value += alpha * self.gain * pattern;
        value
    }
}

fn face_rng(seed: u64, feature: u64, index: usize) -> Rng {
    Rng::new(seed).derive(0x4641_4345).derive(feature).derive(index as u64)
}

fn noise_rng(seed: u64, e: Emotion, index: usize) -> Rng {
    Rng::new(seed).derive(0x4e4f_4953).derive(e.index() as u64).derive(index as u64)
}

/// Renders one frame over a `width x height` canvas whose face occupies `b`.
#[allow(clippy::too_many_arguments)]
fn render(face: &Face, feature: u64, alpha: f64, width: usize, height: usize, b: FaceBox, noise: f64, rng: &mut Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(width * height);
    let sx = FRAME_SIDE as f64 / b.w as f64;
    let sy = FRAME_SIDE as f64 / b.h as f64;
    for y in 0..height {
        for x in 0..width {
            let u = (x as f64 + 0.5 - b.x as f64) * sx - 0.5;
            let v = (y as f64 + 0.5 - b.y as f64) * sy - 0.5;
            let mut value = face.shade(feature, alpha, u, v);
            if noise > 0.0 {
                value += noise * rng.normal();
            }
            out.push(value.clamp(0.0, 1.0));
        }
    }
    out
}

/// Seven classes of `per_class` windows each, class by class.
pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> DatasetArchive {
    let t = config.frames;
    let mut archive = DatasetArchive::new(t);
    let whole = FaceBox {
        x: 0,
        y: 0,
        w: FRAME_SIDE,
        h: FRAME_SIDE,
    };
    for e in Emotion::ALL {
        let traj = trajectory(e);
        let feature = group(e);
        for i in 0..config.per_class {
            let face = Face::draw(&mut face_rng(seed, feature, i));
            let mut noise = noise_rng(seed, e, i);
            let frames: Vec<Vec<f32>> = (0..t)
                .map(|k| {
                    let tau = if t > 1 { k as f64 / (t - 1) as f64 } else { 1.0 };
                    render(&face, feature, traj.intensity(tau), FRAME_SIDE, FRAME_SIDE, whole, config.noise, &mut noise)
                        .into_iter()
                        .map(|v| v as f32)
                        .collect()
                })
                .collect();
            let provenance = Provenance {
                clip: format!("synthetic/{e}/{i}"),
                start: 0,
            };
            let stack = stack_window(&frames, t, e, provenance).expect("rendered frames lie in [0, 1]");
            archive.push(stack).expect("stack matches archive dims");
        }
    }
    archive
}

/// Square box of three quarters of the short side, centred.
pub fn center_box(width: usize, height: usize) -> FaceBox {
    let side = (width.min(height) * 3 / 4).max(1);
    FaceBox {
        x: (width - side) / 2,
        y: (height - side) / 2,
        w: side,
        h: side,
    }
}

/// A full 8-bit clip of `n_frames` whose face sits in [`center_box`].
pub fn synthetic_clip(label: Emotion, n_frames: usize, width: usize, height: usize, noise: f64, seed: u64) -> Vec<GrayFrame> {
    let feature = group(label);
    let traj = trajectory(label);
    let face = Face::draw(&mut face_rng(seed, feature, 0));
    let mut rng = noise_rng(seed, label, 0);
    let b = center_box(width, height);
    (0..n_frames)
        .map(|k| {
            let tau = if n_frames > 1 { k as f64 / (n_frames - 1) as f64 } else { 1.0 };
            let pixels = render(&face, feature, traj.intensity(tau), width, height, b, noise, &mut rng)
                .into_iter()
                .map(|v| (v * 255.0).round() as u8)
                .collect();
            GrayFrame {
                width,
                height,
                pixels,
            }
        })
        .collect()
}
