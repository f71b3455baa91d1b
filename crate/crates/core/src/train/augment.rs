use serde::{Deserialize, Serialize};

use crate::arch::FRAME_SIDE;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub enabled: bool,
    pub rotation_deg: f64,
    /// Fraction of the side length.
    pub shift: f64,
    /// Scale is drawn from `[1 - zoom, 1 + zoom]`.
    pub zoom: f64,
    pub flip_prob: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            enabled: true,
            rotation_deg: 10.0,
            shift: 0.1,
            zoom: 0.1,
            flip_prob: 0.5,
        }
    }
}

impl AugmentConfig {
    pub fn none() -> Self {
        AugmentConfig {
            enabled: false,
            rotation_deg: 0.0,
            shift: 0.0,
            zoom: 0.0,
            flip_prob: 0.0,
        }
    }
}

/// Rotation about the frame centre, then zoom, then shift, then an
/// optional horizontal flip.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub angle_rad: f64,
    pub shift_x: f64,
    pub shift_y: f64,
    pub scale: f64,
    pub flip: bool,
}

impl Affine {
    pub fn identity() -> Self {
        Affine {
            angle_rad: 0.0,
            shift_x: 0.0,
            shift_y: 0.0,
            scale: 1.0,
            flip: false,
        }
    }

    pub fn sample(config: &AugmentConfig, rng: &mut Rng) -> Self {
        if !config.enabled {
            return Affine::identity();
        }
        let side = FRAME_SIDE as f64;
        let r = config.rotation_deg;
        let s = config.shift;
        let z = config.zoom;
        Affine {
            angle_rad: rng.uniform_range(-r, r).to_radians(),
            shift_x: rng.uniform_range(-s, s) * side,
            shift_y: rng.uniform_range(-s, s) * side,
            scale: 1.0 + rng.uniform_range(-z, z),
            flip: rng.bernoulli(config.flip_prob),
        }
    }

    /// Warps every `side x side` plane of `planes` with the same map.
    /// Sampling is nearest-neighbour; outside coordinates take the
    /// nearest edge pixel.
    pub fn apply(&self, planes: &[f32], side: usize) -> Vec<f32> {
        let plane = side * side;
        assert_eq!(planes.len() % plane, 0, "input is not a stack of {side}x{side} planes");
        let c = (side as f64 - 1.0) / 2.0;
        let (sin, cos) = self.angle_rad.sin_cos();
        let max = side as f64 - 1.0;
        let lookup: Vec<usize> = (0..plane)
            .map(|p| {
                let (mut x, y) = ((p % side) as f64, (p / side) as f64);
                if self.flip {
                    x = max - x;
                }
                let u = (x - c - self.shift_x) / self.scale;
                let v = (y - c - self.shift_y) / self.scale;
                let sx = (cos * u + sin * v + c).round().clamp(0.0, max) as usize;
                let sy = (-sin * u + cos * v + c).round().clamp(0.0, max) as usize;
                sy * side + sx
            })
            .collect();
        let mut out = Vec::with_capacity(planes.len());
        for src in planes.chunks(plane) {
            out.extend(lookup.iter().map(|&i| src[i].clamp(0.0, 1.0)));
        }
        out
    }
}

/// Draws one transform and applies it to every frame of a sample.
pub fn augment(sample: &[f32], config: &AugmentConfig, rng: &mut Rng) -> Vec<f32> {
    Affine::sample(config, rng).apply(sample, FRAME_SIDE)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(frames: usize) -> Vec<f32> {
        (0..frames * FRAME_SIDE * FRAME_SIDE).map(|i| (i % 251) as f32 / 250.0).collect()
    }

    #[test]
    fn zero_magnitude_is_identity() {
        let x = ramp(5);
        let cfg = AugmentConfig {
            enabled: true,
            ..AugmentConfig::none()
        };
        let mut rng = Rng::new(3);
        assert_eq!(augment(&x, &cfg, &mut rng), x);
        assert_eq!(augment(&x, &AugmentConfig::none(), &mut rng), x);
    }

    #[test]
    fn double_flip_is_identity() {
        let x = ramp(2);
        let flip = Affine {
            flip: true,
            ..Affine::identity()
        };
        let once = flip.apply(&x, FRAME_SIDE);
        assert_ne!(once, x);
        assert_eq!(flip.apply(&once, FRAME_SIDE), x);
    }

    #[test]
    fn quarter_turn_moves_corner() {
        let mut x = vec![0.0f32; FRAME_SIDE * FRAME_SIDE];
        x[0] = 1.0;
        let rot = Affine {
            angle_rad: std::f64::consts::FRAC_PI_2,
            ..Affine::identity()
        };
        let y = rot.apply(&x, FRAME_SIDE);
        assert_eq!(y.iter().filter(|&&v| v == 1.0).count(), 1);
        assert_eq!(y[FRAME_SIDE - 1], 1.0);
    }

    #[test]
    fn shift_fills_from_edge() {
        let x: Vec<f32> = (0..FRAME_SIDE * FRAME_SIDE).map(|p| (p % FRAME_SIDE) as f32 / 47.0).collect();
        let t = Affine {
            shift_x: 3.0,
            ..Affine::identity()
        };
        let y = t.apply(&x, FRAME_SIDE);
        assert_eq!(y[0], 0.0);
        assert_eq!(y[3], 0.0);
        assert_eq!(y[4], 1.0 / 47.0);
    }
}
