use super::{Emotion, Provenance};
use crate::arch::FRAME_SIDE;
use crate::error::{Error, Result};

/// `t` preprocessed 48x48 frames stacked along the channel axis, earliest
/// frame first.
#[derive(Clone, Debug, PartialEq)]
pub struct SubSequenceStack {
    pub pixels: Vec<f32>,
    pub frames: usize,
    pub label: Emotion,
    pub provenance: Provenance,
}

impl SubSequenceStack {
    pub fn channel(&self, i: usize) -> &[f32] {
        let plane = FRAME_SIDE * FRAME_SIDE;
        &self.pixels[i * plane..(i + 1) * plane]
    }
}

pub fn stack_window<F: AsRef<[f32]>>(
    frames: &[F],
    t: usize,
    label: Emotion,
    provenance: Provenance,
) -> Result<SubSequenceStack> {
    if frames.len() != t {
        return Err(Error::InvalidArgument(format!(
            "a stack needs exactly {t} frames, got {}",
            frames.len()
        )));
    }
    let plane = FRAME_SIDE * FRAME_SIDE;
    let mut pixels = Vec::with_capacity(t * plane);
    for (i, f) in frames.iter().enumerate() {
        let f = f.as_ref();
        if f.len() != plane {
            return Err(Error::InvalidArgument(format!(
                "frame {i} has {} values, expected {plane}",
                f.len()
            )));
        }
        if let Some(v) = f.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("frame {i} holds {v}, outside [0, 1]")));
        }
        pixels.extend_from_slice(f);
    }
    Ok(SubSequenceStack {
        pixels,
        frames: t,
        label,
        provenance,
    })
}
