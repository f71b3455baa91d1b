use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub width: usize,
    pub stride: usize,
    /// Frames discarded at the start of each clip.
    pub skip_head: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            width: 5,
            stride: 1,
            skip_head: 0,
        }
    }
}

impl WindowSpec {
    pub fn new(width: usize, stride: usize, skip_head: usize) -> Result<Self> {
        if width == 0 || stride == 0 {
            return Err(Error::InvalidArgument(format!(
                "window width and stride must be positive (width {width}, stride {stride})"
            )));
        }
        Ok(WindowSpec {
            width,
            stride,
            skip_head,
        })
    }
}

/// Which corpus a clip resembles; decides the default window stride and
/// skipped head frames.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceProfile {
    /// Short posed clips starting at onset: every window kept.
    #[default]
    CkLike,
    /// Long clips opening on a neutral face: skip 5, stride 2.
    BaumLike,
    EnterfaceLike,
    Custom,
}

impl SourceProfile {
    pub fn window(self, width: usize) -> WindowSpec {
        match self {
            SourceProfile::CkLike | SourceProfile::Custom => WindowSpec {
                width,
                stride: 1,
                skip_head: 0,
            },
            SourceProfile::BaumLike | SourceProfile::EnterfaceLike => WindowSpec {
                width,
                stride: 2,
                skip_head: 5,
            },
        }
    }
}

/// `max(0, floor((n - skip - width) / stride) + 1)`
pub fn window_count(n_frames: usize, spec: WindowSpec) -> usize {
    match n_frames.checked_sub(spec.skip_head + spec.width) {
        Some(room) => room / spec.stride + 1,
        None => 0,
    }
}

/// Start frame of every window, in increasing order.
pub fn extract_windows(n_frames: usize, spec: WindowSpec) -> Vec<usize> {
    let n = window_count(n_frames, spec);
    if n == 0 {
        log::debug!("{n_frames} frames yield no window for {spec:?}");
    }
    (0..n).map(|i| spec.skip_head + i * spec.stride).collect()
}
