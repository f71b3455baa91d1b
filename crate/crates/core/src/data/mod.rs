//! Dataset construction: windowing, frame preprocessing, stacking, the
//! `TCVX` archive format, manifest-driven builds and synthetic clips.

mod archive;
mod frame;
mod manifest;
mod stack;
mod synthetic;
mod window;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use archive::{DatasetArchive, Provenance};
pub use frame::{extend_box, preprocess_frame, resize_bilinear, FaceBox, GrayFrame};
pub use manifest::{
    build_archive, build_archive_from_path, BoxSource, BuildConfig, BuildStats, ClipEntry, FrameSource, Manifest,
};
pub use stack::{stack_window, SubSequenceStack};
pub use synthetic::{center_box, generate_synthetic, synthetic_clip, trajectory, SynthConfig, Trajectory};
pub use window::{extract_windows, window_count, SourceProfile, WindowSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emotion {
    Angry,
    Disgust,
    Fear,
    Happy,
    Sad,
    Surprise,
    Neutral,
}

/// Labels that exist in the source corpora but are not part of the
/// seven-class set.
const EXCLUDED_LABELS: [&str; 4] = ["contempt", "unsure", "concentrating", "boredom"];

impl Emotion {
    pub const ALL: [Emotion; 7] = [
        Emotion::Angry,
        Emotion::Disgust,
        Emotion::Fear,
        Emotion::Happy,
        Emotion::Sad,
        Emotion::Surprise,
        Emotion::Neutral,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Emotion> {
        Emotion::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Emotion::Angry => "angry",
            Emotion::Disgust => "disgust",
            Emotion::Fear => "fear",
            Emotion::Happy => "happy",
            Emotion::Sad => "sad",
            Emotion::Surprise => "surprise",
            Emotion::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Emotion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let lower = s.trim().to_ascii_lowercase();
        if let Some(e) = Emotion::ALL.into_iter().find(|e| e.as_str() == lower) {
            return Ok(e);
        }
        if EXCLUDED_LABELS.contains(&lower.as_str()) {
            return Err(format!("label {lower:?} is excluded from the seven-class set"));
        }
        Err(format!("unknown label {s:?}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_parse_and_exclusions_are_explicit() {
        for e in Emotion::ALL {
            assert_eq!(e.as_str().parse::<Emotion>().unwrap(), e);
            assert_eq!(Emotion::from_index(e.index()), Some(e));
        }
        assert_eq!("Happy".parse::<Emotion>().unwrap(), Emotion::Happy);
        let err = "contempt".parse::<Emotion>().unwrap_err();
        assert!(err.contains("excluded"), "{err}");
        let err = "boredom".parse::<Emotion>().unwrap_err();
        assert!(err.contains("excluded"), "{err}");
        assert!("joy".parse::<Emotion>().unwrap_err().contains("unknown"));
    }
}
