//! JSON clip manifests and the archive build.
//!
//! ```json
//! {
//!   "clips": [
//!     {
//!       "id": "s005_happy",
//!       "label": "happy",
//!       "profile": "ck_like",
//!       "frames": { "dir": "frames/s005" },
//!       "boxes": "whole_frame"
//!     },
//!     {
//!       "id": "baum_017",
//!       "label": "sad",
//!       "profile": "custom",
//!       "stride": 3,
//!       "skip_head": 2,
//!       "frames": { "raw": "planes/baum_017.gray", "width": 320, "height": 240 },
//!       "boxes": [[40, 30, 120, 120], [41, 30, 120, 121]]
//!     }
//!   ]
//! }
//! ```
//!
//! `dir` frames are every PNG/PGM/PPM/PNM file in the directory in
//! filename order. `raw` is a file of back-to-back 8-bit planes. A box list
//! has one `[x, y, w, h]` per frame. Relative paths resolve against the
//! manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    extend_box, extract_windows, preprocess_frame, stack_window, DatasetArchive, Emotion, FaceBox, GrayFrame,
    Provenance, SourceProfile, WindowSpec,
};
use crate::arch::WINDOW;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub clips: Vec<ClipEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipEntry {
    pub id: String,
    /// Kept as text so unknown or excluded labels are reported with the id.
    pub label: String,
    #[serde(default)]
    pub profile: SourceProfile,
    pub frames: FrameSource,
    pub boxes: BoxSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip_head: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum FrameSource {
    Dir { dir: PathBuf },
    Raw { raw: PathBuf, width: usize, height: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoxSource {
    /// The literal string `"whole_frame"`.
    Sentinel(String),
    PerFrame(Vec<FaceBox>),
}

impl BoxSource {
    pub fn whole_frame() -> Self {
        BoxSource::Sentinel("whole_frame".into())
    }
}

/// Settings applied to every clip; `stride` and `skip_head` override the
/// per-profile and per-clip values when set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub width: usize,
    pub box_extension: f64,
    pub stride: Option<usize>,
    pub skip_head: Option<usize>,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            width: WINDOW,
            box_extension: 0.1,
            stride: None,
            skip_head: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ClassCount {
    pub label: String,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BuildStats {
    pub total: usize,
    pub per_class: Vec<ClassCount>,
    pub clips: usize,
    /// Clips too short for a single window.
    pub clips_without_windows: Vec<String>,
    pub whole_frame_clips: Vec<String>,
}

impl BuildStats {
    pub fn from_counts(counts: [usize; 7]) -> Self {
        BuildStats {
            total: counts.iter().sum(),
            per_class: Emotion::ALL
                .iter()
                .map(|e| ClassCount {
                    label: e.as_str().to_string(),
                    count: counts[e.index()],
                })
                .collect(),
            ..BuildStats::default()
        }
    }
}

impl Manifest {
    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })
    }
}

fn entry_error(entry: &ClipEntry, message: impl Into<String>) -> Error {
    Error::Manifest {
        entry: entry.id.clone(),
        message: message.into(),
    }
}

fn load_frames(entry: &ClipEntry, base: &Path) -> Result<Vec<GrayFrame>> {
    let frame_err = |frame: usize, message: String| Error::Frame {
        clip: entry.id.clone(),
        frame,
        message,
    };
    match &entry.frames {
        FrameSource::Dir { dir } => {
            let dir = base.join(dir);
            let listing = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
            let mut paths: Vec<PathBuf> = listing
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.extension()
                        .and_then(|x| x.to_str())
                        .is_some_and(|x| matches!(x.to_ascii_lowercase().as_str(), "png" | "pgm" | "ppm" | "pnm"))
                })
                .collect();
            paths.sort();
            paths
                .iter()
                .enumerate()
                .map(|(i, p)| GrayFrame::open(p).map_err(|m| frame_err(i, format!("{}: {m}", p.display()))))
                .collect()
        }
        FrameSource::Raw { raw, width, height } => {
            let path = base.join(raw);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let plane = width * height;
            if plane == 0 || bytes.len() % plane != 0 {
                return Err(entry_error(
                    entry,
                    format!("raw file of {} bytes is not a whole number of {width}x{height} planes", bytes.len()),
                ));
            }
            bytes
                .chunks(plane)
                .map(|c| GrayFrame::new(*width, *height, c.to_vec()))
                .collect()
        }
    }
}

/// Processes clips in manifest order and windows in start order, so equal
/// inputs always give byte-identical archives.
pub fn build_archive(manifest: &Manifest, base: &Path, config: &BuildConfig) -> Result<(DatasetArchive, BuildStats)> {
    let mut archive = DatasetArchive::new(config.width);
    let mut stats = BuildStats::default();
    let mut seen = HashSet::new();
    for entry in &manifest.clips {
        if !seen.insert(entry.id.as_str()) {
            return Err(entry_error(entry, "duplicate clip id"));
        }
        let label: Emotion = entry.label.parse().map_err(|m: String| entry_error(entry, m))?;
        let mut spec = entry.profile.window(config.width);
        if let Some(s) = config.stride.or(entry.stride) {
            spec.stride = s;
        }
        if let Some(k) = config.skip_head.or(entry.skip_head) {
            spec.skip_head = k;
        }
        let spec = WindowSpec::new(spec.width, spec.stride, spec.skip_head).map_err(|e| entry_error(entry, e.to_string()))?;

        let frames = load_frames(entry, base)?;
        let boxes: Vec<FaceBox> = match &entry.boxes {
            BoxSource::Sentinel(s) if s == "whole_frame" => {
                log::info!("clip {}: using whole-frame boxes", entry.id);
                stats.whole_frame_clips.push(entry.id.clone());
                frames.iter().map(GrayFrame::whole_box).collect()
            }
            BoxSource::Sentinel(s) => {
                return Err(entry_error(entry, format!("boxes must be \"whole_frame\" or a list, got {s:?}")))
            }
            BoxSource::PerFrame(list) if list.len() == frames.len() => list.clone(),
            BoxSource::PerFrame(list) => {
                return Err(entry_error(
                    entry,
                    format!("{} boxes for {} frames", list.len(), frames.len()),
                ))
            }
        };

        let starts = extract_windows(frames.len(), spec);
        if starts.is_empty() {
            log::warn!("clip {}: {} frames yield no window", entry.id, frames.len());
            stats.clips_without_windows.push(entry.id.clone());
        }
        let mut processed: Vec<Option<Vec<f32>>> = vec![None; frames.len()];
        for &start in &starts {
            for f in start..start + spec.width {
                if processed[f].is_none() {
                    let frame = &frames[f];
                    let b = extend_box(boxes[f], config.box_extension, frame.width, frame.height)
                        .and_then(|b| preprocess_frame(frame, b))
                        .map_err(|e| Error::Frame {
                            clip: entry.id.clone(),
                            frame: f,
                            message: e.to_string(),
                        })?;
                    processed[f] = Some(b);
                }
            }
            let window: Vec<&[f32]> = processed[start..start + spec.width]
                .iter()
                .map(|p| p.as_deref().unwrap())
                .collect();
            let provenance = Provenance {
                clip: entry.id.clone(),
                start,
            };
            archive.push(stack_window(&window, spec.width, label, provenance)?)?;
        }
        stats.clips += 1;
    }
    if archive.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{} clips produced no windows",
            manifest.clips.len()
        )));
    }
    let counts = BuildStats::from_counts(archive.class_counts());
    stats.total = counts.total;
    stats.per_class = counts.per_class;
    Ok((archive, stats))
}

/// Loads a manifest, builds the archive and writes it to `out`.
pub fn build_archive_from_path(manifest_path: &Path, config: &BuildConfig, out: &Path) -> Result<BuildStats> {
    let manifest = Manifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let (archive, stats) = build_archive(&manifest, base, config)?;
    archive.save(out)?;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw_clip(dir: &Path, name: &str, n: usize, w: usize, h: usize) {
        let bytes: Vec<u8> = (0..n * w * h).map(|i| ((i / (w * h)) * 10 + i % 7) as u8).collect();
        fs::write(dir.join(name), bytes).unwrap();
    }

    fn raw_entry(id: &str, label: &str, profile: SourceProfile) -> ClipEntry {
        ClipEntry {
            id: id.into(),
            label: label.into(),
            profile,
            frames: FrameSource::Raw {
                raw: "clip.raw".into(),
                width: 64,
                height: 56,
            },
            boxes: BoxSource::whole_frame(),
            stride: None,
            skip_head: None,
        }
    }

    #[test]
    fn twenty_frame_ck_clip_gives_sixteen_samples() {
        let dir = tempfile::tempdir().unwrap();
        write_raw_clip(dir.path(), "clip.raw", 20, 64, 56);
        let m = Manifest {
            clips: vec![raw_entry("a", "happy", SourceProfile::CkLike)],
        };
        let (archive, stats) = build_archive(&m, dir.path(), &BuildConfig::default()).unwrap();
        assert_eq!(archive.len(), 16);
        assert_eq!(stats.total, 16);
        assert_eq!(stats.per_class[3].count, 16);
        assert!(archive.labels().iter().all(|&l| l == Emotion::Happy));
        assert_eq!(archive.provenance(15).start, 15);
    }

    #[test]
    fn excluded_and_unknown_labels_name_the_entry() {
        let dir = tempfile::tempdir().unwrap();
        write_raw_clip(dir.path(), "clip.raw", 20, 64, 56);
        for (label, needle) in [("contempt", "excluded"), ("confused", "unknown")] {
            let m = Manifest {
                clips: vec![raw_entry("clip-7", label, SourceProfile::CkLike)],
            };
            let err = build_archive(&m, dir.path(), &BuildConfig::default()).unwrap_err().to_string();
            assert!(err.contains("clip-7") && err.contains(needle), "{err}");
        }
    }

    #[test]
    fn empty_result_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        write_raw_clip(dir.path(), "clip.raw", 4, 64, 56);
        let m = Manifest {
            clips: vec![raw_entry("short", "sad", SourceProfile::CkLike)],
        };
        assert!(matches!(
            build_archive(&m, dir.path(), &BuildConfig::default()),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn json_schema_parses() {
        let text = r#"{"clips": [
            {"id": "x", "label": "fear", "profile": "baum_like",
             "frames": {"dir": "f"}, "boxes": "whole_frame"},
            {"id": "y", "label": "sad", "profile": "custom", "stride": 3,
             "frames": {"raw": "r", "width": 4, "height": 2}, "boxes": [[0, 0, 4, 2]]}
        ]}"#;
        let m = Manifest::from_json(text).unwrap();
        assert_eq!(m.clips[0].profile, SourceProfile::BaumLike);
        assert_eq!(m.clips[1].stride, Some(3));
        assert_eq!(
            m.clips[1].boxes,
            BoxSource::PerFrame(vec![FaceBox { x: 0, y: 0, w: 4, h: 2 }])
        );
        assert!(Manifest::from_json(r#"{"clips": [], "extra": 1}"#).is_err());
    }
}
