//! `TCVX` dataset archives.
//!
//! Body layout after the shared framing (see `binfmt`):
//!
//! ```text
//! t, h, w           u32 x 3
//! class count       u32, then one length-prefixed UTF-8 name per class
//! per-class counts  u64 x classes
//! clip count        u32, then one length-prefixed clip id per clip
//! sample count      u64
//! per sample        label u8, clip index u32, start frame u32
//! payload           f32 x samples * t * h * w
//! ```

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{Emotion, SubSequenceStack};
use crate::arch::FRAME_SIDE;
use crate::binfmt::{Reader, Writer};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"TCVX";
const VERSION: u32 = 1;
const FORMAT: &str = "TCVX";

/// Where a sample came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub clip: String,
    pub start: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetArchive {
    frames: usize,
    labels: Vec<Emotion>,
    clip_ids: Vec<String>,
    /// (clip index, start frame) per sample.
    origins: Vec<(u32, u32)>,
    pixels: Vec<f32>,
}

impl DatasetArchive {
    pub fn new(frames: usize) -> Self {
        DatasetArchive {
            frames,
            labels: Vec::new(),
            clip_ids: Vec::new(),
            origins: Vec::new(),
            pixels: Vec::new(),
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.frames, FRAME_SIDE, FRAME_SIDE]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn sample_len(&self) -> usize {
        self.frames * FRAME_SIDE * FRAME_SIDE
    }

    pub fn push(&mut self, stack: SubSequenceStack) -> Result<()> {
        if stack.frames != self.frames || stack.pixels.len() != self.sample_len() {
            return Err(Error::InvalidArgument(format!(
                "stack of {} frames does not fit an archive of {}-frame samples",
                stack.frames, self.frames
            )));
        }
        let clip = match self.clip_ids.last() {
            Some(last) if *last == stack.provenance.clip => self.clip_ids.len() - 1,
            _ => {
                self.clip_ids.push(stack.provenance.clip);
                self.clip_ids.len() - 1
            }
        };
        self.labels.push(stack.label);
        self.origins.push((clip as u32, stack.provenance.start as u32));
        self.pixels.extend_from_slice(&stack.pixels);
        Ok(())
    }

    pub fn label(&self, i: usize) -> Emotion {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Emotion] {
        &self.labels
    }

    pub fn pixels(&self, i: usize) -> &[f32] {
        let n = self.sample_len();
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn provenance(&self, i: usize) -> Provenance {
        let (clip, start) = self.origins[i];
        Provenance {
            clip: self.clip_ids[clip as usize].clone(),
            start: start as usize,
        }
    }

    pub fn class_counts(&self) -> [usize; 7] {
        let mut counts = [0; 7];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    /// `[B, t, 48, 48]` tensor of the selected samples.
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor<f32>> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut data = Vec::with_capacity(indices.len() * self.sample_len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidArgument(format!(
                    "sample {i} out of range for {} samples",
                    self.len()
                )));
            }
            data.extend_from_slice(self.pixels(i));
        }
        Tensor::new(vec![indices.len(), self.frames, FRAME_SIDE, FRAME_SIDE], data)
    }

    pub fn batch_labels(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.labels[i].index()).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC, VERSION);
        for d in self.dims() {
            w.u32(d as u32);
        }
        w.u32(Emotion::ALL.len() as u32);
        for e in Emotion::ALL {
            w.str(e.as_str());
        }
        for c in self.class_counts() {
            w.u64(c as u64);
        }
        w.u32(self.clip_ids.len() as u32);
        for id in &self.clip_ids {
            w.str(id);
        }
        w.u64(self.len() as u64);
        for (label, &(clip, start)) in self.labels.iter().zip(&self.origins) {
            w.u8(label.index() as u8);
            w.u32(clip);
            w.u32(start);
        }
        w.f32s(&self.pixels);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(FORMAT, MAGIC, VERSION, bytes)?;
        let t = r.u32("dims")? as usize;
        let h = r.u32("dims")? as usize;
        let w = r.u32("dims")? as usize;
        if t == 0 || h != FRAME_SIDE || w != FRAME_SIDE {
            return Err(r.corrupt(format!("unsupported sample dims {t}x{h}x{w}")));
        }
        let classes = r.u32("label map")? as usize;
        if classes != Emotion::ALL.len() {
            return Err(r.corrupt(format!("{classes} classes, expected 7")));
        }
        for e in Emotion::ALL {
            let name = r.str("label map")?;
            if name != e.as_str() {
                return Err(r.corrupt(format!("label {} is {name:?}, expected {:?}", e.index(), e.as_str())));
            }
        }
        let mut stored_counts = [0usize; 7];
        for c in &mut stored_counts {
            *c = r.u64("class counts")? as usize;
        }
        let n_clips = r.u32("clip table")? as usize;
        let mut clip_ids = Vec::with_capacity(n_clips.min(r.remaining()));
        for _ in 0..n_clips {
            clip_ids.push(r.str("clip table")?);
        }
        let n = r.u64("sample count")? as usize;
        let per_sample = 9;
        if n.checked_mul(per_sample).is_none_or(|b| b > r.remaining()) {
            return Err(r.corrupt(format!("{n} samples do not fit the remaining body")));
        }
        let mut labels = Vec::with_capacity(n);
        let mut origins = Vec::with_capacity(n);
        for i in 0..n {
            let l = r.u8("sample table")?;
            let label = Emotion::from_index(l as usize)
                .ok_or_else(|| r.corrupt(format!("sample {i} has label index {l}")))?;
            let clip = r.u32("sample table")?;
            let start = r.u32("sample table")?;
            if clip as usize >= clip_ids.len() {
                return Err(r.corrupt(format!("sample {i} refers to clip {clip}")));
            }
            labels.push(label);
            origins.push((clip, start));
        }
        let pixels = r.f32s(n * t * h * w, "pixel payload")?;
        r.finish()?;
        let archive = DatasetArchive {
            frames: t,
            labels,
            clip_ids,
            origins,
            pixels,
        };
        if archive.class_counts() != stored_counts {
            return Err(Error::InvalidArgument(format!(
                "TCVX class counts {stored_counts:?} disagree with the sample labels {:?}",
                archive.class_counts()
            )));
        }
        Ok(archive)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}
