use std::collections::VecDeque;
use std::time::Instant;

use serde::Serialize;

use crate::arch::{prepare_input, ArchId, InputKind, Network, FRAME_SIDE, WINDOW};
use crate::data::{preprocess_frame, window_count, FaceBox, GrayFrame, WindowSpec};
use crate::error::{Error, Result};
use crate::layers::Module;
use crate::tensor::Tensor;

/// One prediction, passed to the emission callback.
#[derive(Debug)]
pub struct Emission<'a> {
    /// 0-based index of the frame that completed the window.
    pub frame: usize,
    /// The `t` preprocessed frames, oldest first, as fed to the network.
    pub stack: &'a [f32],
    pub prediction: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StreamReport {
    pub arch: ArchId,
    pub frames: usize,
    pub window: WindowSpec,
    /// 0-based frame index of each prediction.
    pub emitted_at: Vec<usize>,
    pub predictions: Vec<usize>,
    /// Crop, resize and normalize time for every frame.
    pub preprocess_ms: Vec<f64>,
    /// Forward time for every emitting frame.
    pub inference_ms: Vec<f64>,
    /// Preprocess plus inference, per frame.
    pub latency_ms: Vec<f64>,
    pub wall_seconds: f64,
    pub fps: f64,
    pub fps_target: Option<f64>,
    /// Frames whose latency exceeded `1000 / fps_target` ms.
    pub frames_over_budget: usize,
    /// Stages of a live pipeline that are not timed here.
    pub excluded_stages: Vec<String>,
}

/// Feeds frames through a ring buffer of the last `window.width`
/// preprocessed frames and classifies each complete window. Every frame
/// is cropped to `face`, or used whole when `face` is `None`.
pub fn stream_simulate<I>(
    source: I,
    net: &Network,
    window: WindowSpec,
    face: Option<FaceBox>,
    fps_target: Option<f64>,
    mut on_emit: impl FnMut(&Emission),
) -> Result<StreamReport>
where
    I: IntoIterator<Item = GrayFrame>,
{
    let t = window.width;
    let kind = net.arch().input_kind();
    if t == 0 || window.stride == 0 || (kind != InputKind::LastFrame && t != WINDOW) {
        return Err(Error::InvalidArgument(format!(
            "{} needs a {WINDOW}-frame window, got {window:?}",
            net.arch()
        )));
    }
    if let Some(f) = fps_target {
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::InvalidArgument(format!("fps target {f} must be positive")));
        }
    }
    let plane = FRAME_SIDE * FRAME_SIDE;
    let mut ring: VecDeque<Vec<f32>> = VecDeque::with_capacity(t);
    let mut stack = Vec::with_capacity(t * plane);
    let mut report = StreamReport {
        arch: net.arch(),
        frames: 0,
        window,
        emitted_at: Vec::new(),
        predictions: Vec::new(),
        preprocess_ms: Vec::new(),
        inference_ms: Vec::new(),
        latency_ms: Vec::new(),
        wall_seconds: 0.0,
        fps: 0.0,
        fps_target,
        frames_over_budget: 0,
        excluded_stages: vec!["face detection".into(), "capture".into()],
    };
    let wall = Instant::now();
    for (k, frame) in source.into_iter().enumerate() {
        let started = Instant::now();
        let b = face.unwrap_or_else(|| frame.whole_box());
        let pixels = preprocess_frame(&frame, b)?;
        if ring.len() == t {
            ring.pop_front();
        }
        ring.push_back(pixels);
        let pre = started.elapsed().as_secs_f64() * 1e3;
        report.preprocess_ms.push(pre);

        let seen = k + 1;
        let due = seen >= window.skip_head + t && (seen - window.skip_head - t).is_multiple_of(window.stride);
        let mut inf = 0.0;
        if due {
            let started = Instant::now();
            stack.clear();
            for f in &ring {
                stack.extend_from_slice(f);
            }
            let x = Tensor::new(vec![1, t, FRAME_SIDE, FRAME_SIDE], stack.clone())?;
            let logits = net.forward(&prepare_input(&x, kind)?)?;
            let prediction = logits.argmax_rows()?[0];
            inf = started.elapsed().as_secs_f64() * 1e3;
            report.inference_ms.push(inf);
            report.emitted_at.push(k);
            report.predictions.push(prediction);
            on_emit(&Emission {
                frame: k,
                stack: &stack,
                prediction,
            });
        }
        report.latency_ms.push(pre + inf);
        report.frames = seen;
    }
    if report.frames < window.skip_head + t {
        return Err(Error::InvalidArgument(format!(
            "source ended after {} frames; a {t}-frame window needs at least {}",
            report.frames,
            window.skip_head + t
        )));
    }
    debug_assert_eq!(report.predictions.len(), window_count(report.frames, window));
    report.wall_seconds = wall.elapsed().as_secs_f64();
    report.fps = report.frames as f64 / report.wall_seconds;
    if let Some(f) = fps_target {
        let budget = 1e3 / f;
        report.frames_over_budget = report.latency_ms.iter().filter(|&&l| l > budget).count();
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::build_network;
    use crate::rng::Rng;

    #[test]
    fn counts_and_sentinels() {
        let net: Network = build_network(ArchId::TimeconvXception, &mut Rng::new(2));
        // each frame is a flat image whose value encodes its index
        let frames: Vec<GrayFrame> = (0..12).map(|i| GrayFrame::filled(48, 48, (i * 20) as u8)).collect();
        let mut seen = Vec::new();
        let r = stream_simulate(frames, &net, WindowSpec::default(), None, Some(25.0), |e| {
            let firsts: Vec<f32> = e.stack.chunks(48 * 48).map(|p| p[0]).collect();
            seen.push((e.frame, firsts));
        })
        .unwrap();
        assert_eq!(r.predictions.len(), 8);
        assert_eq!(r.emitted_at[0], 4);
        assert_eq!(r.latency_ms.len(), 12);
        for (frame, firsts) in seen {
            let want: Vec<f32> = (frame - 4..=frame).map(|i| (i * 20) as f32 / 255.0).collect();
            assert_eq!(firsts, want);
        }
    }

    #[test]
    fn undersized_source_rejected() {
        let net: Network = build_network(ArchId::Xception2d, &mut Rng::new(2));
        let frames = vec![GrayFrame::filled(48, 48, 3); 4];
        assert!(stream_simulate(frames, &net, WindowSpec::default(), None, None, |_| {}).is_err());
    }
}
