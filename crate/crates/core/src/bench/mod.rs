//! Batch-1 latency measurement and the streaming ring-buffer simulator.

mod stream;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use stream::{stream_simulate, Emission, StreamReport};

use crate::arch::{ArchId, Network};
use crate::error::{Error, Result};
use crate::layers::Module;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// A millisecond clock. Injectable so statistics can be tested against
/// scripted timings.
pub trait Clock {
    fn now_ms(&mut self) -> f64;
}

#[derive(Clone, Copy, Debug)]
pub struct MonotonicClock {
    origin: Instant,
}

impl Default for MonotonicClock {
    fn default() -> Self {
        MonotonicClock { origin: Instant::now() }
    }
}

impl Clock for MonotonicClock {
    fn now_ms(&mut self) -> f64 {
        self.origin.elapsed().as_secs_f64() * 1e3
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub p99: f64,
    pub min: f64,
    pub max: f64,
}

impl LatencyStats {
    /// Median averages the two middle values of an even series;
    /// percentiles use the nearest-rank rule.
    pub fn from_series(series: &[f64]) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::InvalidArgument("no latency samples".into()));
        }
        if series.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "latency sample".into() });
        }
        let mut s = series.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median = if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 };
        Ok(LatencyStats {
            mean: s.iter().sum::<f64>() / n as f64,
            median,
            p95: nearest_rank(&s, 95.0),
            p99: nearest_rank(&s, 99.0),
            min: s[0],
            max: s[n - 1],
        })
    }
}

/// Smallest value with at least `p` percent of the sorted series at or below it.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Times `op` `runs` times after `warmup` untimed calls.
pub fn measure(runs: usize, warmup: usize, clock: &mut impl Clock, mut op: impl FnMut() -> Result<()>) -> Result<Vec<f64>> {
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be positive".into()));
    }
    for _ in 0..warmup {
        op()?;
    }
    let mut out = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = clock.now_ms();
        op()?;
        out.push(clock.now_ms() - start);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub arch: ArchId,
    pub runs: usize,
    pub warmup: usize,
    pub latencies_ms: Vec<f64>,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub hardware: String,
}

impl BenchReport {
    pub fn from_series(arch: ArchId, warmup: usize, latencies_ms: Vec<f64>) -> Result<Self> {
        let s = LatencyStats::from_series(&latencies_ms)?;
        Ok(BenchReport {
            arch,
            runs: latencies_ms.len(),
            warmup,
            latencies_ms,
            mean_ms: s.mean,
            median_ms: s.median,
            p95_ms: s.p95,
            p99_ms: s.p99,
            hardware: hardware_descriptor(),
        })
    }
}

/// CPU model and target triple components, for labelling reports.
pub fn hardware_descriptor() -> String {
    let model = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|info| {
            info.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_string())
        })
        .unwrap_or_else(|| "unknown cpu".into());
    format!("{model}; {}-{}; single thread", std::env::consts::ARCH, std::env::consts::OS)
}

/// Single-threaded batch-1 forward latency on a fixed random input.
pub fn bench_inference(net: &Network, runs: usize, warmup: usize) -> Result<BenchReport> {
    let mut shape = vec![1];
    shape.extend(net.arch().input_shape());
    let mut rng = Rng::new(0);
    let x = Tensor::from_fn(&shape, |_| rng.uniform() as f32);
    let series = measure(runs, warmup, &mut MonotonicClock::default(), || net.forward(&x).map(drop))?;
    BenchReport::from_series(net.arch(), warmup, series)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scripted {
        ticks: Vec<f64>,
        at: usize,
    }

    impl Clock for Scripted {
        fn now_ms(&mut self) -> f64 {
            self.at += 1;
            self.ticks[self.at - 1]
        }
    }

    #[test]
    fn injected_series() {
        let mut clock = Scripted {
            ticks: vec![0.0, 1.0, 10.0, 12.0, 20.0, 23.0],
            at: 0,
        };
        let mut calls = 0;
        let series = measure(3, 2, &mut clock, || {
            calls += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(calls, 5);
        assert_eq!(series, vec![1.0, 2.0, 3.0]);
        let s = LatencyStats::from_series(&series).unwrap();
        assert_eq!((s.mean, s.median, s.min, s.max), (2.0, 2.0, 1.0, 3.0));
    }

    #[test]
    fn percentiles() {
        let series: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        let s = LatencyStats::from_series(&series).unwrap();
        assert_eq!((s.p95, s.p99, s.median), (95.0, 99.0, 50.5));
        assert_eq!(nearest_rank(&[4.0], 99.0), 4.0);
        assert!(LatencyStats::from_series(&[]).is_err());
    }

    #[test]
    fn bench_small_network() {
        let net: Network = crate::arch::build_network(ArchId::Xception2d, &mut Rng::new(1));
        let r = bench_inference(&net, 3, 1).unwrap();
        assert_eq!(r.runs, 3);
        assert_eq!(r.latencies_ms.len(), 3);
        assert!(r.mean_ms > 0.0);
    }
}
