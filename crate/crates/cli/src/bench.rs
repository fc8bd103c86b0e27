//! Throughput benchmark on in-memory synthetic frames.

use std::time::Instant;

use polyfuse_core::synth::render_scene;
use polyfuse_core::SceneSpec;
use serde::Serialize;

use crate::calibration::Calibration;
use crate::config::{Params, Stages};
use crate::dataset::{calibration_for, street_d_range};
use crate::error::{CliError, CliResult};
use crate::pipeline::Engine;

pub const MIN_FRAMES: usize = 10;

#[derive(Debug, Clone, Serialize)]
pub struct LatencyStats {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
}

impl LatencyStats {
    /// Nearest-rank percentiles over `samples` (milliseconds).
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let rank = |p: f64| s[((p * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1];
        Self {
            mean_ms: s.iter().sum::<f64>() / s.len() as f64,
            median_ms: rank(0.5),
            p95_ms: rank(0.95),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageLatency {
    pub name: &'static str,
    #[serde(flatten)]
    pub stats: LatencyStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub stages: Vec<StageLatency>,
    pub end_to_end: LatencyStats,
    /// Frames per second from the mean end-to-end latency.
    pub fps: f64,
}

/// Parses `WxH`.
pub fn parse_resolution(s: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::config(format!("resolution {s:?} is not WxH"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    if w < 16 || h < 16 || !w.is_multiple_of(2) || !h.is_multiple_of(2) {
        return Err(CliError::config(format!("resolution {w}x{h} must be even and at least 16x16")));
    }
    Ok((w, h))
}

/// Renders the street scene once at `width`×`height`, then times the
/// enabled stages over `frames` passes. Only in-memory stage execution is
/// timed; one untimed warm-up pass runs first.
pub fn benchmark(params: Option<Params>, stages: Stages, frames: usize, width: usize, height: usize) -> CliResult<BenchReport> {
    if frames < MIN_FRAMES {
        return Err(CliError::config(format!("bench needs at least {MIN_FRAMES} frames, got {frames}")));
    }
    if stages.fuse && !(stages.depth && stages.dolp) {
        return Err(CliError::config("stage fuse requires stages depth and dolp"));
    }
    let spec = SceneSpec::street(width, height, 7);
    let params = params.unwrap_or_else(|| Params {
        d_range: street_d_range(width),
        ..Params::default()
    });
    let calibration: Calibration = calibration_for(&spec)?.validate()?;
    let engine = Engine::new(calibration, params, stages, Default::default())?;
    let render = render_scene(&spec).map_err(|e| CliError::config(format!("scene: {e}")))?;
    let left = &render.stereo.left;
    let right = &render.stereo.right;
    let labels = &render.stereo.labels;
    let mosaic = &render.mosaic.as_ref().expect("street scene has a polarization camera").mosaic;
    let annulus = render.annulus.as_ref().expect("street scene has a panoramic lens");

    let names: Vec<&'static str> = [
        (stages.depth, "depth"),
        (stages.dolp, "dolp"),
        (stages.unwrap, "unwrap"),
        (stages.fuse, "fuse"),
    ]
    .into_iter()
    .filter_map(|(on, n)| on.then_some(n))
    .collect();
    let mut per_stage = vec![Vec::with_capacity(frames); names.len()];
    let mut total = Vec::with_capacity(frames);

    for pass in 0..=frames {
        let mut times = Vec::with_capacity(names.len());
        let mut clock = Instant::now();
        let mut lap = |times: &mut Vec<f64>| {
            times.push(clock.elapsed().as_secs_f64() * 1e3);
            clock = Instant::now();
        };
        let depth = if stages.depth {
            let d = engine.depth(left, right)?;
            lap(&mut times);
            Some(d)
        } else {
            None
        };
        let polar = if stages.dolp {
            let p = engine.dolp(mosaic)?;
            lap(&mut times);
            Some(p)
        } else {
            None
        };
        if stages.unwrap {
            std::hint::black_box(engine.unwrap(annulus)?);
            lap(&mut times);
        }
        if let (true, Some(d), Some(p)) = (stages.fuse, &depth, &polar) {
            std::hint::black_box(engine.fuse(labels, d, p)?);
            lap(&mut times);
        }
        if pass == 0 {
            continue;
        }
        total.push(times.iter().sum());
        for (acc, t) in per_stage.iter_mut().zip(times) {
            acc.push(t);
        }
    }

    let end_to_end = LatencyStats::from_samples(&total);
    Ok(BenchReport {
        width,
        height,
        frames,
        stages: names
            .into_iter()
            .zip(&per_stage)
            .map(|(name, s)| StageLatency {
                name,
                stats: LatencyStats::from_samples(s),
            })
            .collect(),
        fps: 1e3 / end_to_end.mean_ms,
        end_to_end,
    })
}
