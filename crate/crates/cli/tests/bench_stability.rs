//! Own test binary so no other test competes for the CPU while timing.

use polyfuse_cli::bench::benchmark;
use polyfuse_cli::config::Stages;

/// Shared hosts drift by far more than 10% over a few seconds, so each
/// 10-frame run is paired with an adjacent 20-frame run and the median of
/// the per-pair mean-FPS ratios is compared; drift cancels within a pair.
#[test]
fn doubling_frames_keeps_mean_fps_steady() {
    let mut ratios: Vec<f64> = (0..9)
        .map(|_| {
            let short = benchmark(None, Stages::default(), 10, 320, 240).unwrap().fps;
            let long = benchmark(None, Stages::default(), 20, 320, 240).unwrap().fps;
            long / short
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let median = ratios[ratios.len() / 2];
    assert!((median - 1.0).abs() < 0.10, "median fps ratio {median:.3} ({ratios:.3?})");
}
