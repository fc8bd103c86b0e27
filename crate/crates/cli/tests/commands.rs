mod common;

use common::*;
use polyfuse_cli::bench::{benchmark, parse_resolution, LatencyStats};
use polyfuse_cli::config::Stages;

#[test]
fn unwrap_command_writes_panorama() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = street(tmp.path(), 320, 240, 1);
    let out = tmp.path().join("pano.png");
    let annular = ds.dir.join("annular.png");
    let base = [
        "unwrap",
        "--calib",
        ds.calibration.to_str().unwrap(),
        "--in",
        annular.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    let args = |width: Option<&'static str>| {
        let mut a = base.to_vec();
        if let Some(w) = width {
            a.extend(["--width", w]);
        }
        a
    };
    assert!(polyfuse(&args(Some("360"))).status.success());
    let pano = image::open(&out).unwrap();
    assert_eq!(pano.width(), 360);
    assert!(pano.height() > 0);

    assert!(polyfuse(&args(None)).status.success());
    assert!(image::open(&out).unwrap().width() > 360);
}

#[test]
fn unwrap_without_pal_section_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = street(tmp.path(), 320, 240, 1);
    let mut cal: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&ds.calibration).unwrap()).unwrap();
    cal.as_object_mut().unwrap().remove("pal");
    std::fs::write(&ds.calibration, cal.to_string()).unwrap();
    let out = polyfuse(&[
        "unwrap",
        "--calib",
        ds.calibration.to_str().unwrap(),
        "--in",
        ds.dir.join("annular.png").to_str().unwrap(),
        "--out",
        tmp.path().join("p.png").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_from_scene_file_matches_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(polyfuse(&["synth", "--preset", "fronto", "--resolution", "64x48", "--seed", "9", "--out", a.to_str().unwrap()])
        .status
        .success());
    let scene = a.join("scene.json");
    assert!(polyfuse(&["synth", "--scene", scene.to_str().unwrap(), "--out", b.to_str().unwrap()])
        .status
        .success());
    for name in ["left.png", "right.png", "labels.png", "depth_gt.png"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    // no polarization camera or PAL in this preset: those stages are off
    let cfg = load_config(&a.join("config.json"));
    assert!(cfg.stages.depth && !cfg.stages.dolp && !cfg.stages.unwrap && !cfg.stages.fuse);
    assert!(run(&a.join("config.json"), &[]).status.success());
}

#[test]
fn synth_rejects_bad_arguments() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(polyfuse(&["synth", "--preset", "moon", "--out", out]).status.code(), Some(2));
    assert_eq!(polyfuse(&["synth", "--resolution", "31x20", "--out", out]).status.code(), Some(2));
    std::fs::write(tmp.path().join("bad.json"), "{}").unwrap();
    let bad = tmp.path().join("bad.json");
    assert_eq!(polyfuse(&["synth", "--scene", bad.to_str().unwrap(), "--out", out]).status.code(), Some(2));
}

#[test]
fn bench_command_reports_fps() {
    let out = polyfuse(&["bench", "--resolution", "64x48", "--frames", "10", "--json"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["frames"], 10);
    assert_eq!(report["stages"].as_array().unwrap().len(), 4);
    assert!(report["fps"].as_f64().unwrap() > 0.0);
    assert_eq!(polyfuse(&["bench", "--frames", "9"]).status.code(), Some(2));
}

#[test]
fn bench_respects_stage_toggles() {
    let stages = Stages {
        depth: false,
        dolp: true,
        unwrap: true,
        fuse: false,
    };
    let r = benchmark(None, stages, 10, 64, 48).unwrap();
    let names: Vec<_> = r.stages.iter().map(|s| s.name).collect();
    assert_eq!(names, ["dolp", "unwrap"]);
    let stages = Stages { dolp: false, ..Stages::default() };
    assert!(benchmark(None, stages, 10, 64, 48).is_err());
}

#[test]
fn latency_percentiles_use_nearest_rank() {
    let samples: Vec<f64> = (1..=20).map(f64::from).collect();
    let s = LatencyStats::from_samples(&samples);
    assert_eq!(s.mean_ms, 10.5);
    assert_eq!(s.median_ms, 10.0);
    assert_eq!(s.p95_ms, 19.0);
}

#[test]
fn resolution_parsing() {
    assert_eq!(parse_resolution("320x240").unwrap(), (320, 240));
    assert_eq!(parse_resolution("640X480").unwrap(), (640, 480));
    for bad in ["320", "x240", "320x", "321x240", "8x8", "axb"] {
        assert!(parse_resolution(bad).is_err(), "{bad}");
    }
}
