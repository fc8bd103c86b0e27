mod common;

use common::*;
use polyfuse_cli::pipeline::{
    DEPTH_FILE, DOLP_COLOR_FILE, DOLP_FILE, LABELS_FILE, OVERLAY_FILE, PANORAMA_FILE, REPORT_FILE,
};
use polyfuse_core::fusion::ClassTable;

fn stderr(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn golden_run_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = street(tmp.path(), 320, 240, 1);
    let out = run(&ds.config, &[]);
    assert!(out.status.success(), "{}", stderr(&out));

    let mut expected = vec![
        DEPTH_FILE,
        DOLP_FILE,
        DOLP_COLOR_FILE,
        PANORAMA_FILE,
        LABELS_FILE,
        OVERLAY_FILE,
        REPORT_FILE,
    ];
    expected.sort();
    assert_eq!(sorted_files(&frame_dir(&ds)), expected);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(frame_dir(&ds).join(REPORT_FILE)).unwrap()).unwrap();
    let stages: Vec<&str> = report["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["name"].as_str().unwrap())
        .collect();
    assert_eq!(stages, ["depth", "dolp", "unwrap", "fuse"]);
    for s in report["stages"].as_array().unwrap() {
        assert!(s["wall_ms"].as_f64().unwrap() >= 0.0);
    }
    assert!(report["stages"][3]["stats"]["water_hazard_pixels"].as_f64().unwrap() > 0.0);
}

#[test]
fn fused_labels_only_turn_road_into_water() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = street(tmp.path(), 320, 240, 2);
    assert!(run(&ds.config, &[]).status.success());
    let table = ClassTable::default();
    let road = table.id("road").unwrap();
    let water = table.id("water_hazard").unwrap();
    let before = image::open(ds.dir.join("labels.png")).unwrap().into_luma8();
    let after = image::open(frame_dir(&ds).join(LABELS_FILE)).unwrap().into_luma8();
    let mut changed = 0;
    for (b, a) in before.pixels().zip(after.pixels()) {
        if a != b {
            assert_eq!((b.0[0], a.0[0]), (road, water));
            changed += 1;
        }
    }
    assert!(changed > 0);
}

#[test]
fn depth_only_writes_depth_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = street(tmp.path(), 320, 240, 1);
    let mut cfg = load_config(&ds.config);
    cfg.stages.dolp = false;
    cfg.stages.unwrap = false;
    cfg.stages.fuse = false;
    save_config(&cfg, &ds.config);
    let out = run(&ds.config, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(sorted_files(&frame_dir(&ds)), [DEPTH_FILE, REPORT_FILE]);
}

#[test]
fn missing_mosaic_fails_before_processing() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = street(tmp.path(), 320, 240, 1);
    std::fs::remove_file(ds.dir.join("mosaic.png")).unwrap();
    let out = run(&ds.config, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("mosaic"), "{}", stderr(&out));
    assert!(!ds.dir.join("out").exists(), "nothing may be written");
}

#[test]
fn fuse_without_dolp_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = street(tmp.path(), 320, 240, 1);
    let mut cfg = load_config(&ds.config);
    cfg.stages.dolp = false;
    save_config(&cfg, &ds.config);
    assert_eq!(run(&ds.config, &[]).status.code(), Some(2));
}

#[test]
fn inconsistent_baseline_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = street(tmp.path(), 320, 240, 1);
    let mut cal: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&ds.calibration).unwrap()).unwrap();
    cal["baseline"] = serde_json::json!(0.07);
    std::fs::write(&ds.calibration, cal.to_string()).unwrap();
    let out = run(&ds.config, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("baseline"));
}

#[test]
fn unreadable_input_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = street(tmp.path(), 320, 240, 1);
    std::fs::write(ds.dir.join("mosaic.png"), b"not a png").unwrap();
    let out = run(&ds.config, &[]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    // depth ran before the mosaic was read and its output is kept
    assert!(frame_dir(&ds).join(DEPTH_FILE).exists());
}

#[test]
fn size_mismatch_names_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = street(tmp.path(), 320, 240, 1);
    image::GrayImage::new(300, 240).save(ds.dir.join("left.png")).unwrap();
    let out = run(&ds.config, &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("stage depth"), "{}", stderr(&out));
}

#[test]
fn unknown_label_fails_fuse_and_keeps_earlier_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = street(tmp.path(), 320, 240, 1);
    let mut labels = image::open(ds.dir.join("labels.png")).unwrap().into_luma8();
    labels.put_pixel(0, 0, image::Luma([200]));
    labels.save(ds.dir.join("labels.png")).unwrap();
    let out = run(&ds.config, &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("stage fuse"), "{}", stderr(&out));
    let files = sorted_files(&frame_dir(&ds));
    for f in [DEPTH_FILE, DOLP_FILE, DOLP_COLOR_FILE, PANORAMA_FILE] {
        assert!(files.iter().any(|x| x == f), "{f} missing from {files:?}");
    }
    assert!(!files.iter().any(|x| x == LABELS_FILE));
}

#[test]
fn identical_runs_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = street(tmp.path(), 320, 240, 4);
    let mut cfg = load_config(&ds.config);
    assert!(run(&ds.config, &[]).status.success());
    cfg.output_dir = "out2".into();
    let second = ds.dir.join("config2.json");
    save_config(&cfg, &second);
    assert!(run(&second, &[]).status.success());
    let a = frame_dir(&ds);
    let b = ds.dir.join("out2").join("frame0");
    for name in sorted_files(&a).iter().filter(|n| n.ends_with(".png")) {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn cli_overrides_take_effect() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = street(tmp.path(), 320, 240, 1);
    // δ = 1 accepts nothing below a perfect DoLP, so almost no road changes
    let strict = run(&ds.config, &["--delta", "1.0", "--lookup", "bilinear", "--demosaic", "bilinear"]);
    assert!(strict.status.success(), "{}", stderr(&strict));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(frame_dir(&ds).join(REPORT_FILE)).unwrap()).unwrap();
    let strict_count = report["stages"][3]["stats"]["water_hazard_pixels"].as_f64().unwrap();
    assert!(run(&ds.config, &["--fill-depth", "median:5"]).status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(frame_dir(&ds).join(REPORT_FILE)).unwrap()).unwrap();
    let filled = report["stages"][3]["stats"]["water_hazard_pixels"].as_f64().unwrap();
    assert!(filled > strict_count, "{filled} vs {strict_count}");

    assert_eq!(run(&ds.config, &["--fill-depth", "median:4"]).status.code(), Some(2));
    assert_eq!(run(&ds.config, &["--delta", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&ds.config, &["--jobs", "0"]).status.code(), Some(2));
}

#[test]
fn frames_run_concurrently_into_separate_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = street(tmp.path(), 320, 240, 1);
    let mut cfg = load_config(&ds.config);
    let mut second = cfg.frames[0].clone();
    second.name = "again".into();
    cfg.frames.push(second);
    save_config(&cfg, &ds.config);
    let out = run(&ds.config, &["--jobs", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let a = ds.dir.join("out/frame0");
    let b = ds.dir.join("out/again");
    for name in [DEPTH_FILE, LABELS_FILE, PANORAMA_FILE] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
    }

    cfg.frames[1].name = "frame0".into();
    save_config(&cfg, &ds.config);
    assert_eq!(run(&ds.config, &[]).status.code(), Some(2));
}

#[test]
fn unknown_config_fields_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = street(tmp.path(), 320, 240, 1);
    let mut cfg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&ds.config).unwrap()).unwrap();
    cfg["params"]["block_radiu"] = serde_json::json!(3);
    std::fs::write(&ds.config, cfg.to_string()).unwrap();
    assert_eq!(run(&ds.config, &[]).status.code(), Some(2));
}
