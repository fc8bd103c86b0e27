//! Synthetic dataset writer: renders a scene and lays out every input the
//! pipeline reads, plus ground truth and ready-to-run configs.

use std::path::{Path, PathBuf};

use polyfuse_core::polarization::dolp_to_gray8;
use polyfuse_core::synth::{render_scene, SceneRender};
use polyfuse_core::{CameraIntrinsics, SceneSpec};

use crate::calibration::{CalibrationFile, PalCalibration};
use crate::config::{FrameInputs, Params, PipelineConfig, Stages};
use crate::error::{CliError, CliResult};
use crate::io;

pub const LEFT_FILE: &str = "left.png";
pub const RIGHT_FILE: &str = "right.png";
pub const MOSAIC_FILE: &str = "mosaic.png";
pub const ANNULAR_FILE: &str = "annular.png";
pub const LABELS_GT_FILE: &str = "labels.png";
pub const DEPTH_GT_FILE: &str = "depth_gt.png";
pub const DOLP_GT_FILE: &str = "dolp_gt.png";
pub const SCENE_FILE: &str = "scene.json";
pub const CALIBRATION_FILE: &str = "calib.json";
pub const CONFIG_FILE: &str = "config.json";

/// Frame name used in generated configs.
pub const FRAME_NAME: &str = "frame0";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Street,
    FrontoParallel,
}

impl std::str::FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "street" => Ok(Preset::Street),
            "fronto" => Ok(Preset::FrontoParallel),
            other => Err(CliError::config(format!("unknown preset {other:?} (street, fronto)"))),
        }
    }
}

impl Preset {
    pub fn scene(self, width: usize, height: usize, seed: u64) -> SceneSpec {
        match self {
            Preset::Street => SceneSpec::street(width, height, seed),
            Preset::FrontoParallel => {
                let f = 700.0 * width as f64 / 640.0;
                let k = CameraIntrinsics {
                    fx: f,
                    fy: f,
                    cx: width as f64 / 2.0,
                    cy: height as f64 / 2.0,
                    width,
                    height,
                };
                SceneSpec::fronto_parallel(k, 0.063, 3.0, seed)
            }
        }
    }
}

/// Stereo disparity search range that covers the street scene at `width`.
pub fn street_d_range(width: usize) -> [usize; 2] {
    [0, (64 * width).div_ceil(640).max(16)]
}

/// Calibration describing the scene rig exactly.
pub fn calibration_for(spec: &SceneSpec) -> CliResult<CalibrationFile> {
    let rig = &spec.rig;
    let left_to_right = rig
        .left_to_right
        .to_transform()
        .map_err(|e| CliError::config(format!("scene rig: {e}")))?;
    Ok(CalibrationFile {
        k_left: rig.k_left,
        k_right: rig.k_right,
        k_polar: rig.polar.as_ref().map(|p| p.k_sensor),
        t_left_to_right: rig.left_to_right,
        t_left_to_polar: rig.polar.as_ref().map(|p| p.left_to_polar),
        baseline: left_to_right.translation().norm(),
        pal: rig.pal.as_ref().map(|p| PalCalibration::from_model(&p.model)),
    })
}

/// Paths written by [`write_dataset`].
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub calibration: PathBuf,
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("plain data serializes");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

/// Renders `spec` into `dir`. The generated config enables every stage the
/// rig supports and writes pipeline output to `dir/out`.
pub fn write_dataset(spec: &SceneSpec, dir: &Path) -> CliResult<Dataset> {
    let render = render_scene(spec).map_err(|e| CliError::config(format!("scene: {e}")))?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_render(&render, dir)?;

    let calibration = dir.join(CALIBRATION_FILE);
    write_json(&calibration_for(spec)?, &calibration)?;
    write_json(spec, &dir.join(SCENE_FILE))?;

    let has_polar = render.mosaic.is_some();
    let has_pal = render.annulus.is_some();
    let rel = |name: &str| Some(PathBuf::from(name));
    let config = PipelineConfig {
        calibration: PathBuf::from(CALIBRATION_FILE),
        output_dir: PathBuf::from("out"),
        stages: Stages {
            depth: true,
            dolp: has_polar,
            unwrap: has_pal,
            fuse: has_polar,
        },
        params: Params {
            d_range: street_d_range(spec.rig.k_left.width),
            ..Params::default()
        },
        classes: None,
        frames: vec![FrameInputs {
            name: FRAME_NAME.to_string(),
            left: rel(LEFT_FILE),
            right: rel(RIGHT_FILE),
            mosaic: if has_polar { rel(MOSAIC_FILE) } else { None },
            annular: if has_pal { rel(ANNULAR_FILE) } else { None },
            labels: rel(LABELS_GT_FILE),
        }],
    };
    let config_path = dir.join(CONFIG_FILE);
    write_json(&config, &config_path)?;
    Ok(Dataset {
        dir: dir.to_path_buf(),
        config: config_path,
        calibration,
    })
}

fn write_render(render: &SceneRender, dir: &Path) -> CliResult<()> {
    let stereo = &render.stereo;
    io::write_gray8(&io::image_to_gray8(&stereo.left), &dir.join(LEFT_FILE))?;
    io::write_gray8(&io::image_to_gray8(&stereo.right), &dir.join(RIGHT_FILE))?;
    io::write_labels(&stereo.labels, &dir.join(LABELS_GT_FILE))?;
    io::write_depth(&stereo.depth, &dir.join(DEPTH_GT_FILE))?;
    if let Some(m) = &render.mosaic {
        io::write_mosaic(&m.mosaic, &dir.join(MOSAIC_FILE))?;
        io::write_gray8(&dolp_to_gray8(&m.dolp), &dir.join(DOLP_GT_FILE))?;
    }
    if let Some(a) = &render.annulus {
        io::write_rgb8(&io::image_to_rgb8(a), &dir.join(ANNULAR_FILE))?;
    }
    Ok(())
}
