//! Stage execution: depth, dolp, unwrap and fuse.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use image::RgbImage;
use log::{debug, info};
use polyfuse_core::fusion::{fill_depth_median, ClassTable};
use polyfuse_core::polarization::{dolp_pseudocolor, dolp_to_gray8};
use polyfuse_core::stereo::DepthMap;
use polyfuse_core::{
    build_rectification, build_unwrap, detect_water, disparity_to_depth, match_disparity,
    overlay_visualization, rectify_image, unwrap_image, CameraIntrinsics, DemosaicMode, Image,
    LabelMap, MosaicFrame, MosaicLayout, PolarizationFrame, Rectification, RegistrationRig,
    RigidTransform, UnwrapMapping, WaterParams,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::calibration::{load_calibration, Calibration};
use crate::config::{Params, PipelineConfig, Stages};
use crate::error::{CliError, CliResult};
use crate::io;

pub const DEPTH_FILE: &str = "depth.png";
pub const DOLP_FILE: &str = "dolp.png";
pub const DOLP_COLOR_FILE: &str = "dolp_color.png";
pub const PANORAMA_FILE: &str = "panorama.png";
pub const LABELS_FILE: &str = "labels_fused.png";
pub const OVERLAY_FILE: &str = "overlay.png";
pub const REPORT_FILE: &str = "report.json";

/// Precomputed per-rig state shared by all frames.
pub struct Engine {
    pub calibration: Calibration,
    pub params: Params,
    pub stages: Stages,
    pub classes: ClassTable,
    rectification: Option<Rectification>,
    unwrap: Option<UnwrapMapping>,
    fusion_rig: Option<RegistrationRig>,
}

#[derive(Debug, Clone)]
pub struct DepthOutput {
    /// Left image resampled into the rectified frame.
    pub rectified_left: Image,
    pub depth: DepthMap,
}

#[derive(Debug, Clone)]
pub struct FuseOutput {
    pub labels: LabelMap,
    pub overlay: RgbImage,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub name: &'static str,
    pub wall_ms: f64,
    pub stats: BTreeMap<&'static str, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameReport {
    pub frame: String,
    pub stages: Vec<StageReport>,
    pub artifacts: Vec<String>,
}

impl Engine {
    pub fn new(calibration: Calibration, params: Params, stages: Stages, classes: ClassTable) -> CliResult<Self> {
        params.validate()?;
        let cfg = |what: &'static str| move |e: polyfuse_core::Error| CliError::config(format!("{what}: {e}"));
        let rectification = if stages.depth {
            Some(
                build_rectification(&calibration.k_left, &calibration.k_right, &calibration.left_to_right)
                    .map_err(cfg("rectification"))?,
            )
        } else {
            None
        };
        let unwrap = if stages.unwrap {
            let model = calibration
                .pal
                .as_ref()
                .ok_or_else(|| CliError::config("stage unwrap needs a pal section in the calibration"))?;
            let width = params.unwrap_width.unwrap_or_else(|| model.default_unwrap_width());
            Some(build_unwrap(model, width).map_err(cfg("pal"))?)
        } else {
            None
        };
        let fusion_rig = match (&rectification, stages.fuse) {
            (Some(rect), true) => {
                let (Some(k_polar), Some(left_to_polar)) = (calibration.k_polar, calibration.left_to_polar) else {
                    return Err(CliError::config("stage fuse needs K_polar and T_left_to_polar"));
                };
                Some(fusion_rig(rect, &k_polar, &left_to_polar, params.demosaic))
            }
            (None, true) => return Err(CliError::config("stage fuse requires stage depth")),
            _ => None,
        };
        if stages.dolp && calibration.k_polar.is_none() && stages.fuse {
            return Err(CliError::config("stage dolp needs K_polar"));
        }
        Ok(Self {
            calibration,
            params,
            stages,
            classes,
            rectification,
            unwrap,
            fusion_rig,
        })
    }

    pub fn rectification(&self) -> Option<&Rectification> {
        self.rectification.as_ref()
    }

    pub fn fusion_rig(&self) -> Option<&RegistrationRig> {
        self.fusion_rig.as_ref()
    }

    pub fn depth(&self, left: &Image, right: &Image) -> CliResult<DepthOutput> {
        const STAGE: &str = "depth";
        let err = |e| CliError::processing(STAGE, e);
        let rect = self
            .rectification
            .as_ref()
            .ok_or_else(|| CliError::config("depth stage disabled").in_stage(STAGE))?;
        let cal = &self.calibration;
        let gray = |img: &Image| if img.channels() == 1 { img.clone() } else { img.to_gray() };
        let left_rect = rectify_image(left, &rect.left_rotation, &cal.k_left, &rect.k_rect, 0.0).map_err(err)?;
        let right_rect = rectify_image(&gray(right), &rect.right_rotation, &cal.k_right, &rect.k_rect, 0.0).map_err(err)?;
        let disparity = match_disparity(&gray(&left_rect), &right_rect, &self.params.match_params()).map_err(err)?;
        let z = self.params.z_range;
        let depth = disparity_to_depth(&disparity, rect.k_rect.fx, rect.baseline, (z[0], z[1])).map_err(err)?;
        Ok(DepthOutput {
            rectified_left: left_rect,
            depth,
        })
    }

    pub fn dolp(&self, mosaic: &MosaicFrame) -> CliResult<PolarizationFrame> {
        const STAGE: &str = "dolp";
        if let Some(k) = &self.calibration.k_polar {
            if mosaic.dims() != (k.width, k.height) {
                return Err(CliError::processing(
                    STAGE,
                    format!("mosaic is {:?} but K_polar is {}x{}", mosaic.dims(), k.width, k.height),
                ));
            }
        }
        PolarizationFrame::from_mosaic(mosaic, self.params.demosaic, self.params.dolp_epsilon)
            .map_err(|e| CliError::processing(STAGE, e))
    }

    pub fn unwrap(&self, annular: &Image) -> CliResult<Image> {
        const STAGE: &str = "unwrap";
        let mapping = self
            .unwrap
            .as_ref()
            .ok_or_else(|| CliError::config("unwrap stage disabled").in_stage(STAGE))?;
        unwrap_image(annular, mapping, self.params.unwrap_interp, 0.0).map_err(|e| CliError::processing(STAGE, e))
    }

    pub fn fuse(&self, labels: &LabelMap, depth: &DepthOutput, polar: &PolarizationFrame) -> CliResult<FuseOutput> {
        const STAGE: &str = "fuse";
        let err = |e| CliError::processing(STAGE, e);
        let rig = self
            .fusion_rig
            .as_ref()
            .ok_or_else(|| CliError::config("fuse stage disabled").in_stage(STAGE))?;
        labels.validate(&self.classes).map_err(err)?;
        let filled;
        let depth_map = match self.params.fill_depth {
            Some(fill) => {
                filled = fill_depth_median(&depth.depth, fill.window).map_err(err)?;
                &filled
            }
            None => &depth.depth,
        };
        let water = WaterParams::from_table(&self.classes, self.params.delta, self.params.lookup).map_err(err)?;
        let fused = detect_water(labels, depth_map, &polar.dolp, rig, &water).map_err(err)?;
        let overlay = overlay_visualization(&depth.rectified_left, &fused, &self.classes, self.params.overlay_alpha)
            .map_err(err)?;
        Ok(FuseOutput { labels: fused, overlay })
    }
}

/// Registration from the rectified left frame into the DoLP image. In
/// superpixel mode the DoLP plane lives on the 2×2-binned sensor grid.
pub fn fusion_rig(
    rect: &Rectification,
    k_polar: &CameraIntrinsics,
    left_to_polar: &RigidTransform,
    demosaic: DemosaicMode,
) -> RegistrationRig {
    let unrectify = RigidTransform::from_rotation(rect.left_rotation.transpose())
        .expect("transpose of a rotation is a rotation");
    RegistrationRig {
        k_color: rect.k_rect,
        k_polar: match demosaic {
            DemosaicMode::Superpixel => k_polar.binned_2x2(),
            DemosaicMode::Bilinear => *k_polar,
        },
        color_to_polar: left_to_polar.compose(&unrectify),
    }
}

fn depth_stats(depth: &DepthMap) -> BTreeMap<&'static str, f64> {
    let mut valid: Vec<f32> = depth.depth.as_slice().iter().copied().filter(|z| z.is_finite()).collect();
    valid.sort_by(f32::total_cmp);
    let total = depth.depth.as_slice().len().max(1) as f64;
    let mut stats = BTreeMap::from([("valid_fraction", valid.len() as f64 / total)]);
    if !valid.is_empty() {
        stats.insert("min_m", valid[0] as f64);
        stats.insert("median_m", valid[valid.len() / 2] as f64);
        stats.insert("max_m", valid[valid.len() - 1] as f64);
    }
    stats
}

fn dolp_stats(frame: &PolarizationFrame, delta: f64) -> BTreeMap<&'static str, f64> {
    let valid: Vec<f64> = frame.dolp.as_slice().iter().copied().filter(|d| d.is_finite()).collect();
    let total = frame.dolp.as_slice().len().max(1) as f64;
    let n = valid.len().max(1) as f64;
    BTreeMap::from([
        ("valid_fraction", valid.len() as f64 / total),
        ("mean_dolp", valid.iter().sum::<f64>() / n),
        ("fraction_at_or_above_delta", valid.iter().filter(|&&d| d >= delta).count() as f64 / n),
        ("max_residual", frame.residual.as_slice().iter().fold(0.0f64, |a, &r| a.max(r))),
    ])
}

fn fuse_stats(before: &LabelMap, after: &LabelMap, road: u8, water: u8) -> BTreeMap<&'static str, f64> {
    let road_in = before.labels.as_slice().iter().filter(|&&c| c == road).count();
    let water_out = after
        .labels
        .as_slice()
        .iter()
        .zip(before.labels.as_slice())
        .filter(|(&a, &b)| a == water && b != water)
        .count();
    BTreeMap::from([
        ("road_pixels", road_in as f64),
        ("water_hazard_pixels", water_out as f64),
    ])
}

fn timed<T>(f: impl FnOnce() -> CliResult<T>) -> CliResult<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64() * 1e3))
}

/// Runs every enabled stage on one frame, writing artifacts as each stage
/// finishes so completed stages survive a later failure.
fn run_frame(engine: &Engine, frame: &crate::config::FrameInputs, out_dir: &Path) -> CliResult<FrameReport> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let stages = engine.stages;
    let mut report = FrameReport {
        frame: frame.name.clone(),
        stages: Vec::new(),
        artifacts: Vec::new(),
    };
    let input = |p: &Option<PathBuf>| p.clone().expect("validated before processing");
    let written = |name: &str, report: &mut FrameReport| {
        report.artifacts.push(name.to_string());
        out_dir.join(name)
    };

    let depth = if stages.depth {
        let left = io::read_image(&input(&frame.left))?;
        let right = io::read_image(&input(&frame.right))?;
        let (out, ms) = timed(|| engine.depth(&left, &right))?;
        io::write_depth(&out.depth, &written(DEPTH_FILE, &mut report))?;
        report.stages.push(StageReport {
            name: "depth",
            wall_ms: ms,
            stats: depth_stats(&out.depth),
        });
        Some(out)
    } else {
        None
    };

    let polar = if stages.dolp {
        let mosaic = io::read_mosaic(&input(&frame.mosaic), MosaicLayout::default())?;
        let (out, ms) = timed(|| engine.dolp(&mosaic))?;
        io::write_gray8(&dolp_to_gray8(&out.dolp), &written(DOLP_FILE, &mut report))?;
        io::write_rgb8(&dolp_pseudocolor(&out.dolp), &written(DOLP_COLOR_FILE, &mut report))?;
        report.stages.push(StageReport {
            name: "dolp",
            wall_ms: ms,
            stats: dolp_stats(&out, engine.params.delta),
        });
        Some(out)
    } else {
        None
    };

    if stages.unwrap {
        let annular = io::read_image(&input(&frame.annular))?;
        let (pano, ms) = timed(|| engine.unwrap(&annular))?;
        io::write_rgb8(&io::image_to_rgb8(&pano), &written(PANORAMA_FILE, &mut report))?;
        report.stages.push(StageReport {
            name: "unwrap",
            wall_ms: ms,
            stats: BTreeMap::from([("width", pano.width() as f64), ("height", pano.height() as f64)]),
        });
    }

    if stages.fuse {
        let (Some(depth), Some(polar)) = (&depth, &polar) else {
            return Err(CliError::config("stage fuse requires stages depth and dolp"));
        };
        let labels = io::read_labels(&input(&frame.labels))?;
        let (out, ms) = timed(|| engine.fuse(&labels, depth, polar))?;
        io::write_labels(&out.labels, &written(LABELS_FILE, &mut report))?;
        io::write_rgb8(&out.overlay, &written(OVERLAY_FILE, &mut report))?;
        let road = engine.classes.id("road").unwrap_or_default();
        let water = engine.classes.id("water_hazard").unwrap_or_default();
        report.stages.push(StageReport {
            name: "fuse",
            wall_ms: ms,
            stats: fuse_stats(&labels, &out.labels, road, water),
        });
    }

    let path = out_dir.join(REPORT_FILE);
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    info!(
        "frame {}: {}",
        frame.name,
        report
            .stages
            .iter()
            .map(|s| format!("{} {:.1} ms", s.name, s.wall_ms))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(report)
}

/// Validates the configuration, then processes all frames. Artifacts for
/// frame `name` go to `output_dir/name/`.
pub fn run_pipeline(config: &PipelineConfig, jobs: Option<usize>) -> CliResult<Vec<FrameReport>> {
    config.validate()?;
    let calibration = load_calibration(&config.calibration)?;
    let classes = config.class_table()?;
    let engine = Engine::new(calibration, config.params, config.stages, classes)?;
    debug!("validated {} frame(s)", config.frames.len());

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    pool.install(|| {
        config
            .frames
            .par_iter()
            .map(|f| run_frame(&engine, f, &config.output_dir.join(&f.name)))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    })
}

/// Standalone unwrap of one annular PNG with the calibration's PAL model.
pub fn unwrap_file(
    calibration: &Path,
    input: &Path,
    output: &Path,
    width: Option<usize>,
    interp: polyfuse_core::Interpolation,
) -> CliResult<(usize, usize)> {
    let cal = load_calibration(calibration)?;
    let model = cal
        .pal
        .ok_or_else(|| CliError::config(format!("{}: no pal section", calibration.display())))?;
    let width = width.unwrap_or_else(|| model.default_unwrap_width());
    let mapping = build_unwrap(&model, width).map_err(|e| CliError::config(format!("pal: {e}")))?;
    let annular = io::read_image(input)?;
    let pano = unwrap_image(&annular, &mapping, interp, 0.0).map_err(|e| CliError::processing("unwrap", e))?;
    io::write_rgb8(&io::image_to_rgb8(&pano), output)?;
    Ok(pano.dims())
}
