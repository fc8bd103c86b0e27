//! Calibration file: camera intrinsics, rig transforms and PAL constants.

use std::path::Path;

use log::warn;
use polyfuse_core::geometry::TransformSpec;
use polyfuse_core::panoramic::DEFAULT_PIXEL_PITCH_MM;
use polyfuse_core::{CameraIntrinsics, PalModel, Pixel, RigidTransform};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Allowed disagreement between the stated baseline and `|t|`, meters.
pub const BASELINE_TOLERANCE: f64 = 1e-6;

/// On-disk layout. `K_polar` describes the full-resolution mosaic sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    #[serde(rename = "K_left")]
    pub k_left: CameraIntrinsics,
    #[serde(rename = "K_right")]
    pub k_right: CameraIntrinsics,
    #[serde(rename = "K_polar", default, skip_serializing_if = "Option::is_none")]
    pub k_polar: Option<CameraIntrinsics>,
    #[serde(rename = "T_left_to_right")]
    pub t_left_to_right: TransformSpec,
    #[serde(rename = "T_left_to_polar", default, skip_serializing_if = "Option::is_none")]
    pub t_left_to_polar: Option<TransformSpec>,
    /// Stereo baseline in meters; must equal `|T_left_to_right.t|`.
    pub baseline: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pal: Option<PalCalibration>,
}

/// PAL section; angles in degrees, lengths in millimeters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PalCalibration {
    pub focal_length_mm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel_pitch_mm: Option<f64>,
    pub center: [f64; 2],
    pub theta_min_deg: f64,
    pub theta_max_deg: f64,
    #[serde(default)]
    pub azimuth_zero_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_aperture: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub distortion: Vec<f64>,
}

impl PalCalibration {
    pub fn to_model(&self) -> CliResult<PalModel> {
        let pixel_pitch = self.pixel_pitch_mm.unwrap_or_else(|| {
            warn!("calibration omits pal.pixel_pitch_mm; assuming {DEFAULT_PIXEL_PITCH_MM} mm");
            DEFAULT_PIXEL_PITCH_MM
        });
        let model = PalModel {
            focal_length: self.focal_length_mm,
            pixel_pitch,
            center: Pixel::new(self.center[0], self.center[1]),
            theta_min: self.theta_min_deg.to_radians(),
            theta_max: self.theta_max_deg.to_radians(),
            azimuth_zero: self.azimuth_zero_deg.to_radians(),
            relative_aperture: self.relative_aperture,
            distortion: self.distortion.clone(),
        };
        model
            .validate()
            .map_err(|e| CliError::config(format!("pal: {e}")))?;
        Ok(model)
    }

    pub fn from_model(model: &PalModel) -> Self {
        Self {
            focal_length_mm: model.focal_length,
            pixel_pitch_mm: Some(model.pixel_pitch),
            center: [model.center.u, model.center.v],
            theta_min_deg: model.theta_min.to_degrees(),
            theta_max_deg: model.theta_max.to_degrees(),
            azimuth_zero_deg: model.azimuth_zero.to_degrees(),
            relative_aperture: model.relative_aperture,
            distortion: model.distortion.clone(),
        }
    }
}

/// Validated calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub k_left: CameraIntrinsics,
    pub k_right: CameraIntrinsics,
    pub k_polar: Option<CameraIntrinsics>,
    pub left_to_right: RigidTransform,
    pub left_to_polar: Option<RigidTransform>,
    pub baseline: f64,
    pub pal: Option<PalModel>,
}

impl CalibrationFile {
    pub fn validate(&self) -> CliResult<Calibration> {
        let cfg = |what: &'static str| move |e: polyfuse_core::Error| CliError::config(format!("{what}: {e}"));
        self.k_left.validate().map_err(cfg("K_left"))?;
        self.k_right.validate().map_err(cfg("K_right"))?;
        if let Some(k) = &self.k_polar {
            k.validate().map_err(cfg("K_polar"))?;
            if k.width % 2 != 0 || k.height % 2 != 0 {
                return Err(CliError::config(format!(
                    "K_polar: mosaic size {}x{} must be even",
                    k.width, k.height
                )));
            }
        }
        let left_to_right = self.t_left_to_right.to_transform().map_err(cfg("T_left_to_right"))?;
        let left_to_polar = self
            .t_left_to_polar
            .as_ref()
            .map(|t| t.to_transform().map_err(cfg("T_left_to_polar")))
            .transpose()?;
        let norm = left_to_right.translation().norm();
        if !((self.baseline - norm).abs() <= BASELINE_TOLERANCE) {
            return Err(CliError::config(format!(
                "baseline {} m disagrees with |T_left_to_right.t| = {norm} m",
                self.baseline
            )));
        }
        Ok(Calibration {
            k_left: self.k_left,
            k_right: self.k_right,
            k_polar: self.k_polar,
            left_to_right,
            left_to_polar,
            baseline: self.baseline,
            pal: self.pal.as_ref().map(PalCalibration::to_model).transpose()?,
        })
    }
}

pub fn load_calibration(path: &Path) -> CliResult<Calibration> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: CalibrationFile = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    file.validate()
}
