//! Pipeline configuration file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use polyfuse_core::fusion::{ClassTable, DEFAULT_WATER_DELTA};
use polyfuse_core::polarization::DEFAULT_DOLP_EPSILON;
use polyfuse_core::stereo::{DEFAULT_Z_MAX, DEFAULT_Z_MIN};
use polyfuse_core::{DemosaicMode, Interpolation, MatchParams};
use serde::{Deserialize, Serialize};

use crate::error::{resolve, CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Calibration JSON; relative paths resolve against the config file.
    pub calibration: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub stages: Stages,
    #[serde(default)]
    pub params: Params,
    /// Optional class table JSON; the built-in table is used otherwise.
    #[serde(default)]
    pub classes: Option<PathBuf>,
    pub frames: Vec<FrameInputs>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stages {
    #[serde(default = "yes")]
    pub depth: bool,
    #[serde(default = "yes")]
    pub dolp: bool,
    #[serde(default = "yes")]
    pub unwrap: bool,
    #[serde(default = "yes")]
    pub fuse: bool,
}

fn yes() -> bool {
    true
}

impl Default for Stages {
    fn default() -> Self {
        Self {
            depth: true,
            dolp: true,
            unwrap: true,
            fuse: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub block_radius: usize,
    pub d_range: [usize; 2],
    pub texture_threshold: f64,
    pub z_range: [f64; 2],
    pub delta: f64,
    pub demosaic: DemosaicMode,
    pub lookup: Interpolation,
    pub dolp_epsilon: f64,
    /// Unwrapped panorama width; defaults to the mid-annulus circumference.
    pub unwrap_width: Option<usize>,
    pub unwrap_interp: Interpolation,
    pub fill_depth: Option<DepthFill>,
    pub overlay_alpha: f64,
}

impl Default for Params {
    fn default() -> Self {
        let m = MatchParams::default();
        Self {
            block_radius: m.block_radius,
            d_range: [m.min_disparity, m.max_disparity],
            texture_threshold: m.texture_threshold,
            z_range: [DEFAULT_Z_MIN, DEFAULT_Z_MAX],
            delta: DEFAULT_WATER_DELTA,
            demosaic: DemosaicMode::Superpixel,
            lookup: Interpolation::Nearest,
            dolp_epsilon: DEFAULT_DOLP_EPSILON,
            unwrap_width: None,
            unwrap_interp: Interpolation::Bilinear,
            fill_depth: None,
            overlay_alpha: 0.5,
        }
    }
}

impl Params {
    pub fn match_params(&self) -> MatchParams {
        MatchParams {
            block_radius: self.block_radius,
            min_disparity: self.d_range[0],
            max_disparity: self.d_range[1],
            texture_threshold: self.texture_threshold,
            ..MatchParams::default()
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.d_range[0] > self.d_range[1] {
            return Err(CliError::config(format!("d_range {:?} is decreasing", self.d_range)));
        }
        if !(self.z_range[0] > 0.0 && self.z_range[0] < self.z_range[1]) {
            return Err(CliError::config(format!("z_range {:?} is invalid", self.z_range)));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(CliError::config(format!("delta {} outside [0, 1]", self.delta)));
        }
        if !(0.0..=1.0).contains(&self.overlay_alpha) {
            return Err(CliError::config(format!("overlay_alpha {} outside [0, 1]", self.overlay_alpha)));
        }
        if !(self.dolp_epsilon > 0.0) {
            return Err(CliError::config("dolp_epsilon must be positive"));
        }
        if self.unwrap_width == Some(0) {
            return Err(CliError::config("unwrap_width must be at least 1"));
        }
        Ok(())
    }
}

/// `median:k` infill of invalid depth before fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DepthFill {
    pub window: usize,
}

impl FromStr for DepthFill {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let k = s
            .strip_prefix("median:")
            .ok_or_else(|| format!("expected median:k, got {s:?}"))?;
        let window: usize = k.parse().map_err(|_| format!("bad window size {k:?}"))?;
        if window == 0 || window.is_multiple_of(2) {
            return Err(format!("median window must be odd, got {window}"));
        }
        Ok(Self { window })
    }
}

impl TryFrom<String> for DepthFill {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<DepthFill> for String {
    fn from(f: DepthFill) -> String {
        format!("median:{}", f.window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameInputs {
    pub name: String,
    #[serde(default)]
    pub left: Option<PathBuf>,
    #[serde(default)]
    pub right: Option<PathBuf>,
    #[serde(default)]
    pub mosaic: Option<PathBuf>,
    #[serde(default)]
    pub annular: Option<PathBuf>,
    /// Label map aligned to the rectified left image.
    #[serde(default)]
    pub labels: Option<PathBuf>,
}

impl PipelineConfig {
    /// Reads a config and resolves every relative path against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        self.calibration = resolve(base, &self.calibration);
        self.output_dir = resolve(base, &self.output_dir);
        if let Some(c) = &mut self.classes {
            *c = resolve(base, c);
        }
        for f in &mut self.frames {
            for p in [&mut f.left, &mut f.right, &mut f.mosaic, &mut f.annular, &mut f.labels]
                .into_iter()
                .flatten()
            {
                *p = resolve(base, p);
            }
        }
    }

    /// Checks stage dependencies and that every required input exists.
    pub fn validate(&self) -> CliResult<()> {
        self.params.validate()?;
        let s = &self.stages;
        if s.fuse && !(s.depth && s.dolp) {
            return Err(CliError::config("stage fuse requires stages depth and dolp"));
        }
        if self.frames.is_empty() {
            return Err(CliError::config("no frames configured"));
        }
        let mut names = std::collections::HashSet::new();
        for f in &self.frames {
            if f.name.is_empty() || f.name.contains(['/', '\\']) || f.name == "." || f.name == ".." {
                return Err(CliError::config(format!("invalid frame name {:?}", f.name)));
            }
            if !names.insert(&f.name) {
                return Err(CliError::config(format!("duplicate frame name {:?}", f.name)));
            }
            let need = |enabled: bool, input: &Option<PathBuf>, what: &str, stage: &str| -> CliResult<()> {
                if !enabled {
                    return Ok(());
                }
                match input {
                    None => Err(CliError::config(format!(
                        "frame {}: stage {stage} needs a {what} input",
                        f.name
                    ))),
                    Some(p) if !p.is_file() => Err(CliError::config(format!(
                        "frame {}: {what} input {} does not exist",
                        f.name,
                        p.display()
                    ))),
                    Some(_) => Ok(()),
                }
            };
            need(s.depth, &f.left, "left", "depth")?;
            need(s.depth, &f.right, "right", "depth")?;
            need(s.dolp, &f.mosaic, "mosaic", "dolp")?;
            need(s.unwrap, &f.annular, "annular", "unwrap")?;
            need(s.fuse, &f.labels, "labels", "fuse")?;
        }
        Ok(())
    }

    pub fn class_table(&self) -> CliResult<ClassTable> {
        let table = match &self.classes {
            None => ClassTable::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
            }
        };
        table
            .validate()
            .map_err(|e| CliError::config(format!("class table: {e}")))?;
        Ok(table)
    }
}
