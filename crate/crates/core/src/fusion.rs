//! Color/polarization registration and water-hazard relabeling.
//!
//! A road pixel of the color camera with a valid depth is reprojected into
//! the DoLP image; if it lands inside and the DoLP there reaches the
//! threshold, the pixel becomes a water hazard.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{backproject, transform_point, CameraIntrinsics, Pixel, RigidTransform};
use crate::plane::{bilinear_taps, Image, Interpolation, Plane};
use crate::stereo::DepthMap;

pub const DEFAULT_WATER_DELTA: f64 = 0.6;
pub const VOID_ID: u8 = 255;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: u8,
    pub name: String,
    pub color: [u8; 3],
}

/// Ordered class list used to interpret label maps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTable {
    pub classes: Vec<ClassEntry>,
}

impl Default for ClassTable {
    fn default() -> Self {
        let entry = |id, name: &str, color| ClassEntry {
            id,
            name: name.to_string(),
            color,
        };
        ClassTable {
            classes: vec![
                entry(0, "road", [128, 64, 128]),
                entry(1, "sidewalk", [244, 35, 232]),
                entry(8, "vegetation", [107, 142, 35]),
                entry(9, "terrain", [152, 251, 152]),
                entry(10, "sky", [70, 130, 180]),
                entry(11, "person", [220, 20, 60]),
                entry(13, "car", [0, 0, 142]),
                entry(19, "water_hazard", [0, 0, 255]),
                entry(VOID_ID, "void", [0, 0, 0]),
            ],
        }
    }
}

impl ClassTable {
    pub fn validate(&self) -> Result<()> {
        let mut seen = [false; 256];
        for c in &self.classes {
            if std::mem::replace(&mut seen[c.id as usize], true) {
                return Err(Error::InvalidParameter(format!("duplicate class id {}", c.id)));
            }
        }
        for required in ["road", "water_hazard", "void"] {
            self.id(required).ok_or_else(|| {
                Error::InvalidParameter(format!("class table lacks '{required}'"))
            })?;
        }
        if self.id("void") != Some(VOID_ID) {
            return Err(Error::InvalidParameter("void must use id 255".into()));
        }
        Ok(())
    }

    pub fn id(&self, name: &str) -> Option<u8> {
        self.classes.iter().find(|c| c.name == name).map(|c| c.id)
    }

    pub fn get(&self, id: u8) -> Option<&ClassEntry> {
        self.classes.iter().find(|c| c.id == id)
    }

    pub fn contains(&self, id: u8) -> bool {
        self.get(id).is_some()
    }
}

/// Per-pixel class ids aligned to the color camera.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub labels: Plane<u8>,
}

impl LabelMap {
    pub fn new(labels: Plane<u8>) -> Self {
        Self { labels }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.labels.dims()
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels.get(x, y)
    }

    pub fn validate(&self, table: &ClassTable) -> Result<()> {
        match self.labels.as_slice().iter().find(|&&id| !table.contains(id)) {
            Some(id) => Err(Error::InvalidParameter(format!(
                "label id {id} not in class table"
            ))),
            None => Ok(()),
        }
    }
}

/// Color and polarization cameras plus the color→polarization transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationRig {
    pub k_color: CameraIntrinsics,
    pub k_polar: CameraIntrinsics,
    pub color_to_polar: RigidTransform,
}

impl RegistrationRig {
    pub fn identity(k: CameraIntrinsics) -> Self {
        Self {
            k_color: k,
            k_polar: k,
            color_to_polar: RigidTransform::identity(),
        }
    }
}

/// Maps a color pixel with optical-axis depth `z` into the polarization
/// image. No bounds check is applied to the result. A co-located rig with
/// equal intrinsics returns `u_color` bit for bit.
pub fn reproject_pixel(rig: &RegistrationRig, u_color: &Pixel, z: f64) -> Result<Pixel> {
    let p = backproject(&rig.k_color, u_color, z)?;
    if rig.k_color == rig.k_polar && rig.color_to_polar == RigidTransform::identity() {
        return Ok(*u_color);
    }
    let q = transform_point(&rig.color_to_polar, &p);
    if !(q.z > 0.0) {
        return Err(Error::BehindCamera(q.z));
    }
    let k = &rig.k_polar;
    Ok(Pixel::new(k.fx * q.x / q.z + k.cx, k.fy * q.y / q.z + k.cy))
}

/// Samples a DoLP plane at a continuous coordinate inside
/// `[0, w-1] x [0, h-1]`. Bilinear mode ignores NaN neighbors by falling
/// back to the nearest valid tap.
pub fn dolp_lookup(dolp: &Plane<f64>, u: &Pixel, mode: Interpolation) -> Result<f64> {
    let (w, h) = dolp.dims();
    if !(u.u >= 0.0 && u.v >= 0.0 && u.u <= (w as f64 - 1.0) && u.v <= (h as f64 - 1.0)) {
        return Err(Error::OutOfBounds(u.u, u.v));
    }
    match mode {
        Interpolation::Nearest => {
            let x = (u.u + 0.5).floor() as usize;
            let y = (u.v + 0.5).floor() as usize;
            Ok(dolp.get(x.min(w - 1), y.min(h - 1)))
        }
        Interpolation::Bilinear => {
            let taps = bilinear_taps(w, h, u.u, u.v).ok_or(Error::OutOfBounds(u.u, u.v))?;
            let mut used: Vec<(f64, f64)> = taps
                .iter()
                .filter(|t| t.2 > 0.0)
                .map(|&(x, y, wt)| (wt, dolp.get(x, y)))
                .collect();
            if used.iter().all(|(_, v)| v.is_finite()) {
                return Ok(used.iter().map(|(wt, v)| wt * v).sum());
            }
            used.sort_by(|a, b| b.0.total_cmp(&a.0));
            Ok(used
                .iter()
                .find(|(_, v)| v.is_finite())
                .map_or(f64::NAN, |&(_, v)| v))
        }
    }
}

/// Threshold, lookup mode and class ids for [`detect_water`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterParams {
    pub delta: f64,
    pub lookup: Interpolation,
    pub road: u8,
    pub water_hazard: u8,
}

impl WaterParams {
    pub fn from_table(table: &ClassTable, delta: f64, lookup: Interpolation) -> Result<Self> {
        table.validate()?;
        Ok(Self {
            delta,
            lookup,
            road: table.id("road").unwrap_or_default(),
            water_hazard: table.id("water_hazard").unwrap_or_default(),
        })
    }
}

/// Relabels road pixels whose registered DoLP reaches `params.delta`.
/// Pixels without valid depth or whose reprojection misses the DoLP image
/// keep their label.
pub fn detect_water(
    labels: &LabelMap,
    depth: &DepthMap,
    dolp: &Plane<f64>,
    rig: &RegistrationRig,
    params: &WaterParams,
) -> Result<LabelMap> {
    depth.depth.ensure_dims(labels.dims())?;
    if !(0.0..=1.0).contains(&params.delta) {
        return Err(Error::InvalidThreshold(params.delta));
    }
    let (w, _) = labels.dims();
    let mut out = labels.labels.clone();
    out.as_mut_slice()
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, class) in row.iter_mut().enumerate() {
                if *class != params.road {
                    continue;
                }
                let Some(z) = depth.get(x, y) else { continue };
                let Ok(u_polar) = reproject_pixel(rig, &Pixel::new(x as f64, y as f64), z) else {
                    continue;
                };
                let Ok(value) = dolp_lookup(dolp, &u_polar, params.lookup) else {
                    continue;
                };
                if value >= params.delta {
                    *class = params.water_hazard;
                }
            }
        });
    Ok(LabelMap::new(out))
}

/// Fills invalid depth pixels with the median of valid depths in the
/// surrounding `k×k` window (`k` odd). Valid pixels are untouched.
pub fn fill_depth_median(depth: &DepthMap, k: usize) -> Result<DepthMap> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "median window must be odd, got {k}"
        )));
    }
    let (w, h) = depth.dims();
    let r = k / 2;
    let src = &depth.depth;
    let filled = Plane::from_fn(w, h, |x, y| {
        let z = src.get(x, y);
        if z.is_finite() {
            return z;
        }
        let mut window: Vec<f32> = Vec::with_capacity(k * k);
        for yy in y.saturating_sub(r)..(y + r + 1).min(h) {
            for xx in x.saturating_sub(r)..(x + r + 1).min(w) {
                let v = src.get(xx, yy);
                if v.is_finite() {
                    window.push(v);
                }
            }
        }
        if window.is_empty() {
            return f32::NAN;
        }
        window.sort_by(f32::total_cmp);
        window[window.len() / 2]
    });
    Ok(DepthMap::new(filled))
}

/// Alpha-blends class colors over the color image; void and unknown ids
/// pass through.
pub fn overlay_visualization(
    color: &Image,
    labels: &LabelMap,
    table: &ClassTable,
    alpha: f64,
) -> Result<image::RgbImage> {
    labels.labels.ensure_dims(color.dims())?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside [0, 1]")));
    }
    let mut palette: [Option<[u8; 3]>; 256] = [None; 256];
    for c in &table.classes {
        if c.id != VOID_ID {
            palette[c.id as usize] = Some(c.color);
        }
    }
    let (w, h) = color.dims();
    let round = |v: f64| (v + 0.5).floor().clamp(0.0, 255.0) as u8;
    Ok(image::RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let (x, y) = (x as usize, y as usize);
        let px = color.pixel(x, y);
        let rgb = |k: usize| px[k.min(px.len() - 1)] as f64;
        match palette[labels.get(x, y) as usize] {
            Some(cc) => image::Rgb(std::array::from_fn(|k| {
                round(alpha * cc[k] as f64 + (1.0 - alpha) * rgb(k))
            })),
            None => image::Rgb(std::array::from_fn(|k| round(rgb(k)))),
        }
    }))
}
