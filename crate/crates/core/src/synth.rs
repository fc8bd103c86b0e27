//! Synthetic multimodal scenes with exact ground truth.
//!
//! Scenes are built from textured planar patches lit by a distant sun plus
//! uniform ambient light. Diffuse patches emit unpolarized light; specular
//! patches reflect a uniform unpolarized sky through the Fresnel equations,
//! which makes the reflected beam partially polarized perpendicular to the
//! plane of incidence. The world frame is the left color camera frame.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::LabelMap;
use crate::geometry::{CameraIntrinsics, Pixel, RigidTransform, TransformSpec};
use crate::panoramic::{pal_ray, PalModel};
use crate::plane::{Image, Plane};
use crate::polarization::{fresnel, MosaicFrame, MosaicLayout};
use crate::stereo::DepthMap;

/// Largest S0 the mosaic renderer emits; keeps every analyzer sample,
/// after rounding, at or below full scale.
const MOSAIC_CEILING: f64 = 1.0 - 1.0 / (1u64 << 30) as f64;
/// Mosaic samples are rounded to this dyadic grid so that the sums
/// `I0 + I90` and `I45 + I135` are exact in `f64`.
const MOSAIC_QUANTUM: f64 = 1.0 / (1u64 << 32) as f64;
const NO_PATCH: u16 = u16::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub patches: Vec<Patch>,
    pub illumination: Illumination,
    pub background: Background,
    pub rig: SceneRig,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub seed: u64,
}

/// Rectangle `center + a·u_axis + b·v_axis` with `|a|, |b| ≤ half_extent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub center: [f64; 3],
    pub u_axis: [f64; 3],
    pub v_axis: [f64; 3],
    /// Half sizes along the two axes, meters.
    pub half_extent: [f64; 2],
    pub texture: Texture,
    pub material: Material,
    /// Label written into the ground-truth class map.
    pub class_id: u8,
}

/// Band-limited albedo pattern `albedo·(1 + contrast·p)` with `|p| ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Texture {
    pub albedo: f64,
    #[serde(default)]
    pub contrast: f64,
    /// Meters per texture unit; pattern wavelengths span 5–16 units.
    #[serde(default = "default_texture_scale")]
    pub scale: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_texture_scale() -> f64 {
    0.01
}

impl Texture {
    pub fn flat(albedo: f64) -> Self {
        Self {
            albedo,
            contrast: 0.0,
            scale: default_texture_scale(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Material {
    Diffuse,
    /// Smooth dielectric of refractive index `n2` seen from air. It
    /// reflects the uniform sky over an unpolarized diffuse term from the
    /// patch texture (zero for a zero albedo).
    Specular { n2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Illumination {
    /// Direction the sunlight travels, world frame.
    pub direction: [f64; 3],
    pub sun: f64,
    pub ambient: f64,
    /// Radiance of the uniform sky mirrored by specular patches.
    pub sky: f64,
}

/// Returned by rays that hit no patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub radiance: f64,
    pub class_id: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRig {
    pub k_left: CameraIntrinsics,
    pub k_right: CameraIntrinsics,
    /// `P_right = R·P_left + t`.
    pub left_to_right: TransformSpec,
    #[serde(default)]
    pub polar: Option<PolarRig>,
    #[serde(default)]
    pub pal: Option<PalRig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarRig {
    /// Intrinsics of the full-resolution mosaic sensor.
    pub k_sensor: CameraIntrinsics,
    pub left_to_polar: TransformSpec,
    #[serde(default)]
    pub layout: MosaicLayout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PalRig {
    pub model: PalModel,
    pub left_to_pal: TransformSpec,
    pub width: usize,
    pub height: usize,
    pub shading: PalShading,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PalShading {
    /// Fully saturated hue proportional to azimuth from `azimuth_zero`.
    AzimuthHue,
    Constant { value: f64 },
    /// White spokes every `spacing_deg` degrees, starting at
    /// `azimuth_zero`, `half_width_deg` wide on each side.
    Spokes { spacing_deg: f64, half_width_deg: f64 },
    /// Smooth pattern with `azimuth_cycles` periods around the circle and
    /// `radial_cycles` periods across the field of view.
    Harmonic { azimuth_cycles: u32, radial_cycles: f64 },
    /// Ray-cast the scene patches.
    Scene,
}

/// Additive Gaussian noise, standard deviation on the `[0, 1]` intensity
/// scale.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(default)]
    pub stereo: f64,
    #[serde(default)]
    pub mosaic: f64,
    #[serde(default)]
    pub annulus: f64,
}

/// Stereo pair with left-camera ground truth.
#[derive(Debug, Clone)]
pub struct StereoRender {
    pub left: Image,
    pub right: Image,
    pub depth: DepthMap,
    /// `f·baseline / z` for hit pixels, NaN elsewhere.
    pub disparity: Plane<f32>,
    pub labels: LabelMap,
    /// Index of the patch seen by each left pixel, `u16::MAX` for none.
    pub patch_index: Plane<u16>,
}

/// Mosaic frame with ground truth at superpixel resolution.
#[derive(Debug, Clone)]
pub struct MosaicRender {
    pub mosaic: MosaicFrame,
    pub dolp: Plane<f64>,
    /// Incidence angle on specular patches, NaN elsewhere.
    pub incidence: Plane<f64>,
    pub patch_index: Plane<u16>,
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub depth: DepthMap,
    pub disparity: Plane<f32>,
    pub labels: LabelMap,
    pub dolp: Option<Plane<f64>>,
}

/// Every modality configured in the rig.
#[derive(Debug, Clone)]
pub struct SceneRender {
    pub stereo: StereoRender,
    pub mosaic: Option<MosaicRender>,
    pub annulus: Option<Image>,
}

impl SceneRender {
    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            depth: self.stereo.depth.clone(),
            disparity: self.stereo.disparity.clone(),
            labels: self.stereo.labels.clone(),
            dolp: self.mosaic.as_ref().map(|m| m.dolp.clone()),
        }
    }
}

struct Wave {
    k: [f64; 2],
    phase: f64,
}

struct PreparedPatch {
    center: Vector3<f64>,
    u: Vector3<f64>,
    v: Vector3<f64>,
    normal: Vector3<f64>,
    half: [f64; 2],
    albedo: f64,
    contrast: f64,
    scale: f64,
    waves: Vec<Wave>,
    material: Material,
    class_id: u8,
}

impl PreparedPatch {
    fn pattern(&self, a: f64, b: f64) -> f64 {
        if self.contrast == 0.0 {
            return 0.0;
        }
        let (s, t) = (a / self.scale, b / self.scale);
        let sum: f64 = self
            .waves
            .iter()
            .map(|w| (w.k[0] * s + w.k[1] * t + w.phase).sin())
            .sum();
        sum / self.waves.len() as f64
    }

    fn albedo_at(&self, a: f64, b: f64) -> f64 {
        (self.albedo * (1.0 + self.contrast * self.pattern(a, b))).max(0.0)
    }
}

struct Hit {
    point: Vector3<f64>,
    patch: usize,
    a: f64,
    b: f64,
}

/// Radiance leaving a surface point toward the viewer as a linear Stokes
/// vector in world coordinates.
struct Shade {
    s0: f64,
    /// Polarized intensity and its electric-field direction (world frame).
    polarized: f64,
    direction: Vector3<f64>,
    incidence: f64,
}

/// Validated scene ready for ray casting.
pub struct Scene {
    patches: Vec<PreparedPatch>,
    sun_dir: Vector3<f64>,
    illumination: Illumination,
    background: Background,
}

impl Scene {
    pub fn new(spec: &SceneSpec) -> Result<Self> {
        if spec.patches.is_empty() {
            return Err(Error::EmptyScene);
        }
        let patches = spec
            .patches
            .iter()
            .map(prepare_patch)
            .collect::<Result<Vec<_>>>()?;
        let sun = Vector3::from(spec.illumination.direction);
        let sun_dir = if sun.norm() > 0.0 { sun.normalize() } else { Vector3::y() };
        Ok(Self {
            patches,
            sun_dir,
            illumination: spec.illumination.clone(),
            background: spec.background.clone(),
        })
    }

    fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        let mut best: Option<(f64, Hit)> = None;
        for (i, p) in self.patches.iter().enumerate() {
            let denom = dir.dot(&p.normal);
            if denom.abs() < 1e-12 {
                continue;
            }
            let t = (p.center - origin).dot(&p.normal) / denom;
            if !(t > 1e-9) || best.as_ref().is_some_and(|(bt, _)| t >= *bt) {
                continue;
            }
            let point = origin + dir * t;
            let rel = point - p.center;
            let (a, b) = (rel.dot(&p.u), rel.dot(&p.v));
            if a.abs() <= p.half[0] && b.abs() <= p.half[1] {
                best = Some((t, Hit { point, patch: i, a, b }));
            }
        }
        best.map(|(_, h)| h)
    }

    fn shade(&self, hit: &Hit, dir: &Vector3<f64>) -> Shade {
        let p = &self.patches[hit.patch];
        let lambert = p.normal.dot(&self.sun_dir).abs();
        let irradiance = self.illumination.ambient + self.illumination.sun * lambert;
        let diffuse = p.albedo_at(hit.a, hit.b) * irradiance;
        match p.material {
            Material::Diffuse => Shade {
                s0: diffuse,
                polarized: 0.0,
                direction: Vector3::x(),
                incidence: f64::NAN,
            },
            Material::Specular { n2 } => {
                let cos_i = dir.dot(&p.normal).abs().min(1.0);
                let theta = cos_i.acos().min(std::f64::consts::FRAC_PI_2 - 1e-9);
                let c = fresnel(1.0, n2, theta).expect("n2 > 1 rules out total internal reflection");
                let (rs, rp) = (c.reflectance_s(), c.reflectance_p());
                let sky = self.illumination.sky;
                let s_axis = p.normal.cross(dir);
                let s_axis = if s_axis.norm() > 1e-12 {
                    s_axis.normalize()
                } else {
                    p.u
                };
                Shade {
                    s0: sky * 0.5 * (rs + rp) + diffuse,
                    polarized: sky * 0.5 * (rs - rp),
                    direction: s_axis,
                    incidence: theta,
                }
            }
        }
    }

    /// Radiance along a ray, or the background when nothing is hit.
    fn radiance(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> f64 {
        match self.intersect(origin, dir) {
            Some(hit) => self.shade(&hit, dir).s0,
            None => self.background.radiance,
        }
    }
}

fn prepare_patch(p: &Patch) -> Result<PreparedPatch> {
    let u = Vector3::from(p.u_axis);
    let v_raw = Vector3::from(p.v_axis);
    if !(p.half_extent[0] > 0.0 && p.half_extent[1] > 0.0) || u.norm() == 0.0 {
        return Err(Error::InvalidParameter("patch extent must be positive".into()));
    }
    let u = u.normalize();
    let v = v_raw - u * u.dot(&v_raw);
    if v.norm() < 1e-9 {
        return Err(Error::InvalidParameter("patch axes are parallel".into()));
    }
    let v = v.normalize();
    if let Material::Specular { n2 } = p.material {
        if !(n2 > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "specular refractive index must exceed 1, got {n2}"
            )));
        }
    }
    if !(p.texture.scale > 0.0) {
        return Err(Error::InvalidParameter("texture scale must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.texture.seed);
    let waves = (0..8)
        .map(|_| {
            let wavelength: f64 = rng.random_range(5.0..16.0);
            let angle: f64 = rng.random_range(0.0..TAU);
            let k = TAU / wavelength;
            Wave {
                k: [k * angle.cos(), k * angle.sin()],
                phase: rng.random_range(0.0..TAU),
            }
        })
        .collect();
    Ok(PreparedPatch {
        center: Vector3::from(p.center),
        u,
        v,
        normal: u.cross(&v),
        half: p.half_extent,
        albedo: p.texture.albedo,
        contrast: p.texture.contrast,
        scale: p.texture.scale,
        waves,
        material: p.material,
        class_id: p.class_id,
    })
}

/// Camera pose in the world frame derived from a world→camera transform.
struct CameraPose {
    origin: Vector3<f64>,
    cam_to_world: Matrix3<f64>,
}

impl CameraPose {
    fn from_world_to_camera(t: &RigidTransform) -> Self {
        let inv = t.inverse();
        Self {
            origin: *inv.translation(),
            cam_to_world: *inv.rotation(),
        }
    }

    fn ray(&self, k: &CameraIntrinsics, px: &Pixel) -> Vector3<f64> {
        (self.cam_to_world * k.ray(px)).normalize()
    }
}

fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn add_noise(values: &mut [f64], sigma: f64, seed: u64, stream: u64) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    let mut rng = noise_rng(seed, stream);
    for v in values {
        *v += normal.sample(&mut rng);
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        Scene::new(self)?;
        self.rig.k_left.validate()?;
        self.rig.k_right.validate()?;
        self.rig.left_to_right.to_transform()?;
        if let Some(polar) = &self.rig.polar {
            polar.k_sensor.validate()?;
            polar.left_to_polar.to_transform()?;
            polar.layout.validate()?;
            if polar.k_sensor.width % 2 != 0 || polar.k_sensor.height % 2 != 0 {
                return Err(Error::OddDimensions(polar.k_sensor.width, polar.k_sensor.height));
            }
        }
        if let Some(pal) = &self.rig.pal {
            pal.model.validate()?;
            pal.left_to_pal.to_transform()?;
        }
        Ok(())
    }

    pub fn baseline(&self) -> Result<f64> {
        Ok(self.rig.left_to_right.to_transform()?.translation().norm())
    }
}

/// Ray-casts the stereo pair and left-camera ground truth.
pub fn render_stereo(spec: &SceneSpec) -> Result<StereoRender> {
    spec.validate()?;
    let scene = Scene::new(spec)?;
    let k_left = &spec.rig.k_left;
    let k_right = &spec.rig.k_right;
    let t_lr = spec.rig.left_to_right.to_transform()?;
    let baseline = t_lr.translation().norm();

    let left_pose = CameraPose::from_world_to_camera(&RigidTransform::identity());
    let right_pose = CameraPose::from_world_to_camera(&t_lr);

    let (w, h) = (k_left.width, k_left.height);
    let left_rows: Vec<Vec<(f64, f32, u8, u16)>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let dir = left_pose.ray(k_left, &Pixel::new(x as f64, y as f64));
                    match scene.intersect(&left_pose.origin, &dir) {
                        Some(hit) => {
                            let s = scene.shade(&hit, &dir);
                            let z = hit.point.z as f32;
                            (s.s0, z, scene.patches[hit.patch].class_id, hit.patch as u16)
                        }
                        None => (scene.background.radiance, f32::NAN, scene.background.class_id, NO_PATCH),
                    }
                })
                .collect()
        })
        .collect();

    let mut left_radiance: Vec<f64> = left_rows.iter().flatten().map(|p| p.0).collect();
    let depth = Plane::from_vec(w, h, left_rows.iter().flatten().map(|p| p.1).collect())?;
    let labels = Plane::from_vec(w, h, left_rows.iter().flatten().map(|p| p.2).collect())?;
    let patch_index = Plane::from_vec(w, h, left_rows.iter().flatten().map(|p| p.3).collect())?;
    let disparity = depth.map(|z| {
        if z.is_finite() {
            (k_left.fx * baseline / z as f64) as f32
        } else {
            f32::NAN
        }
    });

    let (rw, rh) = (k_right.width, k_right.height);
    let mut right_radiance: Vec<f64> = (0..rh)
        .into_par_iter()
        .flat_map_iter(|y| {
            let scene = &scene;
            let right_pose = &right_pose;
            (0..rw).map(move |x| {
                let dir = right_pose.ray(k_right, &Pixel::new(x as f64, y as f64));
                scene.radiance(&right_pose.origin, &dir)
            })
        })
        .collect();

    add_noise(&mut left_radiance, spec.noise.stereo, spec.seed, 1);
    add_noise(&mut right_radiance, spec.noise.stereo, spec.seed, 2);
    let to_image = |w, h, r: Vec<f64>| {
        Image::from_vec(w, h, 1, r.into_iter().map(|v| (v.clamp(0.0, 1.0) * 255.0) as f32).collect())
    };
    Ok(StereoRender {
        left: to_image(w, h, left_radiance)?,
        right: to_image(rw, rh, right_radiance)?,
        depth: DepthMap::new(depth),
        disparity,
        labels: LabelMap::new(labels),
        patch_index,
    })
}

/// Renders the polarizer mosaic. All four samples of a 2×2 superpixel see
/// the ray through the superpixel center, so ground truth is defined at
/// superpixel resolution (intrinsics `k_sensor.binned_2x2()`).
pub fn render_mosaic(spec: &SceneSpec) -> Result<MosaicRender> {
    spec.validate()?;
    let polar = spec
        .rig
        .polar
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("scene rig has no polarization camera".into()))?;
    let scene = Scene::new(spec)?;
    let t_lp = polar.left_to_polar.to_transform()?;
    let pose = CameraPose::from_world_to_camera(&t_lp);
    let world_to_cam = *t_lp.rotation();
    let k = &polar.k_sensor;
    let (sw, sh) = (k.width / 2, k.height / 2);

    // (s0, s1, s2, dolp, incidence, patch)
    let samples: Vec<(f64, f64, f64, f64, f64, u16)> = (0..sh)
        .into_par_iter()
        .flat_map_iter(|j| {
            let scene = &scene;
            let pose = &pose;
            (0..sw).map(move |i| {
                let px = Pixel::new(2.0 * i as f64 + 0.5, 2.0 * j as f64 + 0.5);
                let dir = pose.ray(k, &px);
                let Some(hit) = scene.intersect(&pose.origin, &dir) else {
                    let s0 = scene.background.radiance.min(MOSAIC_CEILING);
                    return (s0, 0.0, 0.0, 0.0, f64::NAN, NO_PATCH);
                };
                let shade = scene.shade(&hit, &dir);
                let e = world_to_cam * shade.direction;
                let psi = e.y.atan2(e.x);
                let (mut s0, mut p) = (shade.s0, shade.polarized);
                if s0 > MOSAIC_CEILING {
                    let gain = MOSAIC_CEILING / s0;
                    s0 *= gain;
                    p *= gain;
                }
                let dolp = if s0 > 0.0 { (p.abs() / s0).min(1.0) } else { 0.0 };
                (
                    s0,
                    p * (2.0 * psi).cos(),
                    p * (2.0 * psi).sin(),
                    dolp,
                    shade.incidence,
                    hit.patch as u16,
                )
            })
        })
        .collect();

    let mut analyzer: Vec<f64> = Vec::with_capacity(sw * sh * 4);
    for &(s0, s1, s2, ..) in &samples {
        for o in crate::polarization::Orientation::ALL {
            let (c, s) = o.double_angle();
            analyzer.push(0.5 * (s0 + s1 * c + s2 * s));
        }
    }
    let noisy = spec.noise.mosaic > 0.0;
    add_noise(&mut analyzer, spec.noise.mosaic, spec.seed, 3);

    let quantize = |v: f64| ((v.clamp(0.0, 1.0) / MOSAIC_QUANTUM).round() * MOSAIC_QUANTUM).min(1.0);
    let layout = polar.layout;
    let mut mosaic = Plane::new(k.width, k.height, 0.0f64);
    for (idx, chunk) in analyzer.chunks_exact(4).enumerate() {
        let (i, j) = (idx % sw, idx / sw);
        let [i0, i45, i90, i135] = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let (q0, q45, q90, q135) = if noisy {
            (quantize(i0), quantize(i45), quantize(i90), quantize(i135))
        } else {
            // I45 + I135 reproduces I0 + I90 bit for bit
            let (a, b) = (quantize(i0), quantize(i90));
            let total = a + b;
            let c = quantize(i45).min(total);
            (a, c, b, total - c)
        };
        for (dy, row) in layout.0.iter().enumerate() {
            for (dx, o) in row.iter().enumerate() {
                let v = match o {
                    crate::polarization::Orientation::Deg0 => q0,
                    crate::polarization::Orientation::Deg45 => q45,
                    crate::polarization::Orientation::Deg90 => q90,
                    crate::polarization::Orientation::Deg135 => q135,
                };
                mosaic.set(2 * i + dx, 2 * j + dy, v);
            }
        }
    }

    Ok(MosaicRender {
        mosaic: MosaicFrame::new(mosaic, layout)?,
        dolp: Plane::from_vec(sw, sh, samples.iter().map(|s| s.3).collect())?,
        incidence: Plane::from_vec(sw, sh, samples.iter().map(|s| s.4).collect())?,
        patch_index: Plane::from_vec(sw, sh, samples.iter().map(|s| s.5).collect())?,
    })
}

/// Renders the annular panorama as a 3-channel image; pixels outside the
/// annulus are black.
pub fn render_annulus(spec: &SceneSpec) -> Result<Image> {
    spec.validate()?;
    let pal = spec
        .rig
        .pal
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("scene rig has no panoramic camera".into()))?;
    let scene = Scene::new(spec)?;
    let t_lp = pal.left_to_pal.to_transform()?;
    let pose = CameraPose::from_world_to_camera(&t_lp);
    let model = &pal.model;
    let (w, h) = (pal.width, pal.height);

    let mut data: Vec<f64> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            let scene = &scene;
            let pose = &pose;
            (0..w).flat_map(move |x| {
                let px = Pixel::new(x as f64, y as f64);
                let Ok(dir) = pal_ray(model, &px) else {
                    return [0.0; 3];
                };
                shade_annulus(pal, scene, pose, &px, &dir)
            })
        })
        .collect();
    if spec.noise.annulus > 0.0 {
        add_noise(&mut data, spec.noise.annulus * 255.0, spec.seed, 4);
    }
    Image::from_vec(w, h, 3, data.into_iter().map(|v| v.clamp(0.0, 255.0) as f32).collect())
}

fn shade_annulus(
    pal: &PalRig,
    scene: &Scene,
    pose: &CameraPose,
    px: &Pixel,
    dir: &Vector3<f64>,
) -> [f64; 3] {
    let model = &pal.model;
    let az = (px.v - model.center.v).atan2(px.u - model.center.u);
    let rel = (az - model.azimuth_zero).rem_euclid(TAU);
    match pal.shading {
        PalShading::AzimuthHue => hsv_to_rgb(rel / TAU),
        PalShading::Constant { value } => [value; 3],
        PalShading::Spokes {
            spacing_deg,
            half_width_deg,
        } => {
            let spacing = spacing_deg.to_radians();
            let offset = rel.rem_euclid(spacing);
            let dist = offset.min(spacing - offset);
            if dist <= half_width_deg.to_radians() {
                [255.0; 3]
            } else {
                [0.0; 3]
            }
        }
        PalShading::Harmonic {
            azimuth_cycles,
            radial_cycles,
        } => {
            let theta = dir.x.hypot(dir.y).atan2(dir.z);
            let t = (theta - model.theta_min) / (model.theta_max - model.theta_min);
            let v = 127.5
                + 60.0 * (azimuth_cycles as f64 * rel).cos()
                + 60.0 * (TAU * radial_cycles * t).cos();
            [v; 3]
        }
        PalShading::Scene => {
            let world = (pose.cam_to_world * dir).normalize();
            let r = scene.radiance(&pose.origin, &world).clamp(0.0, 1.0) * 255.0;
            [r; 3]
        }
    }
}

/// Hue in `[0, 1)` at full saturation and value, 0–255 scale.
pub fn hsv_to_rgb(hue: f64) -> [f64; 3] {
    let h = hue.rem_euclid(1.0) * 6.0;
    let sector = h.floor() as u32 % 6;
    let f = h - h.floor();
    let (up, down) = (255.0 * f, 255.0 * (1.0 - f));
    match sector {
        0 => [255.0, up, 0.0],
        1 => [down, 255.0, 0.0],
        2 => [0.0, 255.0, up],
        3 => [0.0, down, 255.0],
        4 => [up, 0.0, 255.0],
        _ => [255.0, 0.0, down],
    }
}

/// Renders every modality present in the rig.
pub fn render_scene(spec: &SceneSpec) -> Result<SceneRender> {
    Ok(SceneRender {
        stereo: render_stereo(spec)?,
        mosaic: spec.rig.polar.as_ref().map(|_| render_mosaic(spec)).transpose()?,
        annulus: spec.rig.pal.as_ref().map(|_| render_annulus(spec)).transpose()?,
    })
}

/// Ideal stereo rig: right camera `baseline` meters along `+x`.
pub fn ideal_stereo_rig(k: CameraIntrinsics, baseline: f64) -> SceneRig {
    SceneRig {
        k_left: k,
        k_right: k,
        left_to_right: (&RigidTransform::from_translation(Vector3::new(-baseline, 0.0, 0.0))).into(),
        polar: None,
        pal: None,
    }
}

impl SceneSpec {
    /// One textured plane facing the cameras at depth `z`, texture scaled to
    /// roughly one unit per pixel.
    pub fn fronto_parallel(k: CameraIntrinsics, baseline: f64, z: f64, seed: u64) -> Self {
        SceneSpec {
            patches: vec![Patch {
                center: [0.0, 0.0, z],
                u_axis: [1.0, 0.0, 0.0],
                v_axis: [0.0, 1.0, 0.0],
                half_extent: [4.0 * z, 4.0 * z],
                texture: Texture {
                    albedo: 0.5,
                    contrast: 0.8,
                    scale: z / k.fx,
                    seed,
                },
                material: Material::Diffuse,
                class_id: 13,
            }],
            illumination: Illumination {
                direction: [0.0, 0.0, 1.0],
                sun: 0.0,
                ambient: 1.0,
                sky: 1.0,
            },
            background: Background {
                radiance: 0.3,
                class_id: 10,
            },
            rig: ideal_stereo_rig(k, baseline),
            noise: NoiseModel::default(),
            seed,
        }
    }

    /// Large specular plane of index `n2` crossing the optical axis at
    /// `depth`, tilted about the camera `x` axis so the ray along the optical
    /// axis meets it at `incidence` radians. The mosaic sensor sits at the
    /// left camera (identity transform) with intrinsics `k_sensor`; the
    /// color cameras use `k_sensor.binned_2x2()`.
    pub fn specular_plane(k_sensor: CameraIntrinsics, n2: f64, incidence: f64, depth: f64) -> Self {
        let (s, c) = incidence.sin_cos();
        SceneSpec {
            patches: vec![Patch {
                center: [0.0, 0.0, depth],
                u_axis: [1.0, 0.0, 0.0],
                v_axis: [0.0, c, s],
                half_extent: [1e3, 1e3],
                texture: Texture::flat(0.0),
                material: Material::Specular { n2 },
                class_id: 0,
            }],
            illumination: Illumination {
                direction: [0.0, 1.0, 0.0],
                sun: 0.0,
                ambient: 0.0,
                sky: 10.0,
            },
            background: Background {
                radiance: 0.5,
                class_id: 10,
            },
            rig: SceneRig {
                polar: Some(PolarRig {
                    k_sensor,
                    left_to_polar: TransformSpec::default(),
                    layout: MosaicLayout::default(),
                }),
                ..ideal_stereo_rig(k_sensor.binned_2x2(), 0.063)
            },
            noise: NoiseModel::default(),
            seed: 0,
        }
    }

    /// Street scene: road with a water puddle, a sidewalk strip, a car-like
    /// panel and a wall, seen by a stereo pair (ideal rig, 6.3 cm baseline),
    /// a polarization camera mounted just below the left camera and an
    /// upward-looking panoramic lens. `width`×`height` is the color
    /// resolution; the mosaic sensor has the same resolution.
    pub fn street(width: usize, height: usize, seed: u64) -> Self {
        let scale = width as f64 / 640.0;
        let f = 300.0 * scale;
        let k = CameraIntrinsics {
            fx: f,
            fy: f,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        };
        let cam_height = 1.2;
        let road_tex = |seed| Texture {
            albedo: 0.35,
            contrast: 0.6,
            scale: 0.01,
            seed,
        };
        let patches = vec![
            Patch {
                center: [0.0, cam_height, 12.0],
                u_axis: [1.0, 0.0, 0.0],
                v_axis: [0.0, 0.0, 1.0],
                half_extent: [3.5, 11.5],
                texture: road_tex(seed ^ 1),
                material: Material::Diffuse,
                class_id: 0,
            },
            Patch {
                center: [0.0, cam_height - 1e-3, 1.8],
                u_axis: [1.0, 0.0, 0.0],
                v_axis: [0.0, 0.0, 1.0],
                half_extent: [0.6, 0.25],
                // faint sediment texture under the surface gives stereo
                // something to match
                texture: Texture {
                    albedo: 0.06,
                    contrast: 0.8,
                    scale: 0.01,
                    seed: seed ^ 5,
                },
                material: Material::Specular { n2: 1.33 },
                class_id: 0,
            },
            Patch {
                center: [-5.0, cam_height - 0.1, 12.0],
                u_axis: [1.0, 0.0, 0.0],
                v_axis: [0.0, 0.0, 1.0],
                half_extent: [1.5, 11.5],
                texture: Texture {
                    albedo: 0.55,
                    contrast: 0.5,
                    scale: 0.01,
                    seed: seed ^ 2,
                },
                material: Material::Diffuse,
                class_id: 1,
            },
            Patch {
                center: [2.0, 0.5, 6.0],
                u_axis: [1.0, 0.0, 0.0],
                v_axis: [0.0, 1.0, 0.0],
                half_extent: [1.0, 0.7],
                texture: Texture {
                    albedo: 0.5,
                    contrast: 0.8,
                    scale: 0.02,
                    seed: seed ^ 3,
                },
                material: Material::Diffuse,
                class_id: 13,
            },
            // window glass turned ~65° about the vertical so the view
            // meets it near Brewster's angle
            Patch {
                center: [-1.5, 0.6, 9.0],
                u_axis: [0.4226, 0.0, 0.9063],
                v_axis: [0.0, 1.0, 0.0],
                half_extent: [0.8, 0.6],
                texture: Texture {
                    albedo: 0.0,
                    contrast: 0.0,
                    scale: 0.01,
                    seed: 0,
                },
                material: Material::Specular { n2: 1.5 },
                class_id: 13,
            },
            Patch {
                center: [0.0, -1.0, 24.0],
                u_axis: [1.0, 0.0, 0.0],
                v_axis: [0.0, 1.0, 0.0],
                half_extent: [12.0, 2.2],
                texture: Texture {
                    albedo: 0.5,
                    contrast: 0.7,
                    scale: 0.05,
                    seed: seed ^ 4,
                },
                material: Material::Diffuse,
                class_id: 8,
            },
        ];
        let polar_from_left =
            RigidTransform::from_translation(Vector3::new(-0.02, -0.04, 0.0));
        let k_sensor = CameraIntrinsics {
            fx: 1.2 * f,
            fy: 1.2 * f,
            cx: width as f64 / 2.0 + 0.5,
            cy: height as f64 / 2.0 + 0.5,
            width,
            height,
        };
        let pal_size = height;
        let outer = 0.45 * pal_size as f64;
        let mut pal_model = PalModel::with_defaults(
            Pixel::new(pal_size as f64 / 2.0, pal_size as f64 / 2.0),
            0.003,
        );
        pal_model.pixel_pitch = pal_model.focal_length * pal_model.theta_max / outer;
        let up = Matrix3::new(
            1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, //
            0.0, -1.0, 0.0,
        );
        let left_to_pal = RigidTransform::new(up, up * Vector3::new(0.0, 0.1, 0.0))
            .expect("axis permutation is a rotation");
        SceneSpec {
            patches,
            illumination: Illumination {
                direction: [0.3, 1.0, 0.5],
                sun: 0.6,
                ambient: 0.5,
                sky: 11.0,
            },
            background: Background {
                radiance: 0.85,
                class_id: 10,
            },
            rig: SceneRig {
                polar: Some(PolarRig {
                    k_sensor,
                    left_to_polar: (&polar_from_left).into(),
                    layout: MosaicLayout::default(),
                }),
                pal: Some(PalRig {
                    model: pal_model,
                    left_to_pal: (&left_to_pal).into(),
                    width: pal_size,
                    height: pal_size,
                    shading: PalShading::Scene,
                }),
                ..ideal_stereo_rig(k, 0.063)
            },
            noise: NoiseModel::default(),
            seed,
        }
    }
}
