//! Stereo rectification, SAD block matching and disparity-to-depth
//! conversion.
//!
//! Rotations in [`Rectification`] map coordinates of a point in the original
//! camera frame to the rectified frame (`P_rect = R_left · P_l`). Rotating the
//! left camera by `R^{-1/2}` is therefore the point map `R_rect · R^{1/2}`.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotation_sqrt, CameraIntrinsics, Pixel, RigidTransform};
use crate::plane::{Image, Interpolation, Plane};

pub const DEFAULT_Z_MIN: f64 = 0.15;
pub const DEFAULT_Z_MAX: f64 = 12.0;

/// Output of [`build_rectification`].
#[derive(Debug, Clone, PartialEq)]
pub struct Rectification {
    /// Original left frame → rectified left frame.
    pub left_rotation: Matrix3<f64>,
    /// Original right frame → rectified right frame.
    pub right_rotation: Matrix3<f64>,
    /// Half-way rotation `R^{1/2}` shared by both cameras before `R_rect`.
    pub half_rotation: Matrix3<f64>,
    /// Baseline alignment rotation.
    pub rect_rotation: Matrix3<f64>,
    /// Intrinsics shared by both rectified cameras.
    pub k_rect: CameraIntrinsics,
    /// Distance between the camera centers in meters.
    pub baseline: f64,
}

impl Rectification {
    /// Left-to-right transform between the rectified frames. Its rotation is
    /// the identity and its translation is `(-baseline, 0, 0)`.
    pub fn rectified_transform(&self, t_lr: &RigidTransform) -> (Matrix3<f64>, Vector3<f64>) {
        let r = self.right_rotation * t_lr.rotation() * self.left_rotation.transpose();
        let t = self.right_rotation * t_lr.translation();
        (r, t)
    }
}

/// Builds rectifying rotations for a stereo pair related by
/// `P_r = R·P_l + t`. `k_left` becomes the shared rectified intrinsics.
pub fn build_rectification(
    k_left: &CameraIntrinsics,
    k_right: &CameraIntrinsics,
    t_lr: &RigidTransform,
) -> Result<Rectification> {
    k_left.validate()?;
    k_right.validate()?;
    let t = t_lr.translation();
    let baseline = t.norm();
    if baseline < 1e-9 {
        return Err(Error::DegenerateBaseline(baseline));
    }
    let half = rotation_sqrt(t_lr.rotation())?;
    // Right camera center expressed in the half-rotated left frame.
    let center_right = -(half.transpose() * t);
    let e1 = center_right / baseline;
    let e2 = Vector3::z().cross(&e1);
    if e2.norm() < 1e-9 {
        return Err(Error::DegenerateBaseline(baseline));
    }
    let e2 = e2.normalize();
    let e3 = e1.cross(&e2);
    let rect = Matrix3::from_rows(&[e1.transpose(), e2.transpose(), e3.transpose()]);
    Ok(Rectification {
        left_rotation: rect * half,
        right_rotation: rect * half.transpose(),
        half_rotation: half,
        rect_rotation: rect,
        k_rect: *k_left,
        baseline,
    })
}

/// Resamples an image into a rectified view. `rotation` maps original camera
/// coordinates to rectified ones; each output ray is rotated back and
/// projected through `k_orig`. Samples outside the source get `fill`.
pub fn rectify_image(
    img: &Image,
    rotation: &Matrix3<f64>,
    k_orig: &CameraIntrinsics,
    k_rect: &CameraIntrinsics,
    fill: f32,
) -> Result<Image> {
    if img.dims() != (k_orig.width, k_orig.height) {
        return Err(Error::DimensionMismatch {
            expected: (k_orig.width, k_orig.height),
            actual: img.dims(),
        });
    }
    let (w, h, c) = (k_rect.width, k_rect.height, img.channels());
    let back = rotation.transpose();
    let mut out = Image::new(w, h, c, fill);
    out.as_mut_slice()
        .par_chunks_mut(w * c)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                let ray = back * k_rect.ray(&Pixel::new(x as f64, y as f64));
                if ray.z <= 0.0 {
                    continue;
                }
                let u = k_orig.fx * ray.x / ray.z + k_orig.cx;
                let v = k_orig.fy * ray.y / ray.z + k_orig.cy;
                img.sample_into(u, v, Interpolation::Bilinear, &mut row[x * c..(x + 1) * c]);
            }
        });
    Ok(out)
}

/// Block-matching parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    /// Half-width of the square SAD window, `(2r+1)²` pixels.
    pub block_radius: usize,
    pub min_disparity: usize,
    pub max_disparity: usize,
    /// Minimum intensity variance (0–255 scale) of the left block.
    pub texture_threshold: f64,
    /// Maximum disagreement between left and right matches, in pixels.
    pub lr_tolerance: usize,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            block_radius: 3,
            min_disparity: 0,
            max_disparity: 64,
            texture_threshold: 4.0,
            lr_tolerance: 1,
        }
    }
}

/// Per-pixel disparity `x_l - x_r`; NaN marks invalid pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub disparity: Plane<f32>,
    pub min_disparity: usize,
    pub max_disparity: usize,
}

impl DisparityMap {
    pub fn width(&self) -> usize {
        self.disparity.width()
    }

    pub fn height(&self) -> usize {
        self.disparity.height()
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        let d = self.disparity.get(x, y);
        d.is_finite().then_some(d)
    }
}

/// Dense SAD block matching with left-right consistency and parabolic
/// sub-pixel refinement. Inputs must be rectified single-channel images.
pub fn match_disparity(left: &Image, right: &Image, params: &MatchParams) -> Result<DisparityMap> {
    if left.dims() != right.dims() {
        return Err(Error::DimensionMismatch {
            expected: left.dims(),
            actual: right.dims(),
        });
    }
    if left.channels() != 1 || right.channels() != 1 {
        return Err(Error::InvalidParameter(
            "block matching expects single-channel images".into(),
        ));
    }
    if params.min_disparity > params.max_disparity {
        return Err(Error::InvalidRange {
            min: params.min_disparity as f64,
            max: params.max_disparity as f64,
        });
    }
    let (w, h) = left.dims();
    let mut out = Plane::new(w, h, f32::NAN);
    let r = params.block_radius;
    if w < 2 * r + 1 || h < 2 * r + 1 {
        return Ok(DisparityMap {
            disparity: out,
            min_disparity: params.min_disparity,
            max_disparity: params.max_disparity,
        });
    }
    let (l, rt) = (left.as_slice(), right.as_slice());
    out.as_mut_slice()
        .par_chunks_mut(w)
        .enumerate()
        .filter(|(y, _)| *y >= r && *y + r < h)
        .for_each(|(y, row)| match_row(l, rt, w, y, params, row));
    Ok(DisparityMap {
        disparity: out,
        min_disparity: params.min_disparity,
        max_disparity: params.max_disparity,
    })
}

fn match_row(left: &[f32], right: &[f32], w: usize, y: usize, p: &MatchParams, out: &mut [f32]) {
    let r = p.block_radius;
    let span = 2 * r + 1;
    let nd = p.max_disparity - p.min_disparity + 1;
    // cost[x * nd + k] for disparity min_disparity + k
    let mut cost = vec![f32::INFINITY; w * nd];
    let mut column = vec![0f32; w];
    let rows: Vec<usize> = (y - r..=y + r).collect();

    for k in 0..nd {
        let d = p.min_disparity + k;
        if d + span > w {
            break;
        }
        for x in d..w {
            let mut s = 0f32;
            for &yy in &rows {
                let base = yy * w;
                s += (left[base + x] - right[base + x - d]).abs();
            }
            column[x] = s;
        }
        for x in (d + r)..(w - r) {
            let s: f32 = column[x - r..=x + r].iter().sum();
            cost[x * nd + k] = s;
        }
    }

    let best_left: Vec<Option<usize>> = (0..w)
        .map(|x| argmin(&cost[x * nd..(x + 1) * nd]))
        .collect();
    let best_right: Vec<Option<usize>> = (0..w)
        .map(|xr| {
            let mut best: Option<(usize, f32)> = None;
            for k in 0..nd {
                let x = xr + p.min_disparity + k;
                if x >= w {
                    break;
                }
                let c = cost[x * nd + k];
                if c.is_finite() && best.is_none_or(|(_, b)| c < b) {
                    best = Some((k, c));
                }
            }
            best.map(|(k, _)| k)
        })
        .collect();

    for x in r..w - r {
        let Some(k) = best_left[x] else { continue };
        if block_variance(left, w, x, y, r) < p.texture_threshold {
            continue;
        }
        let d = p.min_disparity + k;
        let Some(kr) = best_right[x - d] else { continue };
        if k.abs_diff(kr) > p.lr_tolerance {
            continue;
        }
        let c = &cost[x * nd..(x + 1) * nd];
        // the search window ran into the image border right after the
        // winner, so the true minimum may lie outside it
        if k + 1 < nd && !c[k + 1].is_finite() {
            continue;
        }
        let mut offset = 0.0f32;
        if k > 0 && k + 1 < nd && c[k - 1].is_finite() && c[k + 1].is_finite() {
            let denom = c[k - 1] - 2.0 * c[k] + c[k + 1];
            if denom > 0.0 {
                offset = ((c[k - 1] - c[k + 1]) / (2.0 * denom)).clamp(-0.5, 0.5);
            }
        }
        out[x] = d as f32 + offset;
    }
}

/// First index of the minimum finite value (ties resolve to the smallest
/// disparity).
fn argmin(costs: &[f32]) -> Option<usize> {
    let mut best: Option<(usize, f32)> = None;
    for (k, &c) in costs.iter().enumerate() {
        if c.is_finite() && best.is_none_or(|(_, b)| c < b) {
            best = Some((k, c));
        }
    }
    best.map(|(k, _)| k)
}

fn block_variance(img: &[f32], w: usize, x: usize, y: usize, r: usize) -> f64 {
    let n = ((2 * r + 1) * (2 * r + 1)) as f64;
    let mut sum = 0f64;
    for yy in y - r..=y + r {
        for xx in x - r..=x + r {
            sum += img[yy * w + xx] as f64;
        }
    }
    let mean = sum / n;
    let mut acc = 0f64;
    for yy in y - r..=y + r {
        for xx in x - r..=x + r {
            let dv = img[yy * w + xx] as f64 - mean;
            acc += dv * dv;
        }
    }
    acc / n
}

/// Metric depth along the optical axis; NaN marks invalid pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub depth: Plane<f32>,
}

impl DepthMap {
    pub fn new(depth: Plane<f32>) -> Self {
        Self { depth }
    }

    pub fn width(&self) -> usize {
        self.depth.width()
    }

    pub fn height(&self) -> usize {
        self.depth.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.depth.dims()
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let z = self.depth.get(x, y);
        (z.is_finite() && z > 0.0).then_some(z as f64)
    }
}

/// `z = f·baseline / d`, invalidating `d ≤ 0` and depths outside `z_range`.
pub fn disparity_to_depth(
    disp: &DisparityMap,
    focal: f64,
    baseline: f64,
    z_range: (f64, f64),
) -> Result<DepthMap> {
    if !(focal > 0.0) || !(baseline > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "focal length ({focal}) and baseline ({baseline}) must be positive"
        )));
    }
    if z_range.0 > z_range.1 {
        return Err(Error::InvalidRange {
            min: z_range.0,
            max: z_range.1,
        });
    }
    let depth = disp.disparity.map(|d| {
        if !(d > 0.0) {
            return f32::NAN;
        }
        let z = focal * baseline / d as f64;
        if z < z_range.0 || z > z_range.1 {
            f32::NAN
        } else {
            z as f32
        }
    });
    Ok(DepthMap { depth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation_from_axis_angle;

    fn noise_image(w: usize, h: usize, seed: u64) -> Image {
        // small LCG; integer-valued so SAD sums are exact
        let mut s = seed;
        Image::gray_from_fn(w, h, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) % 256) as f32
        })
    }

    fn disparity_map(values: Vec<f32>, w: usize) -> DisparityMap {
        let h = values.len() / w;
        DisparityMap {
            disparity: Plane::from_vec(w, h, values).unwrap(),
            min_disparity: 0,
            max_disparity: 64,
        }
    }

    #[test]
    fn identity_rig_is_already_rectified() {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let t = RigidTransform::from_translation(Vector3::new(-0.1, 0.0, 0.0));
        let rect = build_rectification(&k, &k, &t).unwrap();
        assert!((rect.left_rotation - Matrix3::identity()).abs().max() < 1e-15);
        assert!((rect.right_rotation - Matrix3::identity()).abs().max() < 1e-15);
        assert!((rect.baseline - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rectified_frames_are_parallel() {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let t = RigidTransform::new(
            rotation_from_axis_angle(&Vector3::new(0.1, 1.0, 0.2), 0.2),
            Vector3::new(-0.12, 0.01, 0.005),
        )
        .unwrap();
        let rect = build_rectification(&k, &k, &t).unwrap();
        let (r, tr) = rect.rectified_transform(&t);
        assert!((r - Matrix3::identity()).abs().max() < 1e-12);
        assert!((tr - Vector3::new(-rect.baseline, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn degenerate_baseline() {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        assert!(matches!(
            build_rectification(&k, &k, &RigidTransform::identity()),
            Err(Error::DegenerateBaseline(_))
        ));
    }

    #[test]
    fn identity_remap_is_exact() {
        let img = noise_image(40, 30, 3);
        let k = CameraIntrinsics::new(50.0, 50.0, 20.0, 15.0, 40, 30).unwrap();
        let out = rectify_image(&img, &Matrix3::identity(), &k, &k, 0.0).unwrap();
        assert_eq!(out, img);
        let k_bad = CameraIntrinsics::new(50.0, 50.0, 20.0, 15.0, 41, 30).unwrap();
        assert!(rectify_image(&img, &Matrix3::identity(), &k_bad, &k, 0.0).is_err());
    }

    #[test]
    fn integer_shift_is_recovered() {
        let (w, h) = (96, 48);
        let left = noise_image(w, h, 11);
        let extra = noise_image(w, h, 12);
        let right = Image::gray_from_fn(w, h, |x, y| {
            if x + 7 < w {
                left.pixel(x + 7, y)[0]
            } else {
                extra.pixel(x, y)[0]
            }
        });
        let params = MatchParams {
            max_disparity: 20,
            ..MatchParams::default()
        };
        let disp = match_disparity(&left, &right, &params).unwrap();
        let valid: Vec<f32> = disp.disparity.as_slice().iter().copied().filter(|d| d.is_finite()).collect();
        assert!(valid.len() > (w - 30) * (h - 6));
        assert!(valid.iter().all(|d| (d - 7.0).abs() <= 0.25), "{valid:?}");
    }

    #[test]
    fn identical_images_give_zero() {
        let img = noise_image(64, 32, 5);
        let disp = match_disparity(&img, &img, &MatchParams::default()).unwrap();
        let valid: Vec<f32> = disp.disparity.as_slice().iter().copied().filter(|d| d.is_finite()).collect();
        assert!(!valid.is_empty());
        assert!(valid.iter().all(|&d| d.abs() <= 0.25));
    }

    #[test]
    fn constant_image_is_fully_invalid() {
        let img = Image::gray_from_fn(48, 32, |_, _| 128.0);
        let disp = match_disparity(&img, &img, &MatchParams::default()).unwrap();
        assert_eq!(disp.disparity.valid_count(), 0);
    }

    #[test]
    fn matching_errors() {
        let a = noise_image(20, 20, 1);
        let b = noise_image(21, 20, 1);
        assert!(matches!(
            match_disparity(&a, &b, &MatchParams::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        let p = MatchParams {
            min_disparity: 5,
            max_disparity: 4,
            ..MatchParams::default()
        };
        assert!(matches!(
            match_disparity(&a, &a, &p),
            Err(Error::InvalidRange { .. })
        ));
    }

    #[test]
    fn depth_examples() {
        let disp = disparity_map(vec![44.1, 0.0, 2.0, f32::NAN], 4);
        let depth = disparity_to_depth(&disp, 700.0, 0.063, (DEFAULT_Z_MIN, DEFAULT_Z_MAX)).unwrap();
        assert!((depth.get(0, 0).unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(depth.get(1, 0), None);
        assert_eq!(depth.get(2, 0), None);
        assert_eq!(depth.get(3, 0), None);
        let wide = disparity_to_depth(&disp, 700.0, 0.063, (0.1, 100.0)).unwrap();
        assert!((wide.get(2, 0).unwrap() - 22.05).abs() < 1e-5);
    }
}
