//! Pinhole camera models and rigid-body math.
//!
//! Pixel coordinates are `(u, v) = (column, row)` with the origin at the
//! center of the top-left pixel. Camera frames are right-handed with `x`
//! right, `y` down and `z` along the optical axis.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Camera-frame point in meters.
pub type Point3 = nalgebra::Point3<f64>;

/// Tolerance on `RᵀR = I` and `det R = 1` for stored rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Largest correction the polar-decomposition cleanup may apply to a rotation
/// read from a file.
pub const ROTATION_CLEANUP_LIMIT: f64 = 1e-6;

/// Continuous image coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &Pixel) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// Ideal pinhole intrinsics (zero skew, no distortion).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64)
            || !(self.cy >= 0.0 && self.cy < self.height as f64)
        {
            return Err(Error::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, 0.0, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }

    /// Intrinsics of the half-resolution grid whose pixel `(i, j)` is the
    /// center of the 2×2 block `(2i..2i+1, 2j..2j+1)` of this grid.
    pub fn binned_2x2(&self) -> CameraIntrinsics {
        CameraIntrinsics {
            fx: self.fx / 2.0,
            fy: self.fy / 2.0,
            cx: ((self.cx - 0.5) / 2.0).max(0.0),
            cy: ((self.cy - 0.5) / 2.0).max(0.0),
            width: self.width / 2,
            height: self.height / 2,
        }
    }

    /// Inverse of [`binned_2x2`](Self::binned_2x2).
    pub fn unbinned_2x2(&self) -> CameraIntrinsics {
        CameraIntrinsics {
            fx: self.fx * 2.0,
            fy: self.fy * 2.0,
            cx: self.cx * 2.0 + 0.5,
            cy: self.cy * 2.0 + 0.5,
            width: self.width * 2,
            height: self.height * 2,
        }
    }

    /// Whether a continuous coordinate lies in `[0, w-1] x [0, h-1]`.
    pub fn contains(&self, px: &Pixel) -> bool {
        px.u >= 0.0
            && px.v >= 0.0
            && px.u <= (self.width as f64 - 1.0)
            && px.v <= (self.height as f64 - 1.0)
    }

    /// Unnormalized viewing ray `(x/z, y/z, 1)` through a pixel.
    pub fn ray(&self, px: &Pixel) -> Vector3<f64> {
        Vector3::new((px.u - self.cx) / self.fx, (px.v - self.cy) / self.fy, 1.0)
    }
}

/// Maps a point through the pinhole model. The result may fall outside the
/// image; callers test membership themselves.
pub fn project(k: &CameraIntrinsics, p: &Point3) -> Result<Pixel> {
    if !(p.z > 0.0) {
        return Err(Error::NonPositiveDepth(p.z));
    }
    Ok(Pixel::new(
        k.fx * p.x / p.z + k.cx,
        k.fy * p.y / p.z + k.cy,
    ))
}

/// Lifts a pixel at optical-axis depth `z` back to the camera frame.
pub fn backproject(k: &CameraIntrinsics, px: &Pixel, z: f64) -> Result<Point3> {
    if !(z > 0.0) {
        return Err(Error::NonPositiveDepth(z));
    }
    Ok(Point3::new(
        (px.u - k.cx) * z / k.fx,
        (px.v - k.cy) * z / k.fy,
        z,
    ))
}

/// Rigid motion `p ↦ R·p + t` with `t` in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        check_rotation(&rotation, ROTATION_TOLERANCE)?;
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("translation must be finite".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Projects a nearly orthonormal matrix onto SO(3) before construction,
    /// rejecting inputs that need more than [`ROTATION_CLEANUP_LIMIT`] of
    /// correction in any element.
    pub fn from_rounded(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let cleaned = nearest_rotation(&rotation)?;
        let correction = (cleaned - rotation).abs().max();
        if correction > ROTATION_CLEANUP_LIMIT {
            return Err(Error::InvalidRotation(format!(
                "orthonormality correction {correction:.3e} exceeds {ROTATION_CLEANUP_LIMIT:e}"
            )));
        }
        Self::new(cleaned, translation)
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Result<Self> {
        Self::new(rotation, Vector3::zeros())
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// `self ∘ first`: applies `first`, then `self`.
    pub fn compose(&self, first: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// 4×4 homogeneous form `[R t; 0 1]`.
    pub fn to_homogeneous(&self) -> nalgebra::Matrix4<f64> {
        let mut m = nalgebra::Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

/// Plain-array form of a [`RigidTransform`] for configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    /// Row-major rotation matrix.
    pub rotation: [[f64; 3]; 3],
    /// Translation in meters.
    pub translation: [f64; 3],
}

impl Default for TransformSpec {
    fn default() -> Self {
        (&RigidTransform::identity()).into()
    }
}

impl TransformSpec {
    /// Builds the transform, cleaning up rounding in the rotation.
    pub fn to_transform(&self) -> Result<RigidTransform> {
        let r = Matrix3::from_fn(|i, j| self.rotation[i][j]);
        RigidTransform::from_rounded(r, Vector3::from(self.translation))
    }
}

impl From<&RigidTransform> for TransformSpec {
    fn from(t: &RigidTransform) -> Self {
        let r = t.rotation();
        TransformSpec {
            rotation: std::array::from_fn(|i| std::array::from_fn(|j| r[(i, j)])),
            translation: [t.translation().x, t.translation().y, t.translation().z],
        }
    }
}

pub fn transform_point(t: &RigidTransform, p: &Point3) -> Point3 {
    Point3::from(t.rotation * p.coords + t.translation)
}

fn check_rotation(r: &Matrix3<f64>, tol: f64) -> Result<()> {
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidRotation("non-finite entries".into()));
    }
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    if ortho > tol {
        return Err(Error::InvalidRotation(format!(
            "|RᵀR - I| = {ortho:.3e} exceeds {tol:e}"
        )));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > tol {
        return Err(Error::InvalidRotation(format!("det R = {det}")));
    }
    Ok(())
}

/// Orthogonal polar factor of `m` (closest rotation in Frobenius norm).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let svd = m.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::InvalidRotation("SVD failed".into()));
    };
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    Ok(u * d * v_t)
}

/// Rotation by `angle` radians about `axis` (Rodrigues).
pub fn rotation_from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let n = axis.norm();
    if n == 0.0 || angle == 0.0 {
        return Matrix3::identity();
    }
    let a = axis / n;
    let k = Matrix3::new(
        0.0, -a.z, a.y, //
        a.z, 0.0, -a.x, //
        -a.y, a.x, 0.0,
    );
    let (s, c) = angle.sin_cos();
    Matrix3::identity() + k * s + k * k * (1.0 - c)
}

/// Unit axis and angle in `[0, π]` of a rotation matrix. The identity
/// returns the `z` axis.
pub fn axis_angle(r: &Matrix3<f64>) -> (Vector3<f64>, f64) {
    let skew = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    ) * 0.5;
    let cos = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let sin = skew.norm();
    let angle = sin.atan2(cos);
    if sin < 1e-12 && cos > 0.0 {
        return (Vector3::z(), 0.0);
    }
    if cos > -0.5 {
        return (skew / sin, angle);
    }
    // Near π the skew part loses precision; recover the axis from the
    // symmetric part (R + Rᵀ)/2 - cosθ·I = (1 - cosθ)·a·aᵀ.
    let sym = (r + r.transpose()) * 0.5 - Matrix3::identity() * cos;
    let scale = 1.0 - cos;
    let diag = [sym[(0, 0)], sym[(1, 1)], sym[(2, 2)]];
    let i = (0..3)
        .max_by(|&a, &b| diag[a].total_cmp(&diag[b]))
        .unwrap_or(0);
    let mut axis: Vector3<f64> = sym.column(i).into_owned() / scale;
    axis /= axis.norm();
    if axis.dot(&skew) < 0.0 {
        axis = -axis;
    }
    (axis, angle)
}

/// Square root `Q` of a rotation (`Q·Q = R`), rotating by half the angle
/// about the same axis.
pub fn rotation_sqrt(r: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    check_rotation(r, ROTATION_TOLERANCE)?;
    let (axis, angle) = axis_angle(r);
    if (std::f64::consts::PI - angle).abs() < 1e-9 {
        return Err(Error::DegenerateRotation(angle));
    }
    Ok(rotation_from_axis_angle(&axis, angle * 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn close(a: &Point3, b: &Point3, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn transform_point_examples() {
        let p = Point3::new(1.0, 2.0, 3.0);
        assert_eq!(transform_point(&RigidTransform::identity(), &p), p);

        let rz180 = RigidTransform::new(
            rotation_from_axis_angle(&Vector3::z(), PI),
            Vector3::zeros(),
        )
        .unwrap();
        let q = transform_point(&rz180, &Point3::new(1.0, 0.0, 0.0));
        assert!(close(&q, &Point3::new(-1.0, 0.0, 0.0), 1e-15));

        let rz90 = RigidTransform::new(
            rotation_from_axis_angle(&Vector3::z(), FRAC_PI_2),
            Vector3::new(0.0, 0.0, 1.0),
        )
        .unwrap();
        let q = transform_point(&rz90, &Point3::new(1.0, 0.0, 0.0));
        assert!(close(&q, &Point3::new(0.0, 1.0, 1.0), 1e-15));
    }

    #[test]
    fn project_examples() {
        let k = k();
        assert_eq!(
            project(&k, &Point3::new(0.0, 0.0, 5.0)).unwrap(),
            Pixel::new(320.0, 240.0)
        );
        assert_eq!(
            project(&k, &Point3::new(1.0, 0.0, 1.0)).unwrap(),
            Pixel::new(420.0, 240.0)
        );
        assert_eq!(
            project(&k, &Point3::new(1.0, 1.0, 2.0)).unwrap(),
            Pixel::new(370.0, 290.0)
        );
        assert_eq!(
            project(&k, &Point3::new(1.0, 1.0, 0.0)),
            Err(Error::NonPositiveDepth(0.0))
        );
    }

    #[test]
    fn backproject_examples() {
        let k = k();
        assert_eq!(
            backproject(&k, &Pixel::new(320.0, 240.0), 5.0).unwrap(),
            Point3::new(0.0, 0.0, 5.0)
        );
        assert_eq!(
            backproject(&k, &Pixel::new(420.0, 240.0), 1.0).unwrap(),
            Point3::new(1.0, 0.0, 1.0)
        );
        assert!(matches!(
            backproject(&k, &Pixel::new(0.0, 0.0), -1.0),
            Err(Error::NonPositiveDepth(_))
        ));
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 3.9, 0.0, 4, 4).is_ok());
    }

    #[test]
    fn binning_round_trip() {
        let k = CameraIntrinsics::new(700.0, 710.0, 320.5, 240.5, 640, 480).unwrap();
        let b = k.binned_2x2();
        assert_eq!(b.width, 320);
        assert_eq!(b.cx, 160.0);
        assert_eq!(b.unbinned_2x2(), k);
        // The center of block (i, j) projects to binned pixel (i, j).
        let p = backproject(&k, &Pixel::new(2.0 * 10.0 + 0.5, 2.0 * 7.0 + 0.5), 3.0).unwrap();
        let q = project(&b, &p).unwrap();
        assert!((q.u - 10.0).abs() < 1e-12 && (q.v - 7.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_sqrt_examples() {
        let q = rotation_sqrt(&Matrix3::identity()).unwrap();
        assert!((q - Matrix3::identity()).abs().max() < 1e-15);

        let r = rotation_from_axis_angle(&Vector3::z(), FRAC_PI_2);
        let q = rotation_sqrt(&r).unwrap();
        let expected = rotation_from_axis_angle(&Vector3::z(), FRAC_PI_2 / 2.0);
        assert!((q - expected).abs().max() < 1e-15);

        let r = rotation_from_axis_angle(&Vector3::x(), PI);
        assert!(matches!(
            rotation_sqrt(&r),
            Err(Error::DegenerateRotation(_))
        ));
    }

    #[test]
    fn axis_angle_near_pi() {
        let axis = Vector3::new(0.3, -0.5, 0.8).normalize();
        let r = rotation_from_axis_angle(&axis, PI - 1e-6);
        let (a, theta) = axis_angle(&r);
        assert!((a - axis).norm() < 1e-9);
        assert!((theta - (PI - 1e-6)).abs() < 1e-12);
    }

    #[test]
    fn rounded_rotation_cleanup() {
        let r = rotation_from_axis_angle(&Vector3::new(1.0, 2.0, 3.0), 0.4);
        let rounded = r.map(|v| (v * 1e7).round() / 1e7);
        let t = RigidTransform::from_rounded(rounded, Vector3::zeros()).unwrap();
        assert!((t.rotation() - r).abs().max() < 1e-6);

        let skewed = r + Matrix3::from_element(1e-4);
        assert!(RigidTransform::from_rounded(skewed, Vector3::zeros()).is_err());
        assert!(RigidTransform::new(rounded, Vector3::zeros()).is_err());
    }

    #[test]
    fn inverse_and_homogeneous() {
        let t = RigidTransform::new(
            rotation_from_axis_angle(&Vector3::new(0.2, 1.0, -0.3), 0.7),
            Vector3::new(0.1, -0.2, 0.3),
        )
        .unwrap();
        let id = t.inverse().compose(&t);
        assert!((id.rotation() - Matrix3::identity()).abs().max() < 1e-12);
        assert!(id.translation().norm() < 1e-12);
        let p = Point3::new(0.5, 0.25, 2.0);
        let h = t.to_homogeneous() * p.to_homogeneous();
        assert!((Point3::from_homogeneous(h).unwrap() - transform_point(&t, &p)).norm() < 1e-15);
    }
}
