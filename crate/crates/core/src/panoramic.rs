//! Panoramic annular lens (PAL) model and annulus unwrapping.
//!
//! The lens follows the f-theta law: a ray at field angle `θ` from the
//! optical axis lands at image radius `f·θ`. Azimuth is measured with
//! `atan2(v - cy, u - cx)`; column 0 of the unwrapped image sits at
//! `azimuth_zero` and row 0 at `theta_min`.

use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pixel;
use crate::plane::{Image, Interpolation};

pub const DEFAULT_PIXEL_PITCH_MM: f64 = 0.003;

const TABLE_MAGIC: &[u8; 4] = b"PALW";
const THETA_TOLERANCE: f64 = 1e-12;

/// f-theta annular lens parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PalModel {
    /// Focal length in millimeters.
    pub focal_length: f64,
    /// Sensor pixel pitch in millimeters per pixel.
    pub pixel_pitch: f64,
    /// Annulus center in pixels.
    pub center: Pixel,
    /// Field-angle bounds in radians, measured from the optical axis.
    pub theta_min: f64,
    pub theta_max: f64,
    /// Azimuth mapped to unwrapped column 0, radians.
    #[serde(default)]
    pub azimuth_zero: f64,
    /// Relative aperture; informational only.
    #[serde(default)]
    pub relative_aperture: Option<f64>,
    /// Odd polynomial radial correction `θ + k1·θ³ + k2·θ⁵ + …`; empty means
    /// the pure f-theta law.
    #[serde(default)]
    pub distortion: Vec<f64>,
}

impl PalModel {
    /// 30°–95° vertical field of view, 2.13 mm focal length, aperture 1/3.2.
    pub fn with_defaults(center: Pixel, pixel_pitch: f64) -> Self {
        Self {
            focal_length: 2.13,
            pixel_pitch,
            center,
            theta_min: 30f64.to_radians(),
            theta_max: 95f64.to_radians(),
            azimuth_zero: 0.0,
            relative_aperture: Some(1.0 / 3.2),
            distortion: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal_length > 0.0 && self.pixel_pitch > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "focal length ({}) and pixel pitch ({}) must be positive",
                self.focal_length, self.pixel_pitch
            )));
        }
        if !(self.theta_min > 0.0 && self.theta_min < self.theta_max && self.theta_max < PI) {
            return Err(Error::InvalidParameter(format!(
                "field of view [{}, {}] rad is not an increasing range inside (0, pi)",
                self.theta_min, self.theta_max
            )));
        }
        if !(self.center.u.is_finite() && self.center.v.is_finite() && self.azimuth_zero.is_finite()) {
            return Err(Error::InvalidParameter("non-finite center or azimuth".into()));
        }
        // radius must increase strictly across the field of view
        let steps = 256;
        let mut prev = self.radius_unchecked(self.theta_min);
        for i in 1..=steps {
            let t = self.theta_min + (self.theta_max - self.theta_min) * i as f64 / steps as f64;
            let r = self.radius_unchecked(t);
            if !(r > prev) {
                return Err(Error::InvalidParameter(
                    "radial mapping is not increasing over the field of view".into(),
                ));
            }
            prev = r;
        }
        Ok(())
    }

    fn angle_term(&self, theta: f64) -> f64 {
        let mut acc = theta;
        let mut power = theta;
        let sq = theta * theta;
        for k in &self.distortion {
            power *= sq;
            acc += k * power;
        }
        acc
    }

    fn angle_term_derivative(&self, theta: f64) -> f64 {
        let mut acc = 1.0;
        let sq = theta * theta;
        let mut power = 1.0;
        for (i, k) in self.distortion.iter().enumerate() {
            power *= sq;
            acc += k * (2 * i + 3) as f64 * power;
        }
        acc
    }

    fn radius_unchecked(&self, theta: f64) -> f64 {
        self.focal_length * self.angle_term(theta) / self.pixel_pitch
    }

    /// Inverse of the radial mapping (no FOV check).
    pub fn theta_from_radius(&self, radius: f64) -> f64 {
        let linear = radius * self.pixel_pitch / self.focal_length;
        if self.distortion.is_empty() {
            return linear;
        }
        let mut theta = linear;
        for _ in 0..50 {
            let err = self.angle_term(theta) - linear;
            let step = err / self.angle_term_derivative(theta);
            theta -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        theta
    }

    pub fn inner_radius(&self) -> f64 {
        self.radius_unchecked(self.theta_min)
    }

    pub fn outer_radius(&self) -> f64 {
        self.radius_unchecked(self.theta_max)
    }

    /// Unwrapped width preserving arc length at the mid-annulus radius.
    pub fn default_unwrap_width(&self) -> usize {
        (TAU * 0.5 * (self.inner_radius() + self.outer_radius())).round() as usize
    }
}

/// Image radius in pixels of a ray at field angle `theta`.
pub fn pal_radius(model: &PalModel, theta: f64) -> Result<f64> {
    if theta < model.theta_min - THETA_TOLERANCE || theta > model.theta_max + THETA_TOLERANCE {
        return Err(Error::ThetaOutOfFov(theta));
    }
    Ok(model.radius_unchecked(theta))
}

/// Unit viewing direction `(sinθ cos az, sinθ sin az, cosθ)` in the lens
/// frame for an annulus pixel.
pub fn pal_ray(model: &PalModel, px: &Pixel) -> Result<Vector3<f64>> {
    let du = px.u - model.center.u;
    let dv = px.v - model.center.v;
    let theta = model.theta_from_radius(du.hypot(dv));
    if theta < model.theta_min - THETA_TOLERANCE || theta > model.theta_max + THETA_TOLERANCE {
        return Err(Error::OutsideAnnulus(px.u, px.v));
    }
    let az = dv.atan2(du);
    let (st, ct) = theta.sin_cos();
    Ok(Vector3::new(st * az.cos(), st * az.sin(), ct))
}

/// Annulus pixel of a lens-frame direction (inverse of [`pal_ray`]).
pub fn pal_project(model: &PalModel, direction: &Vector3<f64>) -> Result<Pixel> {
    let theta = direction.x.hypot(direction.y).atan2(direction.z);
    let r = pal_radius(model, theta)?;
    let az = direction.y.atan2(direction.x);
    Ok(Pixel::new(
        model.center.u + r * az.cos(),
        model.center.v + r * az.sin(),
    ))
}

/// Per-output-pixel source coordinates into the annular image.
#[derive(Debug, Clone, PartialEq)]
pub struct UnwrapMapping {
    out_width: usize,
    out_height: usize,
    /// Interleaved `(u, v)` pairs, row-major.
    src: Vec<f32>,
}

impl UnwrapMapping {
    pub fn out_width(&self) -> usize {
        self.out_width
    }

    pub fn out_height(&self) -> usize {
        self.out_height
    }

    pub fn source(&self, col: usize, row: usize) -> Pixel {
        let i = 2 * (row * self.out_width + col);
        Pixel::new(self.src[i] as f64, self.src[i + 1] as f64)
    }

    /// Writes the binary table: `PALW`, `u32` LE width and height, then
    /// `f32` LE `(u, v)` pairs in row-major order.
    pub fn write_table<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Format(e.to_string());
        w.write_all(TABLE_MAGIC).map_err(io)?;
        w.write_all(&(self.out_width as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.out_height as u32).to_le_bytes()).map_err(io)?;
        let mut buf = Vec::with_capacity(self.src.len() * 4);
        for v in &self.src {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf).map_err(io)
    }

    pub fn read_table<R: Read>(mut r: R) -> Result<Self> {
        let io = |e: std::io::Error| Error::Format(e.to_string());
        let mut header = [0u8; 12];
        r.read_exact(&mut header).map_err(io)?;
        if &header[0..4] != TABLE_MAGIC {
            return Err(Error::Format("missing PALW magic".into()));
        }
        let out_width = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let out_height = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let count = out_width
            .checked_mul(out_height)
            .and_then(|n| n.checked_mul(2))
            .ok_or_else(|| Error::Format("table dimensions overflow".into()))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(io)?;
        if bytes.len() != count * 4 {
            return Err(Error::Format(format!(
                "expected {} bytes of coordinates, found {}",
                count * 4,
                bytes.len()
            )));
        }
        let src = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            out_width,
            out_height,
            src,
        })
    }
}

/// Polar sampling grid unfolding the annulus into a `out_width` wide strip.
pub fn build_unwrap(model: &PalModel, out_width: usize) -> Result<UnwrapMapping> {
    model.validate()?;
    if out_width == 0 {
        return Err(Error::InvalidParameter("unwrap width must be at least 1".into()));
    }
    let (r_in, r_out) = (model.inner_radius(), model.outer_radius());
    let out_height = (r_out - r_in).round() as usize;
    if out_height < 2 {
        return Err(Error::InvalidParameter(format!(
            "annulus is only {out_height} px thick"
        )));
    }
    let step = (r_out - r_in) / (out_height - 1) as f64;
    let mut src = Vec::with_capacity(out_width * out_height * 2);
    for row in 0..out_height {
        let radius = r_in + row as f64 * step;
        for col in 0..out_width {
            let az = model.azimuth_zero + TAU * col as f64 / out_width as f64;
            src.push((model.center.u + radius * az.cos()) as f32);
            src.push((model.center.v + radius * az.sin()) as f32);
        }
    }
    Ok(UnwrapMapping {
        out_width,
        out_height,
        src,
    })
}

/// Resamples an annular image through a precomputed mapping. Samples that
/// fall off the source image get `fill`.
pub fn unwrap_image(
    annular: &Image,
    mapping: &UnwrapMapping,
    interp: Interpolation,
    fill: f32,
) -> Result<Image> {
    let (w, h) = annular.dims();
    let reachable = mapping.src.chunks_exact(2).any(|p| {
        p[0] >= -0.5 && p[1] >= -0.5 && (p[0] as f64) < w as f64 - 0.5 && (p[1] as f64) < h as f64 - 0.5
    });
    if !reachable {
        return Err(Error::DimensionMismatch {
            expected: (mapping.out_width, mapping.out_height),
            actual: (w, h),
        });
    }
    let c = annular.channels();
    let ow = mapping.out_width;
    let mut out = Image::new(ow, mapping.out_height, c, fill);
    out.as_mut_slice()
        .par_chunks_mut(ow * c)
        .enumerate()
        .for_each(|(row, dst)| {
            for col in 0..ow {
                let s = mapping.source(col, row);
                annular.sample_into(s.u, s.v, interp, &mut dst[col * c..(col + 1) * c]);
            }
        });
    Ok(out)
}

/// Inverse of [`unwrap_image`]: paints an annular image of the given size
/// from an unwrapped strip built with `model`. Column sampling wraps
/// across the seam; pixels outside the annulus get `fill`.
pub fn rewrap_image(
    unwrapped: &Image,
    model: &PalModel,
    width: usize,
    height: usize,
    fill: f32,
) -> Result<Image> {
    model.validate()?;
    let (uw, uh) = unwrapped.dims();
    if uw == 0 || uh < 2 {
        return Err(Error::InvalidParameter("unwrapped image too small".into()));
    }
    let (r_in, r_out) = (model.inner_radius(), model.outer_radius());
    let c = unwrapped.channels();
    let mut out = Image::new(width, height, c, fill);
    out.as_mut_slice()
        .par_chunks_mut(width * c)
        .enumerate()
        .for_each(|(y, dst)| {
            for x in 0..width {
                let du = x as f64 - model.center.u;
                let dv = y as f64 - model.center.v;
                let radius = du.hypot(dv);
                if radius < r_in || radius > r_out {
                    continue;
                }
                let row = (radius - r_in) * (uh - 1) as f64 / (r_out - r_in);
                let col = ((dv.atan2(du) - model.azimuth_zero) / TAU).rem_euclid(1.0) * uw as f64;
                let c0 = col.floor();
                let fc = col - c0;
                let c0 = c0 as usize % uw;
                let c1 = (c0 + 1) % uw;
                let r0 = (row.floor() as usize).min(uh - 2);
                let fr = row - r0 as f64;
                let px = &mut dst[x * c..(x + 1) * c];
                for (k, o) in px.iter_mut().enumerate() {
                    let s = |cc: usize, rr: usize| unwrapped.pixel(cc, rr)[k] as f64;
                    let top = (1.0 - fc) * s(c0, r0) + fc * s(c1, r0);
                    let bottom = (1.0 - fc) * s(c0, r0 + 1) + fc * s(c1, r0 + 1);
                    *o = ((1.0 - fr) * top + fr * bottom) as f32;
                }
            }
        });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> PalModel {
        PalModel::with_defaults(Pixel::new(1200.0, 1200.0), 0.003)
    }

    #[test]
    fn f_theta_values() {
        let m = model();
        let r30 = pal_radius(&m, 30f64.to_radians()).unwrap();
        assert!((r30 - 371.77).abs() < 0.02, "{r30}");
        let r95 = pal_radius(&m, 95f64.to_radians()).unwrap();
        assert!((r95 - 1177.3).abs() < 0.1, "{r95}");
        let t = 0.6;
        assert_eq!(pal_radius(&m, 2.0 * t).unwrap(), 2.0 * pal_radius(&m, t).unwrap());
        assert!(matches!(pal_radius(&m, 0.1), Err(Error::ThetaOutOfFov(_))));
        assert!(matches!(pal_radius(&m, 1.7), Err(Error::ThetaOutOfFov(_))));
    }

    #[test]
    fn ray_at_45_degrees() {
        let m = model();
        let r = pal_radius(&m, std::f64::consts::FRAC_PI_4).unwrap();
        let d = pal_ray(&m, &Pixel::new(m.center.u + r, m.center.v)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((d - Vector3::new(s, 0.0, s)).norm() < 1e-12);
        assert!(matches!(
            pal_ray(&m, &m.center),
            Err(Error::OutsideAnnulus(..))
        ));
    }

    #[test]
    fn unwrap_corners() {
        let mut m = model();
        m.pixel_pitch = 0.02;
        m.azimuth_zero = 0.3;
        let width = 360;
        let map = build_unwrap(&m, width).unwrap();
        assert_eq!(map.out_height(), (m.outer_radius() - m.inner_radius()).round() as usize);
        let s = map.source(0, 0);
        let r_in = m.inner_radius();
        assert!((s.u as f64 - (m.center.u + r_in * 0.3f64.cos())).abs() < 1e-3);
        assert!((s.v as f64 - (m.center.v + r_in * 0.3f64.sin())).abs() < 1e-3);
        let a = map.source(0, 5);
        let b = map.source(width / 2, 5);
        assert!(((a.u + b.u) / 2.0 - m.center.u).abs() < 1e-3);
        assert!(((a.v + b.v) / 2.0 - m.center.v).abs() < 1e-3);
        let last = map.source(0, map.out_height() - 1);
        assert!((last.distance(&m.center) - m.outer_radius()).abs() < 1e-3);
    }

    #[test]
    fn table_round_trip() {
        let mut m = model();
        m.pixel_pitch = 0.05;
        let map = build_unwrap(&m, 100).unwrap();
        let mut bytes = Vec::new();
        map.write_table(&mut bytes).unwrap();
        assert_eq!(&bytes[0..4], b"PALW");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 100);
        assert_eq!(bytes.len(), 12 + 100 * map.out_height() * 8);
        let back = UnwrapMapping::read_table(bytes.as_slice()).unwrap();
        assert_eq!(back, map);
        assert!(UnwrapMapping::read_table(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(UnwrapMapping::read_table(bad.as_slice()).is_err());
    }

    #[test]
    fn distortion_hook_inverts() {
        let mut m = model();
        m.distortion = vec![-0.02, 0.001];
        m.validate().unwrap();
        for t in [0.6, 1.0, 1.5] {
            let r = pal_radius(&m, t).unwrap();
            assert!((m.theta_from_radius(r) - t).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_models() {
        let mut m = model();
        m.theta_min = m.theta_max;
        assert!(m.validate().is_err());
        let mut m = model();
        m.pixel_pitch = 0.0;
        assert!(build_unwrap(&m, 10).is_err());
        assert!(build_unwrap(&model(), 0).is_err());
    }

    #[test]
    fn unwrap_rejects_unrelated_image() {
        let mut m = model();
        m.pixel_pitch = 0.05;
        let map = build_unwrap(&m, 64).unwrap();
        let tiny = Image::new(8, 8, 1, 0.0);
        assert!(matches!(
            unwrap_image(&tiny, &map, Interpolation::Nearest, 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
