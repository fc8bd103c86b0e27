//! Division-of-focal-plane polarimetry: mosaic demosaicing, linear Stokes
//! recovery, degree of linear polarization and the Fresnel reflection model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plane::Plane;

/// Default DoLP division floor, as a fraction of full scale.
pub const DEFAULT_DOLP_EPSILON: f64 = 1e-4;

/// Transmission axis of a wire-grid micro-polarizer, measured from the image
/// `+u` axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    #[serde(rename = "0")]
    Deg0,
    #[serde(rename = "45")]
    Deg45,
    #[serde(rename = "90")]
    Deg90,
    #[serde(rename = "135")]
    Deg135,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::Deg0,
        Orientation::Deg45,
        Orientation::Deg90,
        Orientation::Deg135,
    ];

    pub fn radians(self) -> f64 {
        match self {
            Orientation::Deg0 => 0.0,
            Orientation::Deg45 => std::f64::consts::FRAC_PI_4,
            Orientation::Deg90 => std::f64::consts::FRAC_PI_2,
            Orientation::Deg135 => 3.0 * std::f64::consts::FRAC_PI_4,
        }
    }

    /// `(cos 2φ, sin 2φ)` without trigonometric rounding.
    pub fn double_angle(self) -> (f64, f64) {
        match self {
            Orientation::Deg0 => (1.0, 0.0),
            Orientation::Deg45 => (0.0, 1.0),
            Orientation::Deg90 => (-1.0, 0.0),
            Orientation::Deg135 => (0.0, -1.0),
        }
    }
}

/// Polarizer orientation at each position of the 2×2 superpixel, indexed
/// `[row][column]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MosaicLayout(pub [[Orientation; 2]; 2]);

impl Default for MosaicLayout {
    /// 90° / 45° over 135° / 0°.
    fn default() -> Self {
        use Orientation::*;
        MosaicLayout([[Deg90, Deg45], [Deg135, Deg0]])
    }
}

impl MosaicLayout {
    /// `(column, row)` offset of `orientation` inside the superpixel.
    pub fn offset(&self, orientation: Orientation) -> Result<(usize, usize)> {
        for (row, cells) in self.0.iter().enumerate() {
            for (col, &o) in cells.iter().enumerate() {
                if o == orientation {
                    return Ok((col, row));
                }
            }
        }
        Err(Error::InvalidParameter(format!(
            "mosaic layout lacks orientation {orientation:?}"
        )))
    }

    pub fn validate(&self) -> Result<()> {
        for o in Orientation::ALL {
            self.offset(o)?;
        }
        Ok(())
    }

    pub fn at(&self, x: usize, y: usize) -> Orientation {
        self.0[y % 2][x % 2]
    }
}

/// Raw polarizer-mosaic frame with linear intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MosaicFrame {
    intensity: Plane<f64>,
    layout: MosaicLayout,
}

impl MosaicFrame {
    pub fn new(intensity: Plane<f64>, layout: MosaicLayout) -> Result<Self> {
        let (w, h) = intensity.dims();
        if w % 2 != 0 || h % 2 != 0 {
            return Err(Error::OddDimensions(w, h));
        }
        layout.validate()?;
        if let Some(v) = intensity
            .as_slice()
            .iter()
            .find(|v| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidParameter(format!(
                "mosaic intensity {v} outside [0, 1]"
            )));
        }
        Ok(Self { intensity, layout })
    }

    pub fn intensity(&self) -> &Plane<f64> {
        &self.intensity
    }

    pub fn layout(&self) -> &MosaicLayout {
        &self.layout
    }

    pub fn dims(&self) -> (usize, usize) {
        self.intensity.dims()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemosaicMode {
    /// One sample per orientation per 2×2 block (half resolution).
    #[default]
    Superpixel,
    /// Full resolution; missing orientations interpolated from the
    /// same-orientation lattice with border replication.
    Bilinear,
}

/// Per-orientation intensity planes.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationPlanes {
    pub i0: Plane<f64>,
    pub i45: Plane<f64>,
    pub i90: Plane<f64>,
    pub i135: Plane<f64>,
}

impl OrientationPlanes {
    pub fn get(&self, o: Orientation) -> &Plane<f64> {
        match o {
            Orientation::Deg0 => &self.i0,
            Orientation::Deg45 => &self.i45,
            Orientation::Deg90 => &self.i90,
            Orientation::Deg135 => &self.i135,
        }
    }
}

pub fn demosaic(mosaic: &MosaicFrame, mode: DemosaicMode) -> Result<OrientationPlanes> {
    let m = mosaic.intensity();
    let (w, h) = m.dims();
    if w % 2 != 0 || h % 2 != 0 {
        return Err(Error::OddDimensions(w, h));
    }
    let (lw, lh) = (w / 2, h / 2);
    let plane_for = |o: Orientation| -> Result<Plane<f64>> {
        let (ox, oy) = mosaic.layout().offset(o)?;
        let lattice = |i: usize, j: usize| m.get(2 * i + ox, 2 * j + oy);
        Ok(match mode {
            DemosaicMode::Superpixel => Plane::from_fn(lw, lh, lattice),
            DemosaicMode::Bilinear => Plane::from_fn(w, h, |x, y| {
                let (i0, i1, fi) = lattice_taps(x, ox, lw);
                let (j0, j1, fj) = lattice_taps(y, oy, lh);
                let top = (1.0 - fi) * lattice(i0, j0) + fi * lattice(i1, j0);
                let bottom = (1.0 - fi) * lattice(i0, j1) + fi * lattice(i1, j1);
                (1.0 - fj) * top + fj * bottom
            }),
        })
    };
    Ok(OrientationPlanes {
        i0: plane_for(Orientation::Deg0)?,
        i45: plane_for(Orientation::Deg45)?,
        i90: plane_for(Orientation::Deg90)?,
        i135: plane_for(Orientation::Deg135)?,
    })
}

/// Neighboring lattice indices and weight for full-resolution coordinate `x`
/// on a stride-2 lattice starting at `offset`, clamped to `[0, n-1]`.
fn lattice_taps(x: usize, offset: usize, n: usize) -> (usize, usize, f64) {
    let s = (x as f64 - offset as f64) / 2.0;
    let base = s.floor();
    let frac = s - base;
    let clamp = |i: f64| i.clamp(0.0, (n - 1) as f64) as usize;
    (clamp(base), clamp(base + 1.0), frac)
}

/// Linear Stokes planes plus the `|(I0+I90) - (I45+I135)|` residual.
#[derive(Debug, Clone, PartialEq)]
pub struct StokesPlanes {
    pub s0: Plane<f64>,
    pub s1: Plane<f64>,
    pub s2: Plane<f64>,
    pub residual: Plane<f64>,
}

pub fn stokes_from_planes(planes: &OrientationPlanes) -> Result<StokesPlanes> {
    let dims = planes.i0.dims();
    planes.i45.ensure_dims(dims)?;
    planes.i90.ensure_dims(dims)?;
    planes.i135.ensure_dims(dims)?;
    let zip = |f: &dyn Fn(f64, f64, f64, f64) -> f64| {
        let data = planes
            .i0
            .as_slice()
            .iter()
            .zip(planes.i45.as_slice())
            .zip(planes.i90.as_slice())
            .zip(planes.i135.as_slice())
            .map(|(((&a, &b), &c), &d)| f(a, b, c, d))
            .collect();
        Plane::from_vec(dims.0, dims.1, data)
    };
    Ok(StokesPlanes {
        s0: zip(&|i0, _, i90, _| i0 + i90)?,
        s1: zip(&|i0, _, i90, _| i0 - i90)?,
        s2: zip(&|_, i45, _, i135| i45 - i135)?,
        residual: zip(&|i0, i45, i90, i135| ((i0 + i90) - (i45 + i135)).abs())?,
    })
}

/// Degree of linear polarization, clamped to `[0, 1]`. Pixels with
/// `S0 < epsilon` are invalid (NaN).
pub fn dolp(s0: &Plane<f64>, s1: &Plane<f64>, s2: &Plane<f64>, epsilon: f64) -> Result<Plane<f64>> {
    s1.ensure_dims(s0.dims())?;
    s2.ensure_dims(s0.dims())?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dolp epsilon must be positive, got {epsilon}"
        )));
    }
    let data = s0
        .as_slice()
        .iter()
        .zip(s1.as_slice())
        .zip(s2.as_slice())
        .map(|((&a, &b), &c)| dolp_value(a, b, c, epsilon))
        .collect();
    Plane::from_vec(s0.width(), s0.height(), data)
}

#[inline]
pub fn dolp_value(s0: f64, s1: f64, s2: f64, epsilon: f64) -> f64 {
    if !(s0 >= epsilon) {
        return f64::NAN;
    }
    (s1.hypot(s2) / s0.max(epsilon)).clamp(0.0, 1.0)
}

/// Stokes planes and DoLP recovered from one mosaic frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationFrame {
    pub s0: Plane<f64>,
    pub s1: Plane<f64>,
    pub s2: Plane<f64>,
    pub dolp: Plane<f64>,
    pub residual: Plane<f64>,
}

impl PolarizationFrame {
    pub fn from_mosaic(mosaic: &MosaicFrame, mode: DemosaicMode, epsilon: f64) -> Result<Self> {
        let planes = demosaic(mosaic, mode)?;
        let stokes = stokes_from_planes(&planes)?;
        let dolp = dolp(&stokes.s0, &stokes.s1, &stokes.s2, epsilon)?;
        Ok(Self {
            s0: stokes.s0,
            s1: stokes.s1,
            s2: stokes.s2,
            dolp,
            residual: stokes.residual,
        })
    }
}

/// Fresnel amplitude coefficients for s- and p-polarized light.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FresnelCoefficients {
    pub r_s: f64,
    /// Sign convention where `r_p = r_s` at normal incidence.
    pub r_p: f64,
    pub t_s: f64,
    pub t_p: f64,
    /// Refraction angle from Snell's law.
    pub theta_t: f64,
}

impl FresnelCoefficients {
    pub fn reflectance_s(&self) -> f64 {
        self.r_s * self.r_s
    }

    pub fn reflectance_p(&self) -> f64 {
        self.r_p * self.r_p
    }
}

/// Fresnel coefficients at an interface from index `n1` into `n2` for
/// incidence angle `theta_i` in `[0, π/2)`.
pub fn fresnel(n1: f64, n2: f64, theta_i: f64) -> Result<FresnelCoefficients> {
    if !(n1 > 0.0 && n2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "refractive indices must be positive (n1 = {n1}, n2 = {n2})"
        )));
    }
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta_i) {
        return Err(Error::InvalidParameter(format!(
            "incidence angle {theta_i} outside [0, pi/2)"
        )));
    }
    let (sin_i, cos_i) = theta_i.sin_cos();
    let sin_t = n1 / n2 * sin_i;
    if sin_t > 1.0 {
        return Err(Error::TotalInternalReflection(sin_t));
    }
    let theta_t = sin_t.asin();
    let cos_t = (1.0 - sin_t * sin_t).sqrt();
    let s_den = n1 * cos_i + n2 * cos_t;
    let p_den = n2 * cos_i + n1 * cos_t;
    Ok(FresnelCoefficients {
        r_s: (n1 * cos_i - n2 * cos_t) / s_den,
        t_s: 2.0 * n1 * cos_i / s_den,
        r_p: (n1 * cos_t - n2 * cos_i) / p_den,
        t_p: 2.0 * n1 * cos_i / p_den,
        theta_t,
    })
}

/// Brewster angle `atan(n2 / n1)`.
pub fn brewster_angle(n1: f64, n2: f64) -> f64 {
    (n2 / n1).atan()
}

/// DoLP of the reflected beam for unpolarized incident light,
/// `|R_s - R_p| / (R_s + R_p)`.
pub fn reflection_dolp(n1: f64, n2: f64, theta_i: f64) -> Result<f64> {
    let c = fresnel(n1, n2, theta_i)?;
    let (rs, rp) = (c.reflectance_s(), c.reflectance_p());
    if rs + rp < 1e-15 {
        return Err(Error::ZeroReflectance);
    }
    Ok((rs - rp).abs() / (rs + rp))
}

/// Linear blue (0) to red (1) colormap; invalid pixels are black.
pub fn dolp_pseudocolor(dolp: &Plane<f64>) -> image::RgbImage {
    image::RgbImage::from_fn(dolp.width() as u32, dolp.height() as u32, |x, y| {
        let d = dolp.get(x as usize, y as usize);
        if !d.is_finite() {
            return image::Rgb([0, 0, 0]);
        }
        let d = d.clamp(0.0, 1.0);
        image::Rgb([quantize_unit(d), 0, quantize_unit(1.0 - d)])
    })
}

/// DoLP as 8-bit gray (255 = 1.0, invalid = 0).
pub fn dolp_to_gray8(dolp: &Plane<f64>) -> image::GrayImage {
    image::GrayImage::from_fn(dolp.width() as u32, dolp.height() as u32, |x, y| {
        let d = dolp.get(x as usize, y as usize);
        image::Luma([if d.is_finite() { quantize_unit(d) } else { 0 }])
    })
}

fn quantize_unit(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planes(i0: f64, i45: f64, i90: f64, i135: f64) -> OrientationPlanes {
        OrientationPlanes {
            i0: Plane::new(1, 1, i0),
            i45: Plane::new(1, 1, i45),
            i90: Plane::new(1, 1, i90),
            i135: Plane::new(1, 1, i135),
        }
    }

    #[test]
    fn layout_read_off() {
        let m = Plane::from_vec(2, 2, vec![0.9, 0.45, 0.135, 0.0]).unwrap();
        let frame = MosaicFrame::new(m, MosaicLayout::default()).unwrap();
        let p = demosaic(&frame, DemosaicMode::Superpixel).unwrap();
        assert_eq!(p.i90.as_slice(), &[0.9]);
        assert_eq!(p.i45.as_slice(), &[0.45]);
        assert_eq!(p.i135.as_slice(), &[0.135]);
        assert_eq!(p.i0.as_slice(), &[0.0]);
    }

    #[test]
    fn constant_mosaic_both_modes() {
        let frame = MosaicFrame::new(Plane::new(8, 6, 0.5), MosaicLayout::default()).unwrap();
        for mode in [DemosaicMode::Superpixel, DemosaicMode::Bilinear] {
            let p = demosaic(&frame, mode).unwrap();
            for o in Orientation::ALL {
                assert!(p.get(o).as_slice().iter().all(|&v| v == 0.5));
            }
        }
        let p = demosaic(&frame, DemosaicMode::Bilinear).unwrap();
        assert_eq!(p.i0.dims(), (8, 6));
    }

    #[test]
    fn bilinear_keeps_lattice_samples() {
        let m = Plane::from_fn(8, 8, |x, y| ((x * 7 + y * 3) % 11) as f64 / 10.0);
        let frame = MosaicFrame::new(m.clone(), MosaicLayout::default()).unwrap();
        let p = demosaic(&frame, DemosaicMode::Bilinear).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                let o = frame.layout().at(x, y);
                assert_eq!(p.get(o).get(x, y), m.get(x, y));
            }
        }
    }

    #[test]
    fn mosaic_validation() {
        assert!(matches!(
            MosaicFrame::new(Plane::new(3, 2, 0.0), MosaicLayout::default()),
            Err(Error::OddDimensions(3, 2))
        ));
        assert!(MosaicFrame::new(Plane::new(2, 2, 1.5), MosaicLayout::default()).is_err());
        use Orientation::*;
        let bad = MosaicLayout([[Deg0, Deg0], [Deg45, Deg90]]);
        assert!(MosaicFrame::new(Plane::new(2, 2, 0.0), bad).is_err());
    }

    #[test]
    fn stokes_examples() {
        let s = stokes_from_planes(&planes(0.5, 0.5, 0.5, 0.5)).unwrap();
        assert_eq!((s.s0.get(0, 0), s.s1.get(0, 0), s.s2.get(0, 0)), (1.0, 0.0, 0.0));
        let s = stokes_from_planes(&planes(1.0, 0.5, 0.0, 0.5)).unwrap();
        assert_eq!((s.s0.get(0, 0), s.s1.get(0, 0), s.s2.get(0, 0)), (1.0, 1.0, 0.0));
        let s = stokes_from_planes(&planes(0.5, 1.0, 0.5, 0.0)).unwrap();
        assert_eq!((s.s0.get(0, 0), s.s1.get(0, 0), s.s2.get(0, 0)), (1.0, 0.0, 1.0));
        assert_eq!(s.residual.get(0, 0), 0.0);

        let mut p = planes(0.5, 0.5, 0.5, 0.5);
        p.i90 = Plane::new(2, 1, 0.5);
        assert!(matches!(
            stokes_from_planes(&p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dolp_examples() {
        assert_eq!(dolp_value(1.0, 1.0, 0.0, 1e-4), 1.0);
        assert_eq!(dolp_value(1.0, 0.0, 0.0, 1e-4), 0.0);
        assert_eq!(dolp_value(1.0, 0.6, 0.8, 1e-4), 1.0);
        assert!(dolp_value(1e-5, 0.0, 0.0, 1e-4).is_nan());
        assert!(dolp(
            &Plane::new(1, 1, 1.0),
            &Plane::new(1, 1, 0.0),
            &Plane::new(1, 1, 0.0),
            0.0
        )
        .is_err());
    }

    #[test]
    fn fresnel_normal_incidence() {
        let c = fresnel(1.0, 1.5, 0.0).unwrap();
        assert!((c.r_s + 0.2).abs() < 1e-12);
        assert!((c.r_p + 0.2).abs() < 1e-12);
        assert!((c.t_s - 0.8).abs() < 1e-12);
        assert!((c.t_p - 0.8).abs() < 1e-12);
    }

    #[test]
    fn fresnel_brewster() {
        let c = fresnel(1.0, 1.5, brewster_angle(1.0, 1.5)).unwrap();
        assert!(c.r_p.abs() < 1e-12);
        assert!((reflection_dolp(1.0, 1.33, brewster_angle(1.0, 1.33)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fresnel_errors() {
        assert!(matches!(
            fresnel(1.5, 1.0, 1.2),
            Err(Error::TotalInternalReflection(_))
        ));
        assert!(fresnel(1.0, 1.5, std::f64::consts::FRAC_PI_2).is_err());
        assert!(fresnel(-1.0, 1.5, 0.1).is_err());
        assert_eq!(reflection_dolp(1.0, 1.33, 0.0).unwrap(), 0.0);
        assert!(matches!(
            reflection_dolp(1.0, 1.0, 0.3),
            Err(Error::ZeroReflectance)
        ));
    }

    #[test]
    fn colormaps() {
        let p = Plane::from_vec(3, 1, vec![0.0, 1.0, f64::NAN]).unwrap();
        let c = dolp_pseudocolor(&p);
        assert_eq!(c.get_pixel(0, 0).0, [0, 0, 255]);
        assert_eq!(c.get_pixel(1, 0).0, [255, 0, 0]);
        assert_eq!(c.get_pixel(2, 0).0, [0, 0, 0]);
        let g = dolp_to_gray8(&p);
        assert_eq!(g.as_raw(), &vec![0, 255, 0]);
    }
}
