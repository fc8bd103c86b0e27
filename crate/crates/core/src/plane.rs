//! Dense raster containers shared by all modules.
//!
//! [`Plane`] holds one scalar per pixel (depth, disparity, Stokes planes,
//! labels). [`Image`] holds interleaved `f32` channels on a 0–255 scale and is
//! used for camera images (grayscale stereo input, RGB color and annular
//! frames).

use crate::error::{Error, Result};

/// Row-major single-channel raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Plane<T> {
    pub fn new(width: usize, height: usize, fill: T) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (data.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Plane<U> {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn ensure_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: self.dims(),
            });
        }
        Ok(())
    }
}

impl Plane<f64> {
    /// Bilinear sample at a continuous coordinate; `None` outside
    /// `[0, w-1] x [0, h-1]`.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> Option<f64> {
        bilinear_taps(self.width, self.height, u, v).map(|taps| {
            taps.iter()
                .map(|&(x, y, w)| w * self.get(x, y))
                .sum::<f64>()
        })
    }
}

impl Plane<f32> {
    /// Number of finite entries; NaN marks invalid pixels in float planes.
    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|v| v.is_finite()).count()
    }
}

/// The four weighted taps of a bilinear sample, or `None` if the coordinate
/// lies outside the pixel-center grid.
pub(crate) fn bilinear_taps(
    width: usize,
    height: usize,
    u: f64,
    v: f64,
) -> Option<[(usize, usize, f64); 4]> {
    if width == 0 || height == 0 || !u.is_finite() || !v.is_finite() {
        return None;
    }
    let max_u = (width - 1) as f64;
    let max_v = (height - 1) as f64;
    if u < 0.0 || v < 0.0 || u > max_u || v > max_v {
        return None;
    }
    let x0 = (u.floor() as usize).min(width.saturating_sub(2));
    let y0 = (v.floor() as usize).min(height.saturating_sub(2));
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = u - x0 as f64;
    let fy = v - y0 as f64;
    Some([
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x1, y0, fx * (1.0 - fy)),
        (x0, y1, (1.0 - fx) * fy),
        (x1, y1, fx * fy),
    ])
}

/// Resampling kernel used by the remapping operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Nearest,
    Bilinear,
}

/// Interleaved multi-channel image with `f32` samples on a 0–255 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, fill: f32) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![fill; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || data.len() != width * height * channels {
            return Err(Error::DimensionMismatch {
                expected: (width * channels, height),
                actual: (data.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn gray_from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> f32) -> Self {
        let plane = Plane::from_fn(width, height, f);
        Self {
            width,
            height,
            channels: 1,
            data: plane.into_vec(),
        }
    }

    pub fn from_plane(plane: &Plane<f32>) -> Self {
        Self {
            width: plane.width(),
            height: plane.height(),
            channels: 1,
            data: plane.as_slice().to_vec(),
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Extracts one channel as a plane.
    pub fn channel(&self, c: usize) -> Plane<f32> {
        assert!(c < self.channels);
        let data = self.data.iter().skip(c).step_by(self.channels).copied().collect();
        Plane {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Luma (Rec. 601 weights) for 3-channel input, copy for 1-channel input.
    pub fn to_gray(&self) -> Image {
        match self.channels {
            1 => self.clone(),
            _ => {
                let data = self
                    .data
                    .chunks_exact(self.channels)
                    .map(|p| {
                        if p.len() >= 3 {
                            0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]
                        } else {
                            p[0]
                        }
                    })
                    .collect();
                Image {
                    width: self.width,
                    height: self.height,
                    channels: 1,
                    data,
                }
            }
        }
    }

    /// Samples every channel at a continuous coordinate into `out`. Returns
    /// `false` (leaving `out` untouched) when the coordinate is off-grid.
    pub fn sample_into(&self, u: f64, v: f64, interp: Interpolation, out: &mut [f32]) -> bool {
        match interp {
            Interpolation::Nearest => {
                let (x, y) = ((u + 0.5).floor(), (v + 0.5).floor());
                if !(x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64) {
                    return false;
                }
                out.copy_from_slice(self.pixel(x as usize, y as usize));
                true
            }
            Interpolation::Bilinear => {
                let Some(taps) = bilinear_taps(self.width, self.height, u, v) else {
                    return false;
                };
                out.iter_mut().for_each(|o| *o = 0.0);
                for (x, y, w) in taps {
                    if w == 0.0 {
                        continue;
                    }
                    for (o, &s) in out.iter_mut().zip(self.pixel(x, y)) {
                        *o += (w * s as f64) as f32;
                    }
                }
                true
            }
        }
    }
}
