//! PNG readers and writers for every artifact the pipeline touches.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, RgbImage};
use polyfuse_core::stereo::DepthMap;
use polyfuse_core::{Image, LabelMap, MosaicFrame, MosaicLayout, Plane};

use crate::error::{CliError, CliResult};

type Gray16 = ImageBuffer<Luma<u16>, Vec<u16>>;

fn open(path: &Path) -> CliResult<DynamicImage> {
    image::open(path).map_err(|e| CliError::io(path, e))
}

fn save<P, C>(img: &ImageBuffer<P, C>, path: &Path) -> CliResult<()>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| CliError::io(path, e))
}

/// Color image as stored (gray stays 1 channel, everything else becomes
/// RGB), 0–255 scale; 16-bit inputs are rescaled.
pub fn read_image(path: &Path) -> CliResult<Image> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let to_f32 = |v: Vec<u16>| v.into_iter().map(|x| x as f32 / 257.0).collect();
    let gray = matches!(img.color(), image::ColorType::L8 | image::ColorType::L16 | image::ColorType::La8 | image::ColorType::La16);
    let result = match (gray, img) {
        (true, DynamicImage::ImageLuma8(b)) => Image::from_vec(w, h, 1, b.into_raw().into_iter().map(f32::from).collect()),
        (true, other) => Image::from_vec(w, h, 1, to_f32(other.into_luma16().into_raw())),
        (false, DynamicImage::ImageRgb8(b)) => Image::from_vec(w, h, 3, b.into_raw().into_iter().map(f32::from).collect()),
        (false, other) => Image::from_vec(w, h, 3, to_f32(other.into_rgb16().into_raw())),
    };
    result.map_err(|e| CliError::io(path, e))
}

/// Polarizer mosaic; 8- and 16-bit gray PNGs normalize to `[0, 1]`.
pub fn read_mosaic(path: &Path, layout: MosaicLayout) -> CliResult<MosaicFrame> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        other => other.into_luma16().into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
    };
    let plane = Plane::from_vec(w, h, data).map_err(|e| CliError::io(path, e))?;
    MosaicFrame::new(plane, layout).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// 16-bit mosaic, `round(I·65535)`.
pub fn write_mosaic(mosaic: &MosaicFrame, path: &Path) -> CliResult<()> {
    let p = mosaic.intensity();
    let buf: Vec<u16> = p
        .as_slice()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    let img = Gray16::from_raw(p.width() as u32, p.height() as u32, buf).expect("buffer sized from plane");
    save(&img, path)
}

pub fn read_labels(path: &Path) -> CliResult<LabelMap> {
    let img = open(path)?;
    if img.color() != image::ColorType::L8 {
        return Err(CliError::config(format!(
            "{}: label maps must be 8-bit single-channel PNG",
            path.display()
        )));
    }
    let b = img.into_luma8();
    let (w, h) = (b.width() as usize, b.height() as usize);
    let plane = Plane::from_vec(w, h, b.into_raw()).map_err(|e| CliError::io(path, e))?;
    Ok(LabelMap::new(plane))
}

pub fn write_labels(labels: &LabelMap, path: &Path) -> CliResult<()> {
    let (w, h) = labels.dims();
    let img = GrayImage::from_raw(w as u32, h as u32, labels.labels.as_slice().to_vec())
        .expect("buffer sized from plane");
    save(&img, path)
}

/// Depth in millimeters, rounded half up; invalid and out-of-range pixels
/// are 0.
pub fn depth_to_mm(depth: &DepthMap) -> Vec<u16> {
    depth
        .depth
        .as_slice()
        .iter()
        .map(|&z| {
            let mm = (z as f64 * 1000.0 + 0.5).floor();
            if z.is_finite() && z > 0.0 && mm <= u16::MAX as f64 {
                mm as u16
            } else {
                0
            }
        })
        .collect()
}

pub fn write_depth(depth: &DepthMap, path: &Path) -> CliResult<()> {
    let (w, h) = depth.dims();
    let img = Gray16::from_raw(w as u32, h as u32, depth_to_mm(depth)).expect("buffer sized from plane");
    save(&img, path)
}

/// Raw millimeter codes of a depth PNG.
pub fn read_depth_mm(path: &Path) -> CliResult<Plane<u16>> {
    let img = open(path)?;
    if img.color() != image::ColorType::L16 {
        return Err(CliError::config(format!("{}: depth maps must be 16-bit gray", path.display())));
    }
    let b = img.into_luma16();
    let (w, h) = (b.width() as usize, b.height() as usize);
    Plane::from_vec(w, h, b.into_raw()).map_err(|e| CliError::io(path, e))
}

/// Meters for a millimeter code; 0 is invalid.
pub fn mm_to_meters(mm: u16) -> f64 {
    if mm == 0 {
        f64::NAN
    } else {
        mm as f64 / 1000.0
    }
}

/// Inverse of [`write_depth`], rounded to the f32 depth map.
pub fn read_depth(path: &Path) -> CliResult<DepthMap> {
    Ok(DepthMap::new(read_depth_mm(path)?.map(|mm| mm_to_meters(mm) as f32)))
}

/// Rounds a 0–255 image to 8 bits, half up.
fn to_u8(v: f32) -> u8 {
    (v as f64 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn image_to_gray8(img: &Image) -> GrayImage {
    let g = if img.channels() == 1 { img.clone() } else { img.to_gray() };
    GrayImage::from_raw(g.width() as u32, g.height() as u32, g.as_slice().iter().map(|&v| to_u8(v)).collect())
        .expect("buffer sized from image")
}

pub fn image_to_rgb8(img: &Image) -> RgbImage {
    let (w, h) = img.dims();
    let c = img.channels();
    let mut data = Vec::with_capacity(w * h * 3);
    for px in img.as_slice().chunks_exact(c) {
        for k in 0..3 {
            data.push(to_u8(px[k.min(c - 1)]));
        }
    }
    RgbImage::from_raw(w as u32, h as u32, data).expect("buffer sized from image")
}

pub fn write_gray8(img: &GrayImage, path: &Path) -> CliResult<()> {
    save(img, path)
}

pub fn write_rgb8(img: &RgbImage, path: &Path) -> CliResult<()> {
    save(img, path)
}
