//! PNG codecs for frames, depth maps and masks, and directory helpers.
//!
//! Depth maps are 16-bit single-channel PNGs in millimeters (0 = missing);
//! masks are 8-bit single-channel PNGs (0 = background, 255 = pothole).

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, RgbImage};
use thiserror::Error;

use crate::raster::{BinaryMask, DepthMap, RasterError, RasterImage};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        source: image::ImageError,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl IoError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn image(path: &Path, source: image::ImageError) -> Self {
        Self::Image {
            path: path.to_path_buf(),
            source,
        }
    }

    fn format(path: &Path, reason: impl Into<String>) -> Self {
        Self::Format {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }
}

fn raster_err(path: &Path, e: RasterError) -> IoError {
    IoError::format(path, e.to_string())
}

fn open(path: &Path) -> Result<DynamicImage, IoError> {
    image::open(path).map_err(|e| IoError::image(path, e))
}

fn ensure_parent(path: &Path) -> Result<(), IoError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| IoError::io(parent, e))?;
        }
    }
    Ok(())
}

/// Any PNG, converted to 8-bit RGB.
pub fn read_rgb_png(path: &Path) -> Result<RasterImage, IoError> {
    let img = open(path)?.into_rgb8();
    let (w, h) = img.dimensions();
    RasterImage::new(w as usize, h as usize, 3, img.into_raw()).map_err(|e| raster_err(path, e))
}

pub fn write_rgb_png(path: &Path, image: &RasterImage) -> Result<(), IoError> {
    ensure_parent(path)?;
    let (w, h) = (image.width() as u32, image.height() as u32);
    let result = match image.channels() {
        3 => RgbImage::from_raw(w, h, image.samples().to_vec())
            .expect("buffer length checked by RasterImage")
            .save(path),
        _ => GrayImage::from_raw(w, h, image.samples().to_vec())
            .expect("buffer length checked by RasterImage")
            .save(path),
    };
    result.map_err(|e| IoError::image(path, e))
}

/// 16-bit single-channel PNG in millimeters. 8-bit inputs are rejected
/// because their scale is ambiguous.
pub fn read_depth_png(path: &Path) -> Result<DepthMap, IoError> {
    match open(path)? {
        DynamicImage::ImageLuma16(img) => {
            let (w, h) = img.dimensions();
            DepthMap::new(w as usize, h as usize, img.into_raw()).map_err(|e| raster_err(path, e))
        }
        other => Err(IoError::format(
            path,
            format!(
                "depth maps must be 16-bit single-channel PNG, found {:?}",
                other.color()
            ),
        )),
    }
}

pub fn write_depth_png(path: &Path, depth: &DepthMap) -> Result<(), IoError> {
    ensure_parent(path)?;
    let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(
        depth.width() as u32,
        depth.height() as u32,
        depth.samples().to_vec(),
    )
    .expect("buffer length checked by DepthMap");
    img.save(path).map_err(|e| IoError::image(path, e))
}

/// Any nonzero sample is foreground.
pub fn read_mask_png(path: &Path) -> Result<BinaryMask, IoError> {
    let img = open(path)?.into_luma8();
    let (w, h) = img.dimensions();
    let bits = img.into_raw().into_iter().map(|v| v != 0).collect();
    BinaryMask::from_bits(w as usize, h as usize, bits).map_err(|e| raster_err(path, e))
}

pub fn write_mask_png(path: &Path, mask: &BinaryMask) -> Result<(), IoError> {
    ensure_parent(path)?;
    let raw = mask
        .bits()
        .iter()
        .map(|&b| if b { 255 } else { 0 })
        .collect();
    GrayImage::from_raw(mask.width() as u32, mask.height() as u32, raw)
        .expect("buffer length checked by BinaryMask")
        .save(path)
        .map_err(|e| IoError::image(path, e))
}

/// Sorted file stems in `dir` with extension `ext`. A missing directory
/// yields an empty list.
pub fn list_stems(dir: &Path, ext: &str) -> Result<Vec<String>, IoError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut stems = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| IoError::io(dir, e))? {
        let path = entry.map_err(|e| IoError::io(dir, e))?.path();
        if path.is_file() && path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    Ok(stems)
}

/// Width and height from the image header, without decoding pixels.
pub fn image_dimensions(path: &Path) -> Result<(usize, usize), IoError> {
    let (w, h) = image::image_dimensions(path).map_err(|e| IoError::image(path, e))?;
    Ok((w as usize, h as usize))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    ensure_parent(path)?;
    fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

pub fn read_string(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}
