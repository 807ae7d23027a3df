//! Raster and geometry primitives: images, depth maps, binary masks, polygons,
//! and the operations that turn segmentation output into pothole instances.

mod band;
mod components;
mod contour;
mod polygon;

pub use band::{boundary_pixels, surrounding_band};
pub use components::{connected_components, extract_instances, Component, Connectivity};
pub use contour::{shoelace_area, trace_contour, Contour};
pub use polygon::{rasterize_pixel_polygon, rasterize_polygon, Polygon};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("raster dimensions must be positive (got {width}x{height})")]
    EmptyDimensions { width: usize, height: usize },
    #[error("sample buffer has {actual} entries, expected {expected}")]
    SampleCount { expected: usize, actual: usize },
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    Channels(usize),
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon coordinate {value} at vertex {vertex} is outside [0, 1]")]
    CoordinateOutOfRange { vertex: usize, value: f64 },
    #[error("polygon has fewer than 3 distinct vertices after denormalization")]
    DegeneratePolygon,
    #[error("component is empty")]
    EmptyComponent,
    #[error("dimension mismatch: {a_width}x{a_height} vs {b_width}x{b_height}")]
    DimensionMismatch {
        a_width: usize,
        a_height: usize,
        b_width: usize,
        b_height: usize,
    },
}

fn check_dims(width: usize, height: usize) -> Result<(), RasterError> {
    if width == 0 || height == 0 {
        return Err(RasterError::EmptyDimensions { width, height });
    }
    Ok(())
}

/// 8-bit raster with 1 (gray) or 3 (RGB) interleaved channels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<u8>,
}

impl RasterImage {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        samples: Vec<u8>,
    ) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        if channels != 1 && channels != 3 {
            return Err(RasterError::Channels(channels));
        }
        let expected = width * height * channels;
        if samples.len() != expected {
            return Err(RasterError::SampleCount {
                expected,
                actual: samples.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            samples,
        })
    }

    pub fn filled(
        width: usize,
        height: usize,
        channels: usize,
        value: &[u8],
    ) -> Result<Self, RasterError> {
        if value.len() != channels {
            return Err(RasterError::Channels(value.len()));
        }
        let samples = value
            .iter()
            .copied()
            .cycle()
            .take(width * height * channels)
            .collect();
        Self::new(width, height, channels, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.samples[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [u8] {
        let i = (y * self.width + x) * self.channels;
        &mut self.samples[i..i + self.channels]
    }

    pub fn mirror_horizontal(&self) -> Self {
        let mut out = self.clone();
        let row = self.width * self.channels;
        for y in 0..self.height {
            for x in 0..self.width {
                let src = y * row + (self.width - 1 - x) * self.channels;
                let dst = y * row + x * self.channels;
                out.samples[dst..dst + self.channels]
                    .copy_from_slice(&self.samples[src..src + self.channels]);
            }
        }
        out
    }
}

/// Sample value that marks a pixel without a depth reading.
pub const MISSING_DEPTH: u16 = 0;

/// Depth raster in millimeters; [`MISSING_DEPTH`] marks pixels without a reading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    samples: Vec<u16>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, samples: Vec<u16>) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        if samples.len() != width * height {
            return Err(RasterError::SampleCount {
                expected: width * height,
                actual: samples.len(),
            });
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[u16] {
        &self.samples
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.samples[y * self.width + x]
    }

    pub fn valid_count(&self) -> usize {
        self.samples.iter().filter(|&&s| s != MISSING_DEPTH).count()
    }

    pub fn valid_fraction(&self) -> f64 {
        self.valid_count() as f64 / self.samples.len() as f64
    }

    pub fn zero_fraction(&self) -> f64 {
        1.0 - self.valid_fraction()
    }

    pub fn mirror_horizontal(&self) -> Self {
        let mut samples = Vec::with_capacity(self.samples.len());
        for row in self.samples.chunks_exact(self.width) {
            samples.extend(row.iter().rev());
        }
        Self {
            width: self.width,
            height: self.height,
            samples,
        }
    }
}

/// Per-pixel depth in normalized units; `None` marks a missing reading.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthField {
    width: usize,
    height: usize,
    values: Vec<Option<f64>>,
}

impl DepthField {
    pub fn new(width: usize, height: usize, values: Vec<Option<f64>>) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        if values.len() != width * height {
            return Err(RasterError::SampleCount {
                expected: width * height,
                actual: values.len(),
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        self.values[y * self.width + x]
    }

    pub fn map_valid(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| v.map(&f)).collect(),
        }
    }
}

/// Row-major binary occupancy raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            bits: vec![false; width * height],
        })
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        if bits.len() != width * height {
            return Err(RasterError::SampleCount {
                expected: width * height,
                actual: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Like [`get`](Self::get) but treats coordinates outside the frame as unset.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn pixel_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Set pixels as `(x, y)` in raster order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub fn same_dims(&self, other: &BinaryMask) -> Result<(), RasterError> {
        if self.width != other.width || self.height != other.height {
            return Err(RasterError::DimensionMismatch {
                a_width: self.width,
                a_height: self.height,
                b_width: other.width,
                b_height: other.height,
            });
        }
        Ok(())
    }

    pub fn union_with(&mut self, other: &BinaryMask) -> Result<(), RasterError> {
        self.same_dims(other)?;
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    pub fn intersection_count(&self, other: &BinaryMask) -> Result<usize, RasterError> {
        self.same_dims(other)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a && b)
            .count())
    }

    pub fn mirror_horizontal(&self) -> Self {
        let mut bits = Vec::with_capacity(self.bits.len());
        for row in self.bits.chunks_exact(self.width) {
            bits.extend(row.iter().rev());
        }
        Self {
            width: self.width,
            height: self.height,
            bits,
        }
    }

    /// Tight inclusive bounds of the set pixels, or `None` for an empty mask.
    pub fn bounds(&self) -> Option<PixelBounds> {
        let mut it = self.iter_set();
        let (x0, y0) = it.next()?;
        let mut b = PixelBounds {
            x_min: x0,
            y_min: y0,
            x_max: x0,
            y_max: y0,
        };
        for (x, y) in it {
            b.x_min = b.x_min.min(x);
            b.x_max = b.x_max.max(x);
            b.y_max = b.y_max.max(y);
        }
        Some(b)
    }
}

/// Inclusive pixel-index bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelBounds {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

impl PixelBounds {
    /// Continuous box covering the pixel squares, in pixel units.
    pub fn to_box(self) -> BBox {
        BBox {
            x_min: self.x_min as f64,
            y_min: self.y_min as f64,
            x_max: (self.x_max + 1) as f64,
            y_max: (self.y_max + 1) as f64,
        }
    }
}

/// Axis-aligned continuous box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min).max(0.0) * (self.y_max - self.y_min).max(0.0)
    }
}

/// One connected pothole region with its traced outer contour.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: usize,
    pub mask: BinaryMask,
    pub pixel_area: usize,
    pub contour: Contour,
    pub contour_area: f64,
    pub bbox: PixelBounds,
    pub centroid: [f64; 2],
}

impl Instance {
    pub fn from_component(component: Component) -> Result<Self, RasterError> {
        let (contour, contour_area) = trace_contour(&component.mask)?;
        Ok(Self {
            id: component.id,
            pixel_area: component.pixel_area,
            bbox: component.bbox,
            centroid: component.centroid,
            mask: component.mask,
            contour,
            contour_area,
        })
    }
}
