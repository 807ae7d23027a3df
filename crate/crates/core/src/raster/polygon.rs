use serde::{Deserialize, Serialize};

use super::{BBox, BinaryMask, RasterError};

/// Closed polygon in normalized image coordinates (`[0, 1]` on both axes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<[f64; 2]>,
}

impl Polygon {
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self, RasterError> {
        if vertices.len() < 3 {
            return Err(RasterError::TooFewVertices(vertices.len()));
        }
        for (i, v) in vertices.iter().enumerate() {
            for &c in v {
                if !(0.0..=1.0).contains(&c) {
                    return Err(RasterError::CoordinateOutOfRange {
                        vertex: i,
                        value: c,
                    });
                }
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Vertices scaled to pixel units of a `width` x `height` frame.
    pub fn to_pixels(&self, width: usize, height: usize) -> Vec<[f64; 2]> {
        self.vertices
            .iter()
            .map(|&[x, y]| [x * width as f64, y * height as f64])
            .collect()
    }

    /// Extent box in pixel units.
    pub fn bbox(&self, width: usize, height: usize) -> BBox {
        let pts = self.to_pixels(width, height);
        let mut b = BBox {
            x_min: f64::INFINITY,
            y_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for [x, y] in pts {
            b.x_min = b.x_min.min(x);
            b.y_min = b.y_min.min(y);
            b.x_max = b.x_max.max(x);
            b.y_max = b.y_max.max(y);
        }
        b
    }

    pub fn mirror_horizontal(&self) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&[x, y]| [1.0 - x, y]).collect(),
        }
    }
}

pub fn rasterize_polygon(
    poly: &Polygon,
    width: usize,
    height: usize,
) -> Result<BinaryMask, RasterError> {
    rasterize_pixel_polygon(&poly.to_pixels(width, height), width, height)
}

/// Even-odd scanline fill of a polygon given in pixel units.
///
/// Pixel `(i, j)` is set when its center `(i + 0.5, j + 0.5)` is inside. Edges
/// are half-open in y and crossings are inclusive on the left, so points on a
/// top or left edge count as inside and adjacent polygons never share a pixel.
pub fn rasterize_pixel_polygon(
    vertices: &[[f64; 2]],
    width: usize,
    height: usize,
) -> Result<BinaryMask, RasterError> {
    let mut distinct: Vec<[f64; 2]> = Vec::with_capacity(3);
    for v in vertices {
        if !distinct.contains(v) {
            distinct.push(*v);
            if distinct.len() == 3 {
                break;
            }
        }
    }
    if distinct.len() < 3 {
        return Err(RasterError::DegeneratePolygon);
    }

    let mut mask = BinaryMask::new(width, height)?;
    let n = vertices.len();
    let mut crossings = Vec::new();
    for j in 0..height {
        let yc = j as f64 + 0.5;
        crossings.clear();
        for k in 0..n {
            let [x0, y0] = vertices[k];
            let [x1, y1] = vertices[(k + 1) % n];
            if (y0 <= yc && yc < y1) || (y1 <= yc && yc < y0) {
                crossings.push(x0 + (yc - y0) * (x1 - x0) / (y1 - y0));
            }
        }
        crossings.sort_by(f64::total_cmp);
        for span in crossings.chunks_exact(2) {
            // centers in [span[0], span[1])
            let start = (span[0] - 0.5).ceil().max(0.0);
            let end = (span[1] - 0.5).ceil().min(width as f64);
            if start >= end {
                continue;
            }
            for i in start as usize..end as usize {
                mask.set(i, j, true);
            }
        }
    }
    Ok(mask)
}
