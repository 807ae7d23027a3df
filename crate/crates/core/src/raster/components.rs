use serde::{Deserialize, Serialize};

use super::{BinaryMask, Instance, PixelBounds, RasterError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    pub fn from_count(n: u8) -> Option<Self> {
        match n {
            4 => Some(Self::Four),
            8 => Some(Self::Eight),
            _ => None,
        }
    }

    pub fn count(self) -> u8 {
        match self {
            Self::Four => 4,
            Self::Eight => 8,
        }
    }

    fn offsets(self) -> &'static [(i64, i64)] {
        const FOUR: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
        const EIGHT: [(i64, i64); 8] = [
            (1, 0),
            (1, 1),
            (0, 1),
            (-1, 1),
            (-1, 0),
            (-1, -1),
            (0, -1),
            (1, -1),
        ];
        match self {
            Self::Four => &FOUR,
            Self::Eight => &EIGHT,
        }
    }
}

/// A connected region before contour tracing.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub id: usize,
    pub mask: BinaryMask,
    pub pixel_area: usize,
    pub bbox: PixelBounds,
    pub centroid: [f64; 2],
}

/// Label connected regions of `mask`.
///
/// Components are returned ordered by the `(y_min, x_min)` corner of their
/// bounding box, falling back to the raster index of their first pixel; ids
/// follow that order.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Vec<Component> {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![usize::MAX; w * h];
    let mut found: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut stack = Vec::new();

    for start in 0..w * h {
        if !mask.bits()[start] || labels[start] != usize::MAX {
            continue;
        }
        let label = found.len();
        labels[start] = label;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(i) = stack.pop() {
            pixels.push(i);
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if mask.get_signed(nx, ny) {
                    let j = ny as usize * w + nx as usize;
                    if labels[j] == usize::MAX {
                        labels[j] = label;
                        stack.push(j);
                    }
                }
            }
        }
        found.push((start, pixels));
    }

    let mut components: Vec<(usize, Component)> = found
        .into_iter()
        .map(|(first, pixels)| {
            let mut bits = vec![false; w * h];
            let (mut sx, mut sy) = (0.0, 0.0);
            let mut b = PixelBounds {
                x_min: usize::MAX,
                y_min: usize::MAX,
                x_max: 0,
                y_max: 0,
            };
            for &i in &pixels {
                bits[i] = true;
                let (x, y) = (i % w, i / w);
                sx += x as f64;
                sy += y as f64;
                b.x_min = b.x_min.min(x);
                b.y_min = b.y_min.min(y);
                b.x_max = b.x_max.max(x);
                b.y_max = b.y_max.max(y);
            }
            let n = pixels.len();
            let component = Component {
                id: 0,
                mask: BinaryMask::from_bits(w, h, bits).expect("dims match source mask"),
                pixel_area: n,
                bbox: b,
                centroid: [sx / n as f64, sy / n as f64],
            };
            (first, component)
        })
        .collect();

    components.sort_by_key(|(first, c)| (c.bbox.y_min, c.bbox.x_min, *first));
    components
        .into_iter()
        .enumerate()
        .map(|(id, (_, mut c))| {
            c.id = id;
            c
        })
        .collect()
}

/// Components of `mask` with their outer contours traced.
pub fn extract_instances(
    mask: &BinaryMask,
    connectivity: Connectivity,
) -> Result<Vec<Instance>, RasterError> {
    connected_components(mask, connectivity)
        .into_iter()
        .map(Instance::from_component)
        .collect()
}
