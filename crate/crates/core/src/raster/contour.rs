use serde::{Deserialize, Serialize};

use super::{BinaryMask, RasterError};

/// Closed outer boundary through pixel centers, as `[x, y]` pixel indices.
///
/// The closing edge from the last point back to the first is implied.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Contour {
    pub points: Vec<[usize; 2]>,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

// Clockwise on screen (y grows downward), starting east.
const DIRS: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];
const WEST: usize = 4;

fn dir_index(dx: i64, dy: i64) -> usize {
    DIRS.iter()
        .position(|&d| d == (dx, dy))
        .expect("offset is a unit neighbor")
}

/// From `c`, whose neighbor in direction `back` is background, sweep
/// clockwise to the next foreground neighbor. Returns that pixel and the
/// direction from it to the last background pixel seen.
fn step(mask: &BinaryMask, c: (i64, i64), back: usize) -> Option<((i64, i64), usize)> {
    for k in 1..8 {
        let d = (back + k) % 8;
        let q = (c.0 + DIRS[d].0, c.1 + DIRS[d].1);
        if mask.get_signed(q.0, q.1) {
            let prev = DIRS[(d + 7) % 8];
            let b = (c.0 + prev.0, c.1 + prev.1);
            return Some((q, dir_index(b.0 - q.0, b.1 - q.1)));
        }
    }
    None
}

/// Moore-neighbor trace of the outer border of the component containing the
/// first set pixel in raster order, plus the shoelace area of that loop.
///
/// Tracing stops when the walk is back at the start pixel and about to repeat
/// its first move. A single pixel yields a one-point contour of area 0.
pub fn trace_contour(mask: &BinaryMask) -> Result<(Contour, f64), RasterError> {
    let (sx, sy) = mask.iter_set().next().ok_or(RasterError::EmptyComponent)?;
    let start = (sx as i64, sy as i64);
    let mut points = vec![[sx, sy]];

    let Some((first, first_back)) = step(mask, start, WEST) else {
        return Ok((Contour { points }, 0.0));
    };

    let (mut c, mut back) = (first, first_back);
    loop {
        let (next, next_back) = step(mask, c, back).expect("traced pixel has a neighbor");
        if c == start && next == first {
            break;
        }
        points.push([c.0 as usize, c.1 as usize]);
        c = next;
        back = next_back;
    }

    let contour = Contour { points };
    let area = shoelace_area(&contour);
    Ok((contour, area))
}

/// Absolute shoelace area of a closed pixel-center loop.
pub fn shoelace_area(contour: &Contour) -> f64 {
    let pts = &contour.points;
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice: i64 = 0;
    for k in 0..n {
        let [x0, y0] = pts[k];
        let [x1, y1] = pts[(k + 1) % n];
        twice += x0 as i64 * y1 as i64 - x1 as i64 * y0 as i64;
    }
    twice.abs() as f64 / 2.0
}
