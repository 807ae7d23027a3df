//! Side-by-side visualization of a characterized frame.
//!
//! With depth: annotated RGB | colorized depth | RGB-depth blend with
//! outlines. Without depth: annotated RGB | RGB tinted by instance masks.
//! Everything is integer arithmetic over fixed tables, so the same inputs
//! always produce the same bytes.

use thiserror::Error;

use crate::characterize::PotholeRecord;
use crate::raster::{boundary_pixels, DepthField, Instance, RasterError, RasterImage};

#[derive(Debug, Error)]
pub enum OverlayError {
    #[error("{what} is {width}x{height} but the frame is {frame_width}x{frame_height}")]
    DimensionMismatch {
        what: &'static str,
        width: usize,
        height: usize,
        frame_width: usize,
        frame_height: usize,
    },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Overlay {
    pub image: RasterImage,
    /// One label per instance, in instance order.
    pub labels: Vec<String>,
}

const PALETTE: [[u8; 3]; 8] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
];

pub fn instance_color(id: usize) -> [u8; 3] {
    PALETTE[id % PALETTE.len()]
}

const RAMP: [[u8; 3]; 5] = [
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
];

/// Fixed perceptual ramp over [0, 1]; missing depth is black.
pub fn depth_color(value: Option<f64>) -> [u8; 3] {
    let Some(v) = value else {
        return [0, 0, 0];
    };
    let t = v.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (t.floor() as usize).min(RAMP.len() - 2);
    let f = t - i as f64;
    let mut out = [0; 3];
    for c in 0..3 {
        let a = RAMP[i][c] as f64;
        let b = RAMP[i + 1][c] as f64;
        out[c] = (a + f * (b - a)).round() as u8;
    }
    out
}

/// 3x5 glyphs, one row per entry, most significant of 3 bits on the left.
fn glyph(c: char) -> [u8; 5] {
    match c.to_ascii_uppercase() {
        '0' => [7, 5, 5, 5, 7],
        '1' => [2, 6, 2, 2, 7],
        '2' => [7, 1, 7, 4, 7],
        '3' => [7, 1, 7, 1, 7],
        '4' => [5, 5, 7, 1, 1],
        '5' => [7, 4, 7, 1, 7],
        '6' => [7, 4, 7, 5, 7],
        '7' => [7, 1, 1, 1, 1],
        '8' => [7, 5, 7, 5, 7],
        '9' => [7, 5, 7, 1, 7],
        'A' => [2, 5, 7, 5, 5],
        'D' => [6, 5, 5, 5, 6],
        'P' => [7, 5, 7, 4, 4],
        'R' => [6, 5, 6, 5, 5],
        '#' => [5, 7, 5, 7, 5],
        '=' => [0, 7, 0, 7, 0],
        '.' => [0, 0, 0, 0, 2],
        '-' => [0, 0, 7, 0, 0],
        '%' => [5, 1, 2, 4, 5],
        ' ' => [0, 0, 0, 0, 0],
        _ => [7, 1, 3, 0, 2],
    }
}

const GLYPH_W: usize = 3;
const GLYPH_H: usize = 5;

#[derive(Clone)]
struct Canvas {
    width: usize,
    height: usize,
    px: Vec<[u8; 3]>,
}

impl Canvas {
    fn from_rgb(img: &RasterImage) -> Self {
        let px = (0..img.height())
            .flat_map(|y| (0..img.width()).map(move |x| (x, y)))
            .map(|(x, y)| match *img.pixel(x, y) {
                [g] => [g; 3],
                [r, g, b] => [r, g, b],
                _ => unreachable!("RasterImage has 1 or 3 channels"),
            })
            .collect();
        Self {
            width: img.width(),
            height: img.height(),
            px,
        }
    }

    fn put(&mut self, x: usize, y: usize, c: [u8; 3]) {
        if x < self.width && y < self.height {
            self.px[y * self.width + x] = c;
        }
    }

    fn blend(&mut self, x: usize, y: usize, c: [u8; 3]) {
        let p = &mut self.px[y * self.width + x];
        for i in 0..3 {
            p[i] = ((p[i] as u16 + c[i] as u16) / 2) as u8;
        }
    }

    /// Text on a black backing box, clipped to the canvas.
    fn text(&mut self, x0: usize, y0: usize, s: &str, color: [u8; 3]) {
        let w = s.chars().count() * (GLYPH_W + 1) + 1;
        for y in y0..y0 + GLYPH_H + 2 {
            for x in x0..x0 + w {
                self.put(x, y, [0, 0, 0]);
            }
        }
        for (i, ch) in s.chars().enumerate() {
            let gx = x0 + 1 + i * (GLYPH_W + 1);
            for (row, bits) in glyph(ch).iter().enumerate() {
                for col in 0..GLYPH_W {
                    if bits >> (GLYPH_W - 1 - col) & 1 == 1 {
                        self.put(gx + col, y0 + 1 + row, color);
                    }
                }
            }
        }
    }
}

fn check(what: &'static str, w: usize, h: usize, rgb: &RasterImage) -> Result<(), OverlayError> {
    if (w, h) != (rgb.width(), rgb.height()) {
        return Err(OverlayError::DimensionMismatch {
            what,
            width: w,
            height: h,
            frame_width: rgb.width(),
            frame_height: rgb.height(),
        });
    }
    Ok(())
}

fn label(inst: &Instance, record: Option<&PotholeRecord>, with_depth: bool) -> String {
    let mut s = format!("#{} A={:.1}", inst.id, inst.contour_area);
    if with_depth {
        match record.and_then(|r| r.rp_d_difference) {
            Some(rpd) => s.push_str(&format!(" RPD={rpd:.2}")),
            None => s.push_str(" RPD=-"),
        }
    }
    s
}

fn draw_annotations(canvas: &mut Canvas, instances: &[Instance], labels: &[String]) {
    for inst in instances {
        let color = instance_color(inst.id);
        for (x, y) in boundary_pixels(&inst.mask) {
            canvas.put(x, y, color);
        }
    }
    for (inst, text) in instances.iter().zip(labels) {
        let b = inst.bbox;
        let y = if b.y_min >= GLYPH_H + 2 {
            b.y_min - (GLYPH_H + 2)
        } else {
            b.y_max + 1
        };
        canvas.text(b.x_min, y, text, instance_color(inst.id));
    }
}

pub fn render_overlay(
    rgb: &RasterImage,
    depth: Option<&DepthField>,
    instances: &[Instance],
    records: &[PotholeRecord],
) -> Result<Overlay, OverlayError> {
    let (w, h) = (rgb.width(), rgb.height());
    if let Some(d) = depth {
        check("depth map", d.width(), d.height(), rgb)?;
    }
    for inst in instances {
        check("instance mask", inst.mask.width(), inst.mask.height(), rgb)?;
    }
    let labels: Vec<String> = instances
        .iter()
        .map(|inst| {
            let record = records.iter().find(|r| r.instance.id == inst.id);
            label(inst, record, depth.is_some())
        })
        .collect();

    let base = Canvas::from_rgb(rgb);
    let mut annotated = base.clone();
    draw_annotations(&mut annotated, instances, &labels);

    let mut panels = vec![annotated];
    match depth {
        Some(d) => {
            let mut colored = base.clone();
            let mut merged = base.clone();
            for y in 0..h {
                for x in 0..w {
                    let c = depth_color(d.get(x, y));
                    colored.put(x, y, c);
                    merged.blend(x, y, c);
                }
            }
            draw_annotations(&mut merged, instances, &labels);
            panels.push(colored);
            panels.push(merged);
        }
        None => {
            let mut tinted = base.clone();
            for inst in instances {
                let color = instance_color(inst.id);
                for (x, y) in inst.mask.iter_set() {
                    tinted.blend(x, y, color);
                }
            }
            panels.push(tinted);
        }
    }

    let n = panels.len();
    let mut samples = Vec::with_capacity(w * n * h * 3);
    for y in 0..h {
        for p in &panels {
            for c in &p.px[y * w..(y + 1) * w] {
                samples.extend_from_slice(c);
            }
        }
    }
    Ok(Overlay {
        image: RasterImage::new(w * n, h, 3, samples)?,
        labels,
    })
}
