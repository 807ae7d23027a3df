//! Synthetic RGB/depth/mask scenes with independently computed expectations.
//!
//! A scene is a flat depth plane with flat-bottomed cavities (ellipses or
//! polygons) sunk into it. Every expected value is computed here by direct
//! brute force over the noiseless raster, without calling the raster or
//! characterization code it is meant to check:
//!
//! - membership: pixel centers tested against the analytic shape
//! - contour area: Pick's theorem on the outer boundary pixels, valid for
//!   hole-free shapes whose traced boundary does not revisit pixels
//! - band: minimum center distance to the cavity, tested pixel by pixel

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{emit_text, AnnotationLine};
use crate::characterize::{
    frame_report, normalize_depth, CharacterizeParams, FrameReport, RpdMode,
};
use crate::dataset::FramePair;
use crate::io::{self, IoError};
use crate::raster::{
    extract_instances, surrounding_band, BinaryMask, Connectivity, DepthMap, Instance, RasterError,
    RasterImage,
};
use crate::report;

pub const BACKGROUND_RGB: [u8; 3] = [128, 128, 128];
pub const CAVITY_RGB: [u8; 3] = [88, 80, 72];
/// Vertices used to write an ellipse as an annotation polygon.
pub const ELLIPSE_POLYGON_VERTICES: usize = 64;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("primitive {index} extends outside the {width}x{height} frame")]
    PrimitiveOutOfBounds {
        index: usize,
        width: usize,
        height: usize,
    },
    #[error("primitive {index}: {reason}")]
    InvalidPrimitive { index: usize, reason: String },
    #[error("primitives {a} and {b} touch or overlap")]
    PrimitivesTouch { a: usize, b: usize },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Report(#[from] report::ReportError),
}

/// Shapes in continuous pixel coordinates: pixel `(i, j)` covers
/// `[i, i+1) x [j, j+1)` and is sampled at its center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Primitive {
    Ellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
        /// Added to the plane depth inside the shape (normalized units).
        depth_offset: f64,
    },
    Polygon {
        vertices: Vec<[f64; 2]>,
        depth_offset: f64,
    },
}

impl Primitive {
    pub fn depth_offset(&self) -> f64 {
        match self {
            Primitive::Ellipse { depth_offset, .. } | Primitive::Polygon { depth_offset, .. } => {
                *depth_offset
            }
        }
    }

    fn extent(&self) -> [f64; 4] {
        match self {
            Primitive::Ellipse {
                center: [cx, cy],
                semi_axes: [a, b],
                ..
            } => [cx - a, cy - b, cx + a, cy + b],
            Primitive::Polygon { vertices, .. } => vertices.iter().fold(
                [
                    f64::INFINITY,
                    f64::INFINITY,
                    f64::NEG_INFINITY,
                    f64::NEG_INFINITY,
                ],
                |e, &[x, y]| [e[0].min(x), e[1].min(y), e[2].max(x), e[3].max(y)],
            ),
        }
    }

    /// Center-sampled membership.
    pub fn contains(&self, px: f64, py: f64) -> bool {
        match self {
            Primitive::Ellipse {
                center: [cx, cy],
                semi_axes: [a, b],
                ..
            } => {
                let (dx, dy) = ((px - cx) / a, (py - cy) / b);
                dx * dx + dy * dy <= 1.0
            }
            Primitive::Polygon { vertices, .. } => {
                // ray cast toward +x
                let mut inside = false;
                let n = vertices.len();
                for k in 0..n {
                    let [x0, y0] = vertices[k];
                    let [x1, y1] = vertices[(k + 1) % n];
                    if (y0 > py) != (y1 > py) {
                        let xc = x0 + (py - y0) / (y1 - y0) * (x1 - x0);
                        if px < xc {
                            inside = !inside;
                        }
                    }
                }
                inside
            }
        }
    }

    /// Outline as normalized annotation vertices.
    pub fn outline(&self, width: usize, height: usize) -> Vec<[f64; 2]> {
        let (w, h) = (width as f64, height as f64);
        let norm = |x: f64, y: f64| [(x / w).clamp(0.0, 1.0), (y / h).clamp(0.0, 1.0)];
        match self {
            Primitive::Ellipse {
                center: [cx, cy],
                semi_axes: [a, b],
                ..
            } => (0..ELLIPSE_POLYGON_VERTICES)
                .map(|k| {
                    let t = std::f64::consts::TAU * k as f64 / ELLIPSE_POLYGON_VERTICES as f64;
                    norm(cx + a * t.cos(), cy + b * t.sin())
                })
                .collect(),
            Primitive::Polygon { vertices, .. } => {
                vertices.iter().map(|&[x, y]| norm(x, y)).collect()
            }
        }
    }

    pub fn mirror_horizontal(&self, width: usize) -> Self {
        let w = width as f64;
        match self {
            Primitive::Ellipse {
                center: [cx, cy],
                semi_axes,
                depth_offset,
            } => Primitive::Ellipse {
                center: [w - cx, *cy],
                semi_axes: *semi_axes,
                depth_offset: *depth_offset,
            },
            Primitive::Polygon {
                vertices,
                depth_offset,
            } => Primitive::Polygon {
                vertices: vertices.iter().map(|&[x, y]| [w - x, y]).collect(),
                depth_offset: *depth_offset,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub primitives: Vec<Primitive>,
    /// Plane depth in normalized units.
    pub plane_depth: f64,
    /// Gaussian noise sigma in normalized units; 0 disables noise.
    pub noise_sigma: f64,
    /// Fraction of depth samples blanked to missing.
    pub missing_speckle: f64,
    pub band_radius: usize,
    pub depth_range_mm: f64,
}

impl SceneSpec {
    pub fn new(width: usize, height: usize, plane_depth: f64) -> Self {
        Self {
            width,
            height,
            primitives: Vec::new(),
            plane_depth,
            noise_sigma: 0.0,
            missing_speckle: 0.0,
            band_radius: 15,
            depth_range_mm: 4500.0,
        }
    }

    pub fn with(mut self, primitive: Primitive) -> Self {
        self.primitives.push(primitive);
        self
    }

    pub fn is_noiseless(&self) -> bool {
        self.noise_sigma == 0.0 && self.missing_speckle == 0.0
    }

    pub fn mirror_horizontal(&self) -> Self {
        Self {
            primitives: self
                .primitives
                .iter()
                .map(|p| p.mirror_horizontal(self.width))
                .collect(),
            ..self.clone()
        }
    }
}

/// Expected values for one primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedInstance {
    pub primitive: usize,
    pub pixel_area: usize,
    /// Pick's theorem over the outer boundary pixels.
    pub contour_area: f64,
    /// Pixels with a 4-neighbor outside the shape.
    pub boundary_pixels: usize,
    /// Inclusive `[x_min, y_min, x_max, y_max]`.
    pub bbox: [usize; 4],
    pub p_d: f64,
    pub s_d: f64,
    pub band_pixels: usize,
    pub rp_d_difference: f64,
    pub rp_d_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedFrame {
    pub frame_area: f64,
    pub total_contour_area: f64,
    pub damage_percent: f64,
    pub instances: Vec<ExpectedInstance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub spec: SceneSpec,
    pub seed: u64,
    pub pair: FramePair,
    /// Union of all primitive masks.
    pub mask: BinaryMask,
    pub primitive_masks: Vec<BinaryMask>,
    /// One class-0 outline per primitive, in primitive order.
    pub ground_truth: Vec<AnnotationLine>,
    pub expected: ExpectedFrame,
}

fn validate(spec: &SceneSpec) -> Result<(), SynthError> {
    if spec.width == 0 || spec.height == 0 {
        return Err(SynthError::InvalidScene("frame must be non-empty".into()));
    }
    if !(spec.depth_range_mm > 0.0 && spec.depth_range_mm <= u16::MAX as f64) {
        return Err(SynthError::InvalidScene(format!(
            "depth range {} mm is outside (0, 65535]",
            spec.depth_range_mm
        )));
    }
    if !(spec.plane_depth > 0.0 && spec.plane_depth <= 1.0) {
        return Err(SynthError::InvalidScene(format!(
            "plane depth {} is outside (0, 1]",
            spec.plane_depth
        )));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(SynthError::InvalidScene("noise sigma must be >= 0".into()));
    }
    if !(0.0..=1.0).contains(&spec.missing_speckle) {
        return Err(SynthError::InvalidScene(
            "speckle fraction must be in [0, 1]".into(),
        ));
    }
    for (index, p) in spec.primitives.iter().enumerate() {
        let invalid = |reason: &str| SynthError::InvalidPrimitive {
            index,
            reason: reason.into(),
        };
        match p {
            Primitive::Ellipse { semi_axes, .. } => {
                if !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0) {
                    return Err(invalid("semi-axes must be positive"));
                }
            }
            Primitive::Polygon { vertices, .. } => {
                if vertices.len() < 3 {
                    return Err(invalid("polygon needs at least 3 vertices"));
                }
            }
        }
        let d = spec.plane_depth + p.depth_offset();
        if !(d > 0.0 && d <= 1.0) {
            return Err(invalid("plane depth plus offset must be in (0, 1]"));
        }
        let [x0, y0, x1, y1] = p.extent();
        if !(x0 >= 0.0 && y0 >= 0.0 && x1 <= spec.width as f64 && y1 <= spec.height as f64) {
            return Err(SynthError::PrimitiveOutOfBounds {
                index,
                width: spec.width,
                height: spec.height,
            });
        }
    }
    Ok(())
}

fn primitive_mask(p: &Primitive, w: usize, h: usize) -> Result<BinaryMask, RasterError> {
    let mut bits = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            bits[y * w + x] = p.contains(x as f64 + 0.5, y as f64 + 0.5);
        }
    }
    BinaryMask::from_bits(w, h, bits)
}

fn touches(a: &BinaryMask, b: &BinaryMask) -> bool {
    let (w, h) = (a.width() as i64, a.height() as i64);
    a.bits()
        .iter()
        .enumerate()
        .filter(|(_, &s)| s)
        .any(|(i, _)| {
            let (x, y) = (i as i64 % w, i as i64 / w);
            (-1..=1).any(|dy| {
                (-1..=1).any(|dx| {
                    let (nx, ny) = (x + dx, y + dy);
                    nx >= 0 && ny >= 0 && nx < w && ny < h && b.bits()[(ny * w + nx) as usize]
                })
            })
        })
}

fn quantize(v: f64, range: f64) -> u16 {
    // never produce the missing sentinel by rounding
    (v * range).round().clamp(1.0, u16::MAX as f64) as u16
}

fn expected_instance(
    index: usize,
    mask: &BinaryMask,
    union: &BinaryMask,
    depth: &[u16],
    spec: &SceneSpec,
) -> ExpectedInstance {
    let (w, h) = (spec.width, spec.height);
    let inside = |x: i64, y: i64| {
        x >= 0
            && y >= 0
            && (x as usize) < w
            && (y as usize) < h
            && mask.bits()[y as usize * w + x as usize]
    };
    let range = spec.depth_range_mm;

    let mut pixel_area = 0;
    let mut boundary = Vec::new();
    let mut bbox = [usize::MAX, usize::MAX, 0, 0];
    let mut p_sum = 0.0;
    for y in 0..h {
        for x in 0..w {
            if !mask.bits()[y * w + x] {
                continue;
            }
            pixel_area += 1;
            p_sum += depth[y * w + x] as f64 / range;
            bbox = [
                bbox[0].min(x),
                bbox[1].min(y),
                bbox[2].max(x),
                bbox[3].max(y),
            ];
            let (xi, yi) = (x as i64, y as i64);
            if !(inside(xi + 1, yi)
                && inside(xi - 1, yi)
                && inside(xi, yi + 1)
                && inside(xi, yi - 1))
            {
                boundary.push((xi, yi));
            }
        }
    }
    let contour_area = if pixel_area == 1 {
        0.0
    } else {
        // Pick: A = I + B/2 - 1 with I = pixel_area - B
        pixel_area as f64 - boundary.len() as f64 / 2.0 - 1.0
    };

    let r = spec.band_radius as i64;
    let mut s_sum = 0.0;
    let mut band_pixels = 0;
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = y as usize * w + x as usize;
            if union.bits()[i] {
                continue;
            }
            let near = boundary.iter().any(|&(bx, by)| {
                let (dx, dy) = (bx - x, by - y);
                dx * dx + dy * dy <= r * r
            });
            if near {
                band_pixels += 1;
                s_sum += depth[i] as f64 / range;
            }
        }
    }
    let p_d = p_sum / pixel_area as f64;
    let s_d = s_sum / band_pixels as f64;
    ExpectedInstance {
        primitive: index,
        pixel_area,
        contour_area,
        boundary_pixels: boundary.len(),
        bbox,
        p_d,
        s_d,
        band_pixels,
        rp_d_difference: (p_d - s_d) * 100.0,
        rp_d_ratio: (p_d - s_d) / s_d * 100.0,
    }
}

/// Build the scene; deterministic for a given `(spec, seed)`.
pub fn generate(spec: &SceneSpec, seed: u64) -> Result<SyntheticScene, SynthError> {
    validate(spec)?;
    let (w, h) = (spec.width, spec.height);
    let masks: Vec<BinaryMask> = spec
        .primitives
        .iter()
        .map(|p| primitive_mask(p, w, h))
        .collect::<Result<_, _>>()?;
    for (i, m) in masks.iter().enumerate() {
        if m.is_empty() {
            return Err(SynthError::InvalidPrimitive {
                index: i,
                reason: "covers no pixel center".into(),
            });
        }
        for (j, other) in masks.iter().enumerate().skip(i + 1) {
            if touches(m, other) {
                return Err(SynthError::PrimitivesTouch { a: i, b: j });
            }
        }
    }

    let mut union = BinaryMask::new(w, h)?;
    let mut clean = vec![quantize(spec.plane_depth, spec.depth_range_mm); w * h];
    let mut rgb = RasterImage::filled(w, h, 3, &BACKGROUND_RGB)?;
    for (p, m) in spec.primitives.iter().zip(&masks) {
        let v = quantize(spec.plane_depth + p.depth_offset(), spec.depth_range_mm);
        for (x, y) in m.iter_set() {
            union.set(x, y, true);
            clean[y * w + x] = v;
            rgb.pixel_mut(x, y).copy_from_slice(&CAVITY_RGB);
        }
    }

    let instances: Vec<ExpectedInstance> = masks
        .iter()
        .enumerate()
        .map(|(i, m)| expected_instance(i, m, &union, &clean, spec))
        .collect();
    let total_contour_area = instances.iter().fold(0.0, |acc, e| acc + e.contour_area);
    let frame_area = (w * h) as f64;

    // noise and speckle come after the expectations are captured
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = clean;
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma * spec.depth_range_mm)
            .expect("sigma validated as finite and non-negative");
        for s in &mut samples {
            *s = (*s as f64 + normal.sample(&mut rng))
                .round()
                .clamp(1.0, u16::MAX as f64) as u16;
        }
    }
    if spec.missing_speckle > 0.0 {
        for s in &mut samples {
            if rng.random_bool(spec.missing_speckle) {
                *s = 0;
            }
        }
    }

    let depth = DepthMap::new(w, h, samples)?;
    let pair = FramePair {
        rgb,
        depth,
        source_id: format!("synth_{seed}"),
        provenance: crate::dataset::Provenance::Original,
    };
    let ground_truth = spec
        .primitives
        .iter()
        .map(|p| AnnotationLine {
            class_id: 0,
            polygon: p.outline(w, h),
            confidence: None,
        })
        .collect();
    Ok(SyntheticScene {
        spec: spec.clone(),
        seed,
        pair,
        mask: union,
        primitive_masks: masks,
        ground_truth,
        expected: ExpectedFrame {
            frame_area,
            total_contour_area,
            damage_percent: 100.0 * total_contour_area / frame_area,
            instances,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub checks: Vec<Check>,
}

impl Diagnostics {
    fn push(&mut self, name: impl Into<String>, expected: f64, actual: f64, tolerance: f64) {
        let pass = if tolerance == 0.0 {
            expected == actual
        } else {
            (expected - actual).abs() <= tolerance
        };
        self.checks.push(Check {
            name: name.into(),
            expected,
            actual,
            tolerance,
            pass,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

/// Run instance extraction and characterization on the scene's mask and
/// depth map.
pub fn run_pipeline(scene: &SyntheticScene) -> Result<(Vec<Instance>, FrameReport), SynthError> {
    let instances = extract_instances(&scene.mask, Connectivity::Eight)?;
    let field = normalize_depth(&scene.pair.depth, scene.spec.depth_range_mm)
        .map_err(|e| SynthError::InvalidScene(e.to_string()))?;
    let params = CharacterizeParams {
        band_radius: scene.spec.band_radius,
        rpd_mode: RpdMode::Difference,
        ..Default::default()
    };
    let report = frame_report(
        &scene.pair.source_id,
        &instances,
        scene.expected.frame_area,
        Some(&field),
        &params,
    )
    .map_err(|e| SynthError::InvalidScene(e.to_string()))?;
    Ok((instances, report))
}

/// Compare every recovered quantity with the scene's expectations. Depth
/// means must match exactly on noiseless scenes and within three standard
/// errors otherwise.
pub fn round_trip_check(scene: &SyntheticScene) -> Diagnostics {
    let mut d = Diagnostics::default();
    let (instances, report) = match run_pipeline(scene) {
        Ok(r) => r,
        Err(_) => {
            d.push("pipeline ran", 1.0, 0.0, 0.0);
            return d;
        }
    };
    let exp = &scene.expected;
    d.push(
        "instance count",
        exp.instances.len() as f64,
        instances.len() as f64,
        0.0,
    );
    d.push(
        "damage_percent",
        exp.damage_percent,
        report.damage_percent,
        1e-9,
    );

    let by_bbox: BTreeMap<[usize; 4], &Instance> = instances
        .iter()
        .map(|i| ([i.bbox.x_min, i.bbox.y_min, i.bbox.x_max, i.bbox.y_max], i))
        .collect();
    let sigma = scene.spec.noise_sigma;
    for e in &exp.instances {
        let tag = |what: &str| format!("primitive {} {what}", e.primitive);
        let Some(inst) = by_bbox.get(&e.bbox) else {
            d.push(tag("found"), 1.0, 0.0, 0.0);
            continue;
        };
        d.push(
            tag("pixel_area"),
            e.pixel_area as f64,
            inst.pixel_area as f64,
            0.0,
        );
        d.push(tag("contour_area"), e.contour_area, inst.contour_area, 1e-9);
        d.push(
            tag("contour points"),
            e.boundary_pixels as f64,
            inst.contour.len() as f64,
            0.0,
        );

        let band = surrounding_band(&inst.mask, &scene.mask, scene.spec.band_radius);
        let band_count = band.as_ref().map_or(0, |b| b.pixel_count());
        d.push(
            tag("band pixels"),
            e.band_pixels as f64,
            band_count as f64,
            0.0,
        );

        let record = report.potholes.iter().find(|r| r.instance.id == inst.id);
        let Some(stats) = record.and_then(|r| r.depth.as_ref()) else {
            d.push(tag("depth stats"), 1.0, 0.0, 0.0);
            continue;
        };
        let record = record.expect("stats imply a record");
        let (tol_p, tol_s) = if scene.spec.is_noiseless() {
            (0.0, 0.0)
        } else {
            let se = |n: usize| 3.0 * sigma / (n.max(1) as f64).sqrt() + 1e-9;
            let valid_p = (stats.valid_pothole_fraction * stats.pothole_pixels as f64).round();
            let valid_b = (stats.valid_band_fraction * stats.band_pixels as f64).round();
            (se(valid_p as usize), se(valid_b as usize))
        };
        d.push(tag("p_d"), e.p_d, stats.p_d, tol_p);
        d.push(tag("s_d"), e.s_d, stats.s_d, tol_s);
        if let (Some(ratio), Some(diff)) = (record.rp_d_ratio, record.rp_d_difference) {
            d.push(tag("rp_d ratio identity"), diff / stats.s_d, ratio, 1e-9);
        }
    }
    d
}

/// Mirroring the scene's rasters must give the same damage and areas.
pub fn mirror_check(scene: &SyntheticScene) -> Diagnostics {
    let mut d = Diagnostics::default();
    let mut mirrored = scene.clone();
    mirrored.mask = scene.mask.mirror_horizontal();
    mirrored.pair.rgb = scene.pair.rgb.mirror_horizontal();
    mirrored.pair.depth = scene.pair.depth.mirror_horizontal();
    let (Ok((a, ra)), Ok((b, rb))) = (run_pipeline(scene), run_pipeline(&mirrored)) else {
        d.push("pipeline ran", 1.0, 0.0, 0.0);
        return d;
    };
    d.push("damage_percent", ra.damage_percent, rb.damage_percent, 0.0);
    let areas = |v: &[Instance]| {
        let mut out: Vec<(usize, f64)> = v.iter().map(|i| (i.pixel_area, i.contour_area)).collect();
        out.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
        out
    };
    d.push("instance count", a.len() as f64, b.len() as f64, 0.0);
    for (k, (x, y)) in areas(&a).into_iter().zip(areas(&b)).enumerate() {
        d.push(
            format!("instance {k} pixel_area"),
            x.0 as f64,
            y.0 as f64,
            0.0,
        );
        d.push(format!("instance {k} contour_area"), x.1, y.1, 0.0);
    }
    d
}

/// Random separated ellipses on a `width` x `height` frame. Semi-axes lie
/// in [8, 20] with aspect ratio at most 2, keeping shapes fat enough for
/// the boundary-count area oracle.
pub fn random_scene_spec(seed: u64, width: usize, height: usize) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = SceneSpec::new(width, height, rng.random_range(0.3..0.6));
    spec.band_radius = rng.random_range(3..=8);
    let target = rng.random_range(0..=4);
    let mut extents: Vec<[f64; 4]> = Vec::new();
    for _ in 0..target {
        for _attempt in 0..50 {
            let a: f64 = rng.random_range(8.0..20.0);
            let b: f64 = rng.random_range((a / 2.0).max(8.0)..=(2.0 * a).min(20.0));
            if 2.0 * a + 2.0 > width as f64 || 2.0 * b + 2.0 > height as f64 {
                break;
            }
            let cx = rng.random_range(a + 1.0..width as f64 - a - 1.0);
            let cy = rng.random_range(b + 1.0..height as f64 - b - 1.0);
            let e = [cx - a, cy - b, cx + a, cy + b];
            let gap = 3.0;
            let clear = extents.iter().all(|o| {
                e[0] > o[2] + gap || o[0] > e[2] + gap || e[1] > o[3] + gap || o[1] > e[3] + gap
            });
            if clear {
                extents.push(e);
                spec.primitives.push(Primitive::Ellipse {
                    center: [cx, cy],
                    semi_axes: [a, b],
                    depth_offset: rng.random_range(0.05..0.3),
                });
                break;
            }
        }
    }
    spec
}

/// Write a scene in the standard directory layout under `dir`: `rgb/`,
/// `depth/`, `labels/` (ground truth), `preds/` (the same polygons at full
/// confidence), `masks/` and `expected/`.
pub fn write_scene(dir: &Path, id: &str, scene: &SyntheticScene) -> Result<(), SynthError> {
    io::write_rgb_png(&dir.join("rgb").join(format!("{id}.png")), &scene.pair.rgb)?;
    io::write_depth_png(
        &dir.join("depth").join(format!("{id}.png")),
        &scene.pair.depth,
    )?;
    io::write_mask_png(&dir.join("masks").join(format!("{id}.png")), &scene.mask)?;
    io::write_bytes(
        &dir.join("labels").join(format!("{id}.txt")),
        emit_text(&scene.ground_truth).as_bytes(),
    )?;
    let preds: Vec<AnnotationLine> = scene
        .ground_truth
        .iter()
        .map(|l| AnnotationLine {
            confidence: Some(1.0),
            ..l.clone()
        })
        .collect();
    io::write_bytes(
        &dir.join("preds").join(format!("{id}.txt")),
        emit_text(&preds).as_bytes(),
    )?;
    io::write_bytes(
        &dir.join("expected").join(format!("{id}.json")),
        &report::emit_json(&scene.expected)?,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characterize::{depth_stats, CharacterizeError};

    fn circle(cx: f64, cy: f64, r: f64, offset: f64) -> Primitive {
        Primitive::Ellipse {
            center: [cx, cy],
            semi_axes: [r, r],
            depth_offset: offset,
        }
    }

    #[test]
    fn single_circle_expectations() {
        let spec = SceneSpec::new(100, 80, 0.55).with(circle(50.0, 40.0, 20.0, 0.20));
        let scene = generate(&spec, 1).unwrap();
        let e = &scene.expected.instances[0];
        assert!((e.p_d - 0.75).abs() < 1e-12);
        assert!((e.s_d - 0.55).abs() < 1e-12);
        assert!((e.rp_d_difference - 20.0).abs() < 1e-9);
        let d = round_trip_check(&scene);
        assert!(d.passed(), "{:?}", d.failures());
    }

    #[test]
    fn empty_scene() {
        let scene = generate(&SceneSpec::new(32, 24, 0.5), 0).unwrap();
        assert!(scene.mask.is_empty());
        let (_, report) = run_pipeline(&scene).unwrap();
        assert_eq!(report.damage_percent_display, "0.00");
        assert!(round_trip_check(&scene).passed());
    }

    #[test]
    fn full_speckle_is_insufficient_coverage() {
        let mut spec = SceneSpec::new(60, 60, 0.5).with(circle(30.0, 30.0, 10.0, 0.1));
        spec.missing_speckle = 1.0;
        let scene = generate(&spec, 3).unwrap();
        let (instances, report) = run_pipeline(&scene).unwrap();
        assert!(report.potholes[0].warning.is_some());
        let field = normalize_depth(&scene.pair.depth, 4500.0).unwrap();
        assert!(matches!(
            depth_stats(&instances[0].mask, &scene.mask, &field, 15, 0.2),
            Err(CharacterizeError::InsufficientDepthCoverage { .. })
        ));
    }

    #[test]
    fn bounds_and_touching() {
        let spec = SceneSpec::new(40, 40, 0.5).with(circle(5.0, 20.0, 8.0, 0.1));
        assert!(matches!(
            generate(&spec, 0),
            Err(SynthError::PrimitiveOutOfBounds { index: 0, .. })
        ));
        let spec = SceneSpec::new(60, 40, 0.5)
            .with(circle(15.0, 20.0, 10.0, 0.1))
            .with(circle(35.0, 20.0, 10.0, 0.1));
        assert!(matches!(
            generate(&spec, 0),
            Err(SynthError::PrimitivesTouch { .. })
        ));
        let spec = SceneSpec::new(40, 40, 0.9).with(circle(20.0, 20.0, 8.0, 0.2));
        assert!(generate(&spec, 0).is_err());
    }

    #[test]
    fn neighbors_with_overlapping_bands() {
        let mut spec = SceneSpec::new(80, 40, 0.4)
            .with(circle(20.0, 20.0, 10.0, 0.1))
            .with(circle(46.0, 20.0, 10.0, 0.25));
        spec.band_radius = 10;
        let scene = generate(&spec, 2).unwrap();
        let d = round_trip_check(&scene);
        assert!(d.passed(), "{:?}", d.failures());
        assert!(mirror_check(&scene).passed());
    }

    #[test]
    fn polygon_primitives() {
        let square = Primitive::Polygon {
            vertices: vec![[10.0, 10.0], [30.0, 10.0], [30.0, 30.0], [10.0, 30.0]],
            depth_offset: 0.1,
        };
        let tri = Primitive::Polygon {
            vertices: vec![[40.0, 35.0], [58.0, 5.0], [58.0, 35.0]],
            depth_offset: 0.2,
        };
        let mut spec = SceneSpec::new(64, 40, 0.5).with(square).with(tri);
        spec.band_radius = 4;
        let scene = generate(&spec, 0).unwrap();
        assert_eq!(scene.expected.instances[0].pixel_area, 400);
        assert_eq!(scene.expected.instances[0].contour_area, 361.0);
        let d = round_trip_check(&scene);
        assert!(d.passed(), "{:?}", d.failures());
    }

    #[test]
    fn noisy_scene_within_standard_error() {
        let mut spec = SceneSpec::new(100, 80, 0.5).with(circle(50.0, 40.0, 15.0, 0.2));
        spec.noise_sigma = 0.01;
        spec.missing_speckle = 0.1;
        spec.band_radius = 6;
        let scene = generate(&spec, 9).unwrap();
        let d = round_trip_check(&scene);
        assert!(d.passed(), "{:?}", d.failures());
    }

    #[test]
    fn generation_is_deterministic() {
        let mut spec = random_scene_spec(4, 160, 120);
        spec.noise_sigma = 0.02;
        spec.missing_speckle = 0.05;
        assert_eq!(generate(&spec, 4).unwrap(), generate(&spec, 4).unwrap());
        assert_eq!(
            random_scene_spec(4, 160, 120),
            random_scene_spec(4, 160, 120)
        );
    }

    #[test]
    fn random_scenes_round_trip() {
        for seed in 0..10 {
            let scene = generate(&random_scene_spec(seed, 160, 120), seed).unwrap();
            let d = round_trip_check(&scene);
            assert!(d.passed(), "seed {seed}: {:?}", d.failures());
        }
    }

    #[test]
    fn written_layout() {
        let dir = tempfile::tempdir().unwrap();
        let scene = generate(&random_scene_spec(1, 160, 120), 1).unwrap();
        write_scene(dir.path(), "s1", &scene).unwrap();
        for sub in [
            "rgb/s1.png",
            "depth/s1.png",
            "masks/s1.png",
            "labels/s1.txt",
            "preds/s1.txt",
            "expected/s1.json",
        ] {
            assert!(dir.path().join(sub).is_file(), "{sub}");
        }
        assert_eq!(
            io::read_depth_png(&dir.path().join("depth/s1.png")).unwrap(),
            scene.pair.depth
        );
    }
}
