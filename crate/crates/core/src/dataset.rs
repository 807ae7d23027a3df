//! RGB-depth dataset preparation: cleaning, depth-consistent augmentation,
//! resizing and a family-atomic train/test split.
//!
//! Geometric transforms are applied to the RGB frame and the depth map
//! together. Depth is only ever resampled by nearest neighbor so a missing
//! sample is never blended with a valid one.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::io::{self, IoError};
use crate::raster::{DepthMap, RasterError, RasterImage, MISSING_DEPTH};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const SATURATION_SCALE: f64 = 1.5;
pub const BRIGHTNESS_RANGE: (f64, f64) = (0.75, 1.25);
pub const CONTRAST_RANGE: (f64, f64) = (0.75, 1.25);
pub const ROTATION_RANGE_DEG: (f64, f64) = (-15.0, 15.0);
pub const SATURATION_RANGE: (f64, f64) = (0.7, 1.3);

#[derive(Debug, Error)]
pub enum PrepError {
    #[error("pair `{id}`: {reason}")]
    InvalidPair { id: String, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("requested {requested} test families but only {available} originals exist")]
    InsufficientData { requested: usize, available: usize },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentKind {
    Saturation,
    Mirror,
    SaturationMirror,
    Random,
}

impl AugmentKind {
    pub fn suffix(self) -> &'static str {
        match self {
            AugmentKind::Saturation => "sat",
            AugmentKind::Mirror => "mirror",
            AugmentKind::SaturationMirror => "sat_mirror",
            AugmentKind::Random => "random",
        }
    }
}

/// Parameters drawn for the random variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomAugment {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub rotation_deg: f64,
    pub flip: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Provenance {
    Original,
    Augmented {
        origin: String,
        kind: AugmentKind,
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        random: Option<RandomAugment>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FramePair {
    pub rgb: RasterImage,
    pub depth: DepthMap,
    pub source_id: String,
    pub provenance: Provenance,
}

impl FramePair {
    pub fn new(
        source_id: impl Into<String>,
        rgb: RasterImage,
        depth: DepthMap,
    ) -> Result<Self, PrepError> {
        let source_id = source_id.into();
        let invalid = |reason: String| PrepError::InvalidPair {
            id: source_id.clone(),
            reason,
        };
        if source_id.is_empty() {
            return Err(invalid("source id is empty".into()));
        }
        if rgb.channels() != 3 {
            return Err(invalid(format!(
                "expected 3 channels, got {}",
                rgb.channels()
            )));
        }
        if rgb.width() != depth.width() || rgb.height() != depth.height() {
            return Err(invalid(format!(
                "rgb is {}x{} but depth is {}x{}",
                rgb.width(),
                rgb.height(),
                depth.width(),
                depth.height()
            )));
        }
        Ok(Self {
            rgb,
            depth,
            source_id,
            provenance: Provenance::Original,
        })
    }

    /// Source id of the original this pair derives from (itself for originals).
    pub fn family_id(&self) -> &str {
        match &self.provenance {
            Provenance::Original => &self.source_id,
            Provenance::Augmented { origin, .. } => origin,
        }
    }
}

/// Drop pairs whose depth zero-fraction reaches `zero_fraction_threshold`.
/// With the default of 1.0 only all-zero depth maps are removed.
pub fn clean(
    pairs: Vec<FramePair>,
    zero_fraction_threshold: f64,
) -> Result<Vec<FramePair>, PrepError> {
    if !(zero_fraction_threshold > 0.0 && zero_fraction_threshold <= 1.0) {
        return Err(PrepError::InvalidParameter(format!(
            "zero-fraction threshold must be in (0, 1], got {zero_fraction_threshold}"
        )));
    }
    Ok(pairs
        .into_iter()
        .filter(|p| p.depth.zero_fraction() < zero_fraction_threshold)
        .collect())
}

/// Per-pair seed: first 8 bytes of SHA-256 over the run seed and source id.
pub fn derive_seed(seed: u64, source_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(source_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn luma(px: &[u8]) -> f64 {
    0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64
}

pub fn adjust_saturation(img: &RasterImage, scale: f64) -> RasterImage {
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let l = luma(img.pixel(x, y));
            for c in out.pixel_mut(x, y) {
                *c = to_u8(l + scale * (*c as f64 - l));
            }
        }
    }
    out
}

pub fn adjust_brightness(img: &RasterImage, factor: f64) -> RasterImage {
    let samples = img
        .samples()
        .iter()
        .map(|&v| to_u8(v as f64 * factor))
        .collect();
    RasterImage::new(img.width(), img.height(), img.channels(), samples)
        .expect("same shape as input")
}

/// Scale deviations from the image's mean luma.
pub fn adjust_contrast(img: &RasterImage, factor: f64) -> RasterImage {
    let n = (img.width() * img.height()) as f64;
    let mut total = 0.0;
    for y in 0..img.height() {
        for x in 0..img.width() {
            total += luma(img.pixel(x, y));
        }
    }
    let mean = total / n;
    let samples = img
        .samples()
        .iter()
        .map(|&v| to_u8(mean + factor * (v as f64 - mean)))
        .collect();
    RasterImage::new(img.width(), img.height(), img.channels(), samples)
        .expect("same shape as input")
}

/// Inverse-mapped source position for a rotation by `deg` about the center.
fn rotation_source(w: usize, h: usize, deg: f64) -> impl Fn(usize, usize) -> (f64, f64) {
    let (s, c) = deg.to_radians().sin_cos();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    move |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        (cx + c * dx + s * dy, cy - s * dx + c * dy)
    }
}

/// Bilinear rotation; pixels mapped from outside the frame become black.
pub fn rotate_rgb(img: &RasterImage, deg: f64) -> RasterImage {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let src = rotation_source(w, h, deg);
    let mut out = RasterImage::filled(w, h, ch, &vec![0; ch]).expect("valid dims");
    let (wmax, hmax) = (w as f64 - 1.0, h as f64 - 1.0);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = src(x, y);
            if sx < 0.0 || sy < 0.0 || sx > wmax || sy > hmax {
                continue;
            }
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            for c in 0..ch {
                let v = (1.0 - fx) * (1.0 - fy) * img.pixel(x0, y0)[c] as f64
                    + fx * (1.0 - fy) * img.pixel(x1, y0)[c] as f64
                    + (1.0 - fx) * fy * img.pixel(x0, y1)[c] as f64
                    + fx * fy * img.pixel(x1, y1)[c] as f64;
                out.pixel_mut(x, y)[c] = to_u8(v);
            }
        }
    }
    out
}

/// Nearest-neighbor rotation; pixels mapped from outside become missing.
pub fn rotate_depth(depth: &DepthMap, deg: f64) -> DepthMap {
    let (w, h) = (depth.width(), depth.height());
    let src = rotation_source(w, h, deg);
    let mut samples = vec![MISSING_DEPTH; w * h];
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = src(x, y);
            let (rx, ry) = (sx.round(), sy.round());
            if rx >= 0.0 && ry >= 0.0 && rx < w as f64 && ry < h as f64 {
                samples[y * w + x] = depth.get(rx as usize, ry as usize);
            }
        }
    }
    DepthMap::new(w, h, samples).expect("same shape as input")
}

fn variant(
    pair: &FramePair,
    kind: AugmentKind,
    seed: u64,
    random: Option<RandomAugment>,
    rgb: RasterImage,
    depth: DepthMap,
) -> FramePair {
    FramePair {
        rgb,
        depth,
        source_id: format!("{}__{}", pair.source_id, kind.suffix()),
        provenance: Provenance::Augmented {
            origin: pair.family_id().to_string(),
            kind,
            seed,
            random,
        },
    }
}

/// The four augmented variants of `pair`: saturation, mirror (RGB and
/// depth), saturation plus mirror, and a seeded random combination.
pub fn augment(pair: &FramePair, seed: u64) -> Vec<FramePair> {
    let pair_seed = derive_seed(seed, &pair.source_id);
    let saturated = adjust_saturation(&pair.rgb, SATURATION_SCALE);
    let mirrored_depth = pair.depth.mirror_horizontal();

    let mut rng = ChaCha8Rng::seed_from_u64(pair_seed);
    let params = RandomAugment {
        brightness: rng.random_range(BRIGHTNESS_RANGE.0..=BRIGHTNESS_RANGE.1),
        contrast: rng.random_range(CONTRAST_RANGE.0..=CONTRAST_RANGE.1),
        saturation: rng.random_range(SATURATION_RANGE.0..=SATURATION_RANGE.1),
        rotation_deg: rng.random_range(ROTATION_RANGE_DEG.0..=ROTATION_RANGE_DEG.1),
        flip: rng.random_bool(0.5),
    };
    let mut rgb = adjust_brightness(&pair.rgb, params.brightness);
    rgb = adjust_contrast(&rgb, params.contrast);
    rgb = adjust_saturation(&rgb, params.saturation);
    rgb = rotate_rgb(&rgb, params.rotation_deg);
    let mut depth = rotate_depth(&pair.depth, params.rotation_deg);
    if params.flip {
        rgb = rgb.mirror_horizontal();
        depth = depth.mirror_horizontal();
    }

    vec![
        variant(
            pair,
            AugmentKind::Saturation,
            pair_seed,
            None,
            saturated.clone(),
            pair.depth.clone(),
        ),
        variant(
            pair,
            AugmentKind::Mirror,
            pair_seed,
            None,
            pair.rgb.mirror_horizontal(),
            mirrored_depth.clone(),
        ),
        variant(
            pair,
            AugmentKind::SaturationMirror,
            pair_seed,
            None,
            saturated.mirror_horizontal(),
            mirrored_depth,
        ),
        variant(
            pair,
            AugmentKind::Random,
            pair_seed,
            Some(params),
            rgb,
            depth,
        ),
    ]
}

fn source_coord(dst: usize, src_len: usize, dst_len: usize) -> f64 {
    (dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5
}

pub fn resize_bilinear(img: &RasterImage, width: usize, height: usize) -> RasterImage {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut out = RasterImage::filled(width, height, ch, &vec![0; ch]).expect("valid dims");
    for y in 0..height {
        let sy = source_coord(y, h, height).clamp(0.0, h as f64 - 1.0);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let fy = sy - y0 as f64;
        for x in 0..width {
            let sx = source_coord(x, w, width).clamp(0.0, w as f64 - 1.0);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let fx = sx - x0 as f64;
            for c in 0..ch {
                let v = (1.0 - fx) * (1.0 - fy) * img.pixel(x0, y0)[c] as f64
                    + fx * (1.0 - fy) * img.pixel(x1, y0)[c] as f64
                    + (1.0 - fx) * fy * img.pixel(x0, y1)[c] as f64
                    + fx * fy * img.pixel(x1, y1)[c] as f64;
                out.pixel_mut(x, y)[c] = to_u8(v);
            }
        }
    }
    out
}

pub fn resize_nearest(depth: &DepthMap, width: usize, height: usize) -> DepthMap {
    let (w, h) = (depth.width(), depth.height());
    let pick = |dst: usize, src_len: usize, dst_len: usize| {
        ((source_coord(dst, src_len, dst_len) + 0.5).floor().max(0.0) as usize).min(src_len - 1)
    };
    let cols: Vec<usize> = (0..width).map(|x| pick(x, w, width)).collect();
    let mut samples = Vec::with_capacity(width * height);
    for y in 0..height {
        let sy = pick(y, h, height);
        samples.extend(cols.iter().map(|&sx| depth.get(sx, sy)));
    }
    DepthMap::new(width, height, samples).expect("valid dims")
}

/// Resize RGB bilinearly and depth by nearest neighbor.
pub fn resize_pair(pair: &FramePair, width: usize, height: usize) -> Result<FramePair, PrepError> {
    if width == 0 || height == 0 {
        return Err(PrepError::InvalidParameter(format!(
            "target size must be positive, got {width}x{height}"
        )));
    }
    Ok(FramePair {
        rgb: resize_bilinear(&pair.rgb, width, height),
        depth: resize_nearest(&pair.depth, width, height),
        source_id: pair.source_id.clone(),
        provenance: pair.provenance.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub test_families: Vec<String>,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Choose `test_count` originals by a seeded shuffle of the sorted family
/// ids; every variant follows its original into the same partition.
pub fn split(
    pairs: &[FramePair],
    test_count: usize,
    seed: u64,
) -> Result<SplitManifest, PrepError> {
    let families: BTreeSet<&str> = pairs.iter().map(|p| p.family_id()).collect();
    if test_count > 0 && test_count >= families.len() {
        return Err(PrepError::InsufficientData {
            requested: test_count,
            available: families.len(),
        });
    }
    let mut order: Vec<&str> = families.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test: BTreeSet<&str> = order.into_iter().take(test_count).collect();

    let (mut train_ids, mut test_ids) = (Vec::new(), Vec::new());
    for p in pairs {
        if test.contains(p.family_id()) {
            test_ids.push(p.source_id.clone());
        } else {
            train_ids.push(p.source_id.clone());
        }
    }
    train_ids.sort();
    test_ids.sort();
    Ok(SplitManifest {
        seed,
        test_families: test.into_iter().map(String::from).collect(),
        train_ids,
        test_ids,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepParams {
    pub zero_fraction_threshold: f64,
    pub augment: bool,
    pub target_size: Option<(usize, usize)>,
    pub test_count: usize,
    pub seed: u64,
}

impl Default for PrepParams {
    fn default() -> Self {
        Self {
            zero_fraction_threshold: 1.0,
            augment: true,
            target_size: Some((640, 640)),
            test_count: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepCounts {
    pub input: usize,
    pub removed_by_cleaning: usize,
    pub originals: usize,
    pub output: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepManifest {
    pub schema_version: u32,
    pub params: PrepParams,
    pub counts: PrepCounts,
    pub split: SplitManifest,
    pub provenance: BTreeMap<String, Provenance>,
}

/// Clean, augment, resize and split.
pub fn prepare(
    pairs: Vec<FramePair>,
    params: &PrepParams,
) -> Result<(Vec<FramePair>, PrepManifest), PrepError> {
    let input = pairs.len();
    let cleaned = clean(pairs, params.zero_fraction_threshold)?;
    let originals = cleaned.len();
    let mut out = Vec::with_capacity(originals * 5);
    for pair in cleaned {
        let variants = if params.augment {
            augment(&pair, params.seed)
        } else {
            Vec::new()
        };
        out.push(pair);
        out.extend(variants);
    }
    if let Some((w, h)) = params.target_size {
        out = out
            .iter()
            .map(|p| resize_pair(p, w, h))
            .collect::<Result<_, _>>()?;
    }
    let split = split(&out, params.test_count, params.seed)?;
    let manifest = PrepManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        params: params.clone(),
        counts: PrepCounts {
            input,
            removed_by_cleaning: input - originals,
            originals,
            output: out.len(),
        },
        split,
        provenance: out
            .iter()
            .map(|p| (p.source_id.clone(), p.provenance.clone()))
            .collect(),
    };
    Ok((out, manifest))
}

/// Load every `rgb/<id>.png` with its `depth/<id>.png` under `dir`.
pub fn load_pairs(dir: &Path) -> Result<Vec<FramePair>, PrepError> {
    let rgb_dir = dir.join("rgb");
    let depth_dir = dir.join("depth");
    io::list_stems(&rgb_dir, "png")?
        .into_iter()
        .map(|id| {
            let rgb = io::read_rgb_png(&rgb_dir.join(format!("{id}.png")))?;
            let depth = io::read_depth_png(&depth_dir.join(format!("{id}.png")))?;
            FramePair::new(id, rgb, depth)
        })
        .collect()
}

pub fn write_pairs(dir: &Path, pairs: &[FramePair]) -> Result<(), PrepError> {
    for p in pairs {
        io::write_rgb_png(
            &dir.join("rgb").join(format!("{}.png", p.source_id)),
            &p.rgb,
        )?;
        io::write_depth_png(
            &dir.join("depth").join(format!("{}.png", p.source_id)),
            &p.depth,
        )?;
    }
    Ok(())
}
