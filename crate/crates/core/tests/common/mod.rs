//! Reference implementations used only by tests. Nothing here calls the
//! library code it checks; inputs are raw pixel vectors.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadchar_core::metrics::{Detection, GroundTruth, Shape};
use roadchar_core::raster::BinaryMask;

/// One region as a raw row-major pixel vector.
#[derive(Debug, Clone)]
pub struct RawRegion {
    pub frame: usize,
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl RawRegion {
    /// Half-open `[x0, x1) x [y0, y1)` in pixel units.
    pub fn bounds(&self) -> Option<[usize; 4]> {
        let mut b: Option<[usize; 4]> = None;
        for (i, _) in self.bits.iter().enumerate().filter(|(_, s)| **s) {
            let (x, y) = (i % self.width, i / self.width);
            b = Some(match b {
                None => [x, y, x + 1, y + 1],
                Some([x0, y0, x1, y1]) => [x0.min(x), y0.min(y), x1.max(x + 1), y1.max(y + 1)],
            });
        }
        b
    }

    pub fn mask(&self) -> BinaryMask {
        BinaryMask::from_bits(self.width, self.height, self.bits.clone()).unwrap()
    }
}

pub fn mask_iou(a: &RawRegion, b: &RawRegion) -> f64 {
    let (mut inter, mut union) = (0u64, 0u64);
    for (&p, &q) in a.bits.iter().zip(&b.bits) {
        inter += (p && q) as u64;
        union += (p || q) as u64;
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn box_iou(a: &RawRegion, b: &RawRegion) -> f64 {
    let (Some(p), Some(q)) = (a.bounds(), b.bounds()) else {
        return 0.0;
    };
    let area = |r: [usize; 4]| ((r[2] - r[0]) * (r[3] - r[1])) as u64;
    let ix = p[2].min(q[2]).saturating_sub(p[0].max(q[0])) as u64;
    let iy = p[3].min(q[3]).saturating_sub(p[1].max(q[1])) as u64;
    let inter = ix * iy;
    let union = area(p) + area(q) - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone)]
pub struct RawDetection {
    pub region: RawRegion,
    pub confidence: f64,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub dets: Vec<RawDetection>,
    pub gts: Vec<RawRegion>,
}

impl Scene {
    pub fn library_inputs(&self) -> (Vec<Detection>, Vec<GroundTruth>) {
        let dets = self
            .dets
            .iter()
            .map(|d| {
                Detection::new(
                    format!("f{}", d.region.frame),
                    0,
                    d.confidence,
                    Shape::from_mask(d.region.mask()),
                )
                .unwrap()
            })
            .collect();
        let gts = self
            .gts
            .iter()
            .map(|g| GroundTruth::new(format!("f{}", g.frame), 0, Shape::from_mask(g.mask())))
            .collect();
        (dets, gts)
    }
}

fn rect(frame: usize, w: usize, h: usize, r: [usize; 4], holes: &[(usize, usize)]) -> RawRegion {
    let mut bits = vec![false; w * h];
    for y in r[1]..r[3] {
        for x in r[0]..r[2] {
            bits[y * w + x] = true;
        }
    }
    for &(x, y) in holes {
        bits[y * w + x] = false;
    }
    RawRegion {
        frame,
        width: w,
        height: h,
        bits,
    }
}

fn random_rect(rng: &mut ChaCha8Rng, w: usize, h: usize) -> [usize; 4] {
    let rw = rng.random_range(3..=12);
    let rh = rng.random_range(3..=12);
    let x0 = rng.random_range(0..=w - rw);
    let y0 = rng.random_range(0..=h - rh);
    [x0, y0, x0 + rw, y0 + rh]
}

fn jitter(rng: &mut ChaCha8Rng, r: [usize; 4], w: usize, h: usize) -> [usize; 4] {
    let mut shift = |v: usize, lo: usize, hi: usize| {
        (v as i64 + rng.random_range(-2..=2)).clamp(lo as i64, hi as i64) as usize
    };
    let x0 = shift(r[0], 0, w - 2);
    let y0 = shift(r[1], 0, h - 2);
    let x1 = shift(r[2], x0 + 1, w);
    let y1 = shift(r[3], y0 + 1, h);
    [x0, y0, x1, y1]
}

/// Up to 10 ground truths and 10 detections over 1-3 frames of 24x24.
/// Detections are mostly jittered copies of ground truths, some with
/// knocked-out pixels so box and mask IoU differ; confidences come from a
/// coarse grid so ties occur.
pub fn random_scene(seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (24, 24);
    let frames = rng.random_range(1..=3);
    let n_gts = rng.random_range(0..=10);
    let n_dets = rng.random_range(0..=10);
    let mut gt_rects = Vec::new();
    let gts: Vec<RawRegion> = (0..n_gts)
        .map(|_| {
            let f = rng.random_range(0..frames);
            let r = random_rect(&mut rng, w, h);
            gt_rects.push((f, r));
            rect(f, w, h, r, &[])
        })
        .collect();
    let dets = (0..n_dets)
        .map(|_| {
            let (f, r) = if !gt_rects.is_empty() && rng.random_bool(0.7) {
                let (f, r) = gt_rects[rng.random_range(0..gt_rects.len())];
                (f, jitter(&mut rng, r, w, h))
            } else {
                (rng.random_range(0..frames), random_rect(&mut rng, w, h))
            };
            let holes: Vec<(usize, usize)> = if rng.random_bool(0.3) {
                (0..3)
                    .map(|_| (rng.random_range(r[0]..r[2]), rng.random_range(r[1]..r[3])))
                    .collect()
            } else {
                Vec::new()
            };
            let mut region = rect(f, w, h, r, &holes);
            if region.bits.iter().all(|b| !b) {
                region = rect(f, w, h, r, &[]);
            }
            RawDetection {
                region,
                confidence: rng.random_range(1..=10) as f64 / 10.0,
            }
        })
        .collect();
    Scene { dets, gts }
}

/// Per-detection TP flags, in descending-confidence order (stable on input
/// order), plus that order.
pub fn greedy_flags(
    scene: &Scene,
    tau: f64,
    iou: fn(&RawRegion, &RawRegion) -> f64,
    min_conf: f64,
) -> (Vec<usize>, Vec<bool>) {
    let mut order: Vec<usize> = (0..scene.dets.len())
        .filter(|&i| scene.dets[i].confidence >= min_conf)
        .collect();
    // stable sort keeps input order among equal confidences
    order.sort_by(|&a, &b| {
        scene.dets[b]
            .confidence
            .partial_cmp(&scene.dets[a].confidence)
            .unwrap()
    });
    let mut used = vec![false; scene.gts.len()];
    let mut flags = Vec::new();
    for &d in &order {
        let det = &scene.dets[d].region;
        let mut best: Option<usize> = None;
        let mut best_iou = f64::NEG_INFINITY;
        for (g, gt) in scene.gts.iter().enumerate() {
            if used[g] || gt.frame != det.frame {
                continue;
            }
            let v = iou(det, gt);
            if v >= tau && v > best_iou {
                best = Some(g);
                best_iou = v;
            }
        }
        if let Some(g) = best {
            used[g] = true;
        }
        flags.push(best.is_some());
    }
    (order, flags)
}

/// 101-point interpolated AP: at each recall level, the best precision
/// reached at that recall or beyond, found by scanning every prefix.
pub fn brute_force_ap(scene: &Scene, tau: f64, iou: fn(&RawRegion, &RawRegion) -> f64) -> f64 {
    if scene.gts.is_empty() {
        return 0.0;
    }
    let (_, flags) = greedy_flags(scene, tau, iou, f64::NEG_INFINITY);
    let n = scene.gts.len() as f64;
    let mut prefix = Vec::new();
    let mut tp = 0.0;
    for (i, &f) in flags.iter().enumerate() {
        if f {
            tp += 1.0;
        }
        prefix.push((tp / n, tp / (i + 1) as f64));
    }
    let mut total = 0.0;
    for k in 0..=100 {
        let r = k as f64 / 100.0;
        let best = prefix
            .iter()
            .filter(|(rec, _)| *rec >= r)
            .map(|(_, p)| *p)
            .fold(0.0, f64::max);
        total += best;
    }
    total / 101.0
}

/// Pick's theorem for a hole-free shape whose outer boundary is a simple
/// lattice polygon: `pixels - boundary / 2 - 1`, where boundary pixels have
/// a 4-neighbor outside the shape or the frame.
pub fn pick_area(bits: &[bool], w: usize, h: usize) -> f64 {
    let at = |x: i64, y: i64| {
        x >= 0
            && y >= 0
            && (x as usize) < w
            && (y as usize) < h
            && bits[y as usize * w + x as usize]
    };
    let (mut pixels, mut boundary) = (0usize, 0usize);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            if !at(x, y) {
                continue;
            }
            pixels += 1;
            if !(at(x + 1, y) && at(x - 1, y) && at(x, y + 1) && at(x, y - 1)) {
                boundary += 1;
            }
        }
    }
    if pixels <= 1 {
        0.0
    } else {
        pixels as f64 - boundary as f64 / 2.0 - 1.0
    }
}

/// Mean of `samples[i] / range` over `select(i)` in index order, skipping 0.
pub fn masked_mean(samples: &[u16], range: f64, select: impl Fn(usize) -> bool) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, &s) in samples.iter().enumerate() {
        if s != 0 && select(i) {
            sum += s as f64 / range;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Pixels outside every region within `radius` of region `bits`, by direct
/// distance to each region pixel.
pub fn band_oracle(bits: &[bool], all: &[bool], w: usize, h: usize, radius: usize) -> Vec<bool> {
    let members: Vec<(i64, i64)> = (0..w * h)
        .filter(|&i| bits[i])
        .map(|i| ((i % w) as i64, (i / w) as i64))
        .collect();
    let r2 = (radius * radius) as i64;
    let r = radius as i64;
    let (x_lo, x_hi) = members
        .iter()
        .fold((i64::MAX, i64::MIN), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y_lo, y_hi) = members
        .iter()
        .fold((i64::MAX, i64::MIN), |(a, b), p| (a.min(p.1), b.max(p.1)));
    (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            // farther than `radius` along one axis from every member
            let reachable = x >= x_lo - r && x <= x_hi + r && y >= y_lo - r && y <= y_hi + r;
            reachable
                && !all[i]
                && members
                    .iter()
                    .any(|&(mx, my)| (mx - x).pow(2) + (my - y).pow(2) <= r2)
        })
        .collect()
}
