//! Detection and segmentation evaluation: IoU, greedy matching, precision,
//! recall, F1, 101-point interpolated AP, mAP, confusion matrix and curves.
//!
//! Matching is done per `(frame_id, class_id)` group. Within a group,
//! detections are visited by descending confidence (ties: lower index first)
//! and each takes the unmatched ground truth of highest IoU at or above the
//! threshold (ties: lower ground-truth index).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{rasterize_polygon, BBox, BinaryMask, Polygon, RasterError};

pub const METRICS_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_CONF_THRESHOLD: f64 = 0.25;
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("mask dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("confidence {0} outside [0, 1]")]
    InvalidConfidence(f64),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Box,
    Mask,
}

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

/// Box and mask of one annotated or predicted region.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    pub bbox: BBox,
    pub mask: BinaryMask,
}

impl Shape {
    /// Box from the polygon's extents, mask from center-in-polygon fill.
    pub fn from_polygon(poly: &Polygon, width: usize, height: usize) -> Result<Self, MetricsError> {
        Ok(Self {
            bbox: poly.bbox(width, height),
            mask: rasterize_polygon(poly, width, height)?,
        })
    }

    /// Box covering the set pixel squares; empty masks get a zero box.
    pub fn from_mask(mask: BinaryMask) -> Self {
        let bbox = mask.bounds().map(|b| b.to_box()).unwrap_or(BBox {
            x_min: 0.0,
            y_min: 0.0,
            x_max: 0.0,
            y_max: 0.0,
        });
        Self { bbox, mask }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame_id: String,
    pub class_id: u32,
    pub confidence: f64,
    pub shape: Shape,
}

impl Detection {
    pub fn new(
        frame_id: impl Into<String>,
        class_id: u32,
        confidence: f64,
        shape: Shape,
    ) -> Result<Self, MetricsError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(MetricsError::InvalidConfidence(confidence));
        }
        Ok(Self {
            frame_id: frame_id.into(),
            class_id,
            confidence,
            shape,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub frame_id: String,
    pub class_id: u32,
    pub shape: Shape,
}

impl GroundTruth {
    pub fn new(frame_id: impl Into<String>, class_id: u32, shape: Shape) -> Self {
        Self {
            frame_id: frame_id.into(),
            class_id,
            shape,
        }
    }
}

pub fn iou_box(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let iy = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

pub fn iou_mask(a: &BinaryMask, b: &BinaryMask) -> Result<f64, MetricsError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricsError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    })
}

pub fn iou(kind: MatchKind, a: &Shape, b: &Shape) -> Result<f64, MetricsError> {
    match kind {
        MatchKind::Box => Ok(iou_box(&a.bbox, &b.bbox)),
        MatchKind::Mask => iou_mask(&a.mask, &b.mask),
    }
}

/// Result of matching one frame's detections against its ground truths.
/// Indices refer to the slices passed to [`match_detections`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignment {
    pub true_positives: Vec<(usize, usize)>,
    pub false_positives: Vec<usize>,
    pub false_negatives: Vec<usize>,
}

/// Greedy matching over a precomputed `dets x gts` IoU matrix.
fn greedy_match(
    confidences: &[f64],
    ious: &[Vec<f64>],
    n_gts: usize,
    threshold: f64,
) -> Assignment {
    let mut order: Vec<usize> = (0..confidences.len()).collect();
    order.sort_by(|&a, &b| confidences[b].total_cmp(&confidences[a]).then(a.cmp(&b)));
    let mut taken = vec![false; n_gts];
    let mut out = Assignment::default();
    for d in order {
        let mut best: Option<(usize, f64)> = None;
        for (g, &v) in ious[d].iter().enumerate() {
            if taken[g] || v < threshold {
                continue;
            }
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((g, v));
            }
        }
        match best {
            Some((g, _)) => {
                taken[g] = true;
                out.true_positives.push((d, g));
            }
            None => out.false_positives.push(d),
        }
    }
    out.false_negatives = (0..n_gts).filter(|&g| !taken[g]).collect();
    out
}

/// Match detections to ground truths of a single frame and class.
pub fn match_detections(
    dets: &[Detection],
    gts: &[GroundTruth],
    iou_threshold: f64,
    kind: MatchKind,
) -> Result<Assignment, MetricsError> {
    let ious = dets
        .iter()
        .map(|d| {
            gts.iter()
                .map(|g| iou(kind, &d.shape, &g.shape))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let confs: Vec<f64> = dets.iter().map(|d| d.confidence).collect();
    Ok(greedy_match(&confs, &ious, gts.len(), iou_threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Precision, recall and F1 from counts; every 0/0 is 0.
pub fn precision_recall_f1(tp: usize, fp: usize, fn_: usize) -> Prf {
    let precision = ratio(tp as f64, (tp + fp) as f64);
    let recall = ratio(tp as f64, (tp + fn_) as f64);
    let f1 = ratio(2.0 * precision * recall, precision + recall);
    Prf {
        precision,
        recall,
        f1,
    }
}

struct Group {
    dets: Vec<usize>,
    gts: Vec<usize>,
    ious: Vec<Vec<f64>>,
}

/// IoU matrices for every `(frame, class)` group, computed once per kind.
struct IouTable<'a> {
    dets: &'a [Detection],
    n_gts: usize,
    groups: Vec<Group>,
}

type IndexLists = (Vec<usize>, Vec<usize>);

impl<'a> IouTable<'a> {
    fn build(
        dets: &'a [Detection],
        gts: &[GroundTruth],
        kind: MatchKind,
    ) -> Result<Self, MetricsError> {
        // (frame, class) -> (detection indices, ground-truth indices)
        let mut keyed: BTreeMap<(&str, u32), IndexLists> = BTreeMap::new();
        for (i, d) in dets.iter().enumerate() {
            keyed
                .entry((d.frame_id.as_str(), d.class_id))
                .or_default()
                .0
                .push(i);
        }
        for (i, g) in gts.iter().enumerate() {
            keyed
                .entry((g.frame_id.as_str(), g.class_id))
                .or_default()
                .1
                .push(i);
        }
        let groups = keyed
            .into_values()
            .map(|(d_idx, g_idx)| {
                let ious = d_idx
                    .iter()
                    .map(|&d| {
                        g_idx
                            .iter()
                            .map(|&g| iou(kind, &dets[d].shape, &gts[g].shape))
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Group {
                    dets: d_idx,
                    gts: g_idx,
                    ious,
                })
            })
            .collect::<Result<Vec<_>, MetricsError>>()?;
        Ok(Self {
            dets,
            n_gts: gts.len(),
            groups,
        })
    }

    /// Per-detection TP flags (indexed like `dets`; `None` when filtered out)
    /// for detections with confidence at or above `min_conf`.
    fn flags(&self, threshold: f64, min_conf: f64) -> Vec<Option<bool>> {
        let mut flags = vec![None; self.dets.len()];
        for group in &self.groups {
            let kept: Vec<usize> = (0..group.dets.len())
                .filter(|&k| self.dets[group.dets[k]].confidence >= min_conf)
                .collect();
            let confs: Vec<f64> = kept
                .iter()
                .map(|&k| self.dets[group.dets[k]].confidence)
                .collect();
            let ious: Vec<Vec<f64>> = kept.iter().map(|&k| group.ious[k].clone()).collect();
            let a = greedy_match(&confs, &ious, group.gts.len(), threshold);
            for &(k, _) in &a.true_positives {
                flags[group.dets[kept[k]]] = Some(true);
            }
            for &k in &a.false_positives {
                flags[group.dets[kept[k]]] = Some(false);
            }
        }
        flags
    }

    fn counts(&self, threshold: f64, min_conf: f64) -> (usize, usize, usize) {
        let flags = self.flags(threshold, min_conf);
        let tp = flags.iter().filter(|f| **f == Some(true)).count();
        let fp = flags.iter().filter(|f| **f == Some(false)).count();
        (tp, fp, self.n_gts - tp)
    }

    /// Cumulative (recall, precision) over detections by descending confidence.
    fn pr_points(&self, threshold: f64) -> Vec<(f64, f64)> {
        let flags = self.flags(threshold, f64::NEG_INFINITY);
        let mut order: Vec<usize> = (0..self.dets.len()).collect();
        order.sort_by(|&a, &b| {
            self.dets[b]
                .confidence
                .total_cmp(&self.dets[a].confidence)
                .then(a.cmp(&b))
        });
        let (mut tp, mut fp) = (0usize, 0usize);
        order
            .into_iter()
            .map(|i| {
                if flags[i] == Some(true) {
                    tp += 1;
                } else {
                    fp += 1;
                }
                (
                    ratio(tp as f64, self.n_gts as f64),
                    tp as f64 / (tp + fp) as f64,
                )
            })
            .collect()
    }

    fn interpolated(&self, threshold: f64) -> [f64; 101] {
        let points = self.pr_points(threshold);
        let mut envelope: Vec<f64> = points.iter().map(|p| p.1).collect();
        for i in (0..envelope.len().saturating_sub(1)).rev() {
            envelope[i] = envelope[i].max(envelope[i + 1]);
        }
        std::array::from_fn(|k| {
            let r = k as f64 / 100.0;
            let idx = points.partition_point(|p| p.0 < r);
            envelope.get(idx).copied().unwrap_or(0.0)
        })
    }

    fn average_precision(&self, threshold: f64) -> f64 {
        if self.n_gts == 0 {
            return 0.0;
        }
        self.interpolated(threshold).iter().sum::<f64>() / 101.0
    }
}

/// 101-point interpolated AP over all frames at one IoU threshold.
pub fn average_precision(
    dets: &[Detection],
    gts: &[GroundTruth],
    iou_threshold: f64,
    kind: MatchKind,
) -> Result<f64, MetricsError> {
    Ok(IouTable::build(dets, gts, kind)?.average_precision(iou_threshold))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub class_id: u32,
    pub ap50: f64,
    pub ap50_95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapScores {
    pub map50: f64,
    pub map50_95: f64,
    pub per_class: Vec<ClassAp>,
}

fn split_by_class<'a>(
    dets: &'a [Detection],
    gts: &'a [GroundTruth],
) -> BTreeMap<u32, (Vec<Detection>, Vec<GroundTruth>)> {
    let classes: BTreeSet<u32> = gts.iter().map(|g| g.class_id).collect();
    classes
        .into_iter()
        .map(|c| {
            (
                c,
                (
                    dets.iter().filter(|d| d.class_id == c).cloned().collect(),
                    gts.iter().filter(|g| g.class_id == c).cloned().collect(),
                ),
            )
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    ratio(sum, n as f64)
}

/// mAP at IoU 0.50 and averaged over 0.50..0.95, over classes that have
/// ground truth.
pub fn map_suite(
    dets: &[Detection],
    gts: &[GroundTruth],
    kind: MatchKind,
) -> Result<MapScores, MetricsError> {
    let mut per_class = Vec::new();
    for (class_id, (d, g)) in split_by_class(dets, gts) {
        let table = IouTable::build(&d, &g, kind)?;
        let aps: Vec<f64> = coco_thresholds()
            .iter()
            .map(|&t| table.average_precision(t))
            .collect();
        per_class.push(ClassAp {
            class_id,
            ap50: aps[0],
            ap50_95: mean(aps.iter().copied()),
        });
    }
    Ok(MapScores {
        map50: mean(per_class.iter().map(|c| c.ap50)),
        map50_95: mean(per_class.iter().map(|c| c.ap50_95)),
        per_class,
    })
}

/// Pothole/background confusion counts. Rows are predicted labels and
/// columns true labels; the background/background cell does not exist for
/// detection and stays 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
}

impl ConfusionMatrix {
    /// `[[pothole->pothole, background->pothole], [pothole->background, 0]]`
    /// indexed `[predicted][true]`.
    pub fn matrix(&self) -> [[usize; 2]; 2] {
        [
            [self.true_positive, self.false_positive],
            [self.false_negative, self.true_negative],
        ]
    }
}

pub fn confusion_matrix(
    dets: &[Detection],
    gts: &[GroundTruth],
    conf_threshold: f64,
    iou_threshold: f64,
    kind: MatchKind,
) -> Result<ConfusionMatrix, MetricsError> {
    let table = IouTable::build(dets, gts, kind)?;
    let (tp, fp, fn_) = table.counts(iou_threshold, conf_threshold);
    Ok(ConfusionMatrix {
        true_positive: tp,
        false_positive: fp,
        false_negative: fn_,
        true_negative: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidencePoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub confidence: Vec<ConfidencePoint>,
    pub precision_recall: Vec<PrPoint>,
}

/// Confidence sweep over `{0, 1}` and every distinct detection confidence
/// (ascending), plus the interpolated PR curve on the 101-point recall grid.
pub fn curves(
    dets: &[Detection],
    gts: &[GroundTruth],
    iou_threshold: f64,
    kind: MatchKind,
) -> Result<Curves, MetricsError> {
    let table = IouTable::build(dets, gts, kind)?;
    let mut thresholds: Vec<f64> = dets.iter().map(|d| d.confidence).collect();
    thresholds.extend([0.0, 1.0]);
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let confidence = thresholds
        .into_iter()
        .map(|t| {
            let (tp, fp, fn_) = table.counts(iou_threshold, t);
            let prf = precision_recall_f1(tp, fp, fn_);
            ConfidencePoint {
                threshold: t,
                precision: prf.precision,
                recall: prf.recall,
                f1: prf.f1,
            }
        })
        .collect();
    let precision_recall = table
        .interpolated(iou_threshold)
        .iter()
        .enumerate()
        .map(|(k, &p)| PrPoint {
            recall: k as f64 / 100.0,
            precision: if table.n_gts == 0 { 0.0 } else { p },
        })
        .collect();
    Ok(Curves {
        confidence,
        precision_recall,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ap50: f64,
    pub ap50_95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class_id: u32,
    pub ground_truths: usize,
    pub detections: usize,
    pub values: MetricValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindMetrics {
    pub mean: MetricValues,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
    pub curves: Curves,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub schema_version: u32,
    pub conf_threshold: f64,
    pub iou_threshold: f64,
    pub frames: usize,
    pub ground_truths: usize,
    pub detections: usize,
    #[serde(rename = "box")]
    pub box_metrics: KindMetrics,
    #[serde(rename = "mask")]
    pub mask_metrics: KindMetrics,
}

fn kind_metrics(
    dets: &[Detection],
    gts: &[GroundTruth],
    conf_threshold: f64,
    iou_threshold: f64,
    kind: MatchKind,
) -> Result<KindMetrics, MetricsError> {
    let scores = map_suite(dets, gts, kind)?;
    let by_class = split_by_class(dets, gts);
    let mut per_class = Vec::new();
    for ap in &scores.per_class {
        let (d, g) = &by_class[&ap.class_id];
        let (tp, fp, fn_) = IouTable::build(d, g, kind)?.counts(iou_threshold, conf_threshold);
        let prf = precision_recall_f1(tp, fp, fn_);
        per_class.push(ClassMetrics {
            class_id: ap.class_id,
            ground_truths: g.len(),
            detections: d.len(),
            values: MetricValues {
                precision: prf.precision,
                recall: prf.recall,
                f1: prf.f1,
                ap50: ap.ap50,
                ap50_95: ap.ap50_95,
            },
        });
    }
    let mean_of = |f: fn(&MetricValues) -> f64| mean(per_class.iter().map(|c| f(&c.values)));
    Ok(KindMetrics {
        mean: MetricValues {
            precision: mean_of(|v| v.precision),
            recall: mean_of(|v| v.recall),
            f1: mean_of(|v| v.f1),
            ap50: scores.map50,
            ap50_95: scores.map50_95,
        },
        confusion: confusion_matrix(dets, gts, conf_threshold, iou_threshold, kind)?,
        curves: curves(dets, gts, iou_threshold, kind)?,
        per_class,
    })
}

/// Full box and mask evaluation. Precision, recall and F1 are taken at
/// `conf_threshold` / `iou_threshold`; AP values use every detection.
pub fn evaluate(
    dets: &[Detection],
    gts: &[GroundTruth],
    conf_threshold: f64,
    iou_threshold: f64,
) -> Result<MetricsSummary, MetricsError> {
    let frames: BTreeSet<&str> = dets
        .iter()
        .map(|d| d.frame_id.as_str())
        .chain(gts.iter().map(|g| g.frame_id.as_str()))
        .collect();
    Ok(MetricsSummary {
        schema_version: METRICS_SCHEMA_VERSION,
        conf_threshold,
        iou_threshold,
        frames: frames.len(),
        ground_truths: gts.len(),
        detections: dets.len(),
        box_metrics: kind_metrics(dets, gts, conf_threshold, iou_threshold, MatchKind::Box)?,
        mask_metrics: kind_metrics(dets, gts, conf_threshold, iou_threshold, MatchKind::Mask)?,
    })
}
