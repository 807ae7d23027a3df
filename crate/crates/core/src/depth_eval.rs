//! Predicted-vs-ground-truth depth comparison over valid ground-truth pixels.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::characterize::{normalize_depth, CharacterizeError};
use crate::io::{self, IoError};
use crate::raster::{DepthField, DepthMap, MISSING_DEPTH};

pub const DEPTH_EVAL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DepthEvalError {
    #[error("ground truth has no valid pixels{}", frame_suffix(.0))]
    NoValidPixels(Option<String>),
    #[error("dimension mismatch: prediction {pred_width}x{pred_height}, ground truth {gt_width}x{gt_height}")]
    DimensionMismatch {
        pred_width: usize,
        pred_height: usize,
        gt_width: usize,
        gt_height: usize,
    },
    #[error("frames without a counterpart: predictions only {pred_only:?}, ground truth only {gt_only:?}")]
    MissingCounterpart {
        pred_only: Vec<String>,
        gt_only: Vec<String>,
    },
    #[error(transparent)]
    Characterize(#[from] CharacterizeError),
    #[error(transparent)]
    Io(#[from] IoError),
}

fn frame_suffix(frame: &Option<String>) -> String {
    frame
        .as_ref()
        .map(|f| format!(" (frame {f})"))
        .unwrap_or_default()
}

/// Scale in which errors are measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "units", rename_all = "lowercase")]
pub enum DepthUnits {
    Normalized { depth_range_mm: f64 },
    Millimeters,
}

impl DepthUnits {
    pub fn field(&self, depth: &DepthMap) -> Result<DepthField, DepthEvalError> {
        match *self {
            DepthUnits::Normalized { depth_range_mm } => {
                Ok(normalize_depth(depth, depth_range_mm)?)
            }
            DepthUnits::Millimeters => {
                let values = depth
                    .samples()
                    .iter()
                    .map(|&s| (s != MISSING_DEPTH).then_some(s as f64))
                    .collect();
                Ok(DepthField::new(depth.width(), depth.height(), values)
                    .expect("dims copied from a valid depth map"))
            }
        }
    }
}

/// Root-mean-square error over pixels where the ground truth is valid, and
/// the number of such pixels. A missing prediction at a valid ground-truth
/// pixel counts as a prediction of 0.
pub fn rmse_with_count(pred: &DepthField, gt: &DepthField) -> Result<(f64, usize), DepthEvalError> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(DepthEvalError::DimensionMismatch {
            pred_width: pred.width(),
            pred_height: pred.height(),
            gt_width: gt.width(),
            gt_height: gt.height(),
        });
    }
    let (mut sq, mut n) = (0.0, 0usize);
    for (p, g) in pred.values().iter().zip(gt.values()) {
        if let Some(g) = g {
            let d = p.unwrap_or(0.0) - g;
            sq += d * d;
            n += 1;
        }
    }
    if n == 0 {
        return Err(DepthEvalError::NoValidPixels(None));
    }
    Ok(((sq / n as f64).sqrt(), n))
}

pub fn rmse(pred: &DepthField, gt: &DepthField) -> Result<f64, DepthEvalError> {
    rmse_with_count(pred, gt).map(|(r, _)| r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRmse {
    pub frame_id: String,
    pub rmse: f64,
    pub valid_pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthEvalResult {
    pub schema_version: u32,
    #[serde(flatten)]
    pub units: DepthUnits,
    pub per_frame: Vec<FrameRmse>,
    /// Unweighted mean of the per-frame values.
    pub mean_rmse: f64,
}

/// Per-frame RMSE plus their unweighted mean. Frames are reported in
/// `frame_id` order whatever order they arrive in.
pub fn evaluate_frames(
    preds: &BTreeMap<String, DepthMap>,
    gts: &BTreeMap<String, DepthMap>,
    units: DepthUnits,
) -> Result<DepthEvalResult, DepthEvalError> {
    let pred_only: Vec<String> = preds
        .keys()
        .filter(|k| !gts.contains_key(*k))
        .cloned()
        .collect();
    let gt_only: Vec<String> = gts
        .keys()
        .filter(|k| !preds.contains_key(*k))
        .cloned()
        .collect();
    if !pred_only.is_empty() || !gt_only.is_empty() {
        return Err(DepthEvalError::MissingCounterpart { pred_only, gt_only });
    }
    let mut per_frame = Vec::with_capacity(gts.len());
    for (id, gt) in gts {
        let pred = units.field(&preds[id])?;
        let gt = units.field(gt)?;
        let (rmse, valid_pixels) = rmse_with_count(&pred, &gt).map_err(|e| match e {
            DepthEvalError::NoValidPixels(_) => DepthEvalError::NoValidPixels(Some(id.clone())),
            other => other,
        })?;
        per_frame.push(FrameRmse {
            frame_id: id.clone(),
            rmse,
            valid_pixels,
        });
    }
    let total = per_frame.iter().fold(0.0, |acc, f| acc + f.rmse);
    let mean_rmse = if per_frame.is_empty() {
        0.0
    } else {
        total / per_frame.len() as f64
    };
    Ok(DepthEvalResult {
        schema_version: DEPTH_EVAL_SCHEMA_VERSION,
        units,
        per_frame,
        mean_rmse,
    })
}

/// Evaluate every `<id>.png` in `pred_dir` against `gt_dir/<id>.png`.
pub fn evaluate_set(
    pred_dir: &Path,
    gt_dir: &Path,
    units: DepthUnits,
) -> Result<DepthEvalResult, DepthEvalError> {
    let load = |dir: &Path| -> Result<BTreeMap<String, DepthMap>, DepthEvalError> {
        io::list_stems(dir, "png")?
            .into_iter()
            .map(|id| {
                let map = io::read_depth_png(&dir.join(format!("{id}.png")))?;
                Ok((id, map))
            })
            .collect()
    };
    evaluate_frames(&load(pred_dir)?, &load(gt_dir)?, units)
}
