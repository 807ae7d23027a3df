//! JSON and CSV emission for reports.
//!
//! JSON output is pretty-printed with a trailing newline. Field order follows
//! the struct definitions and maps are ordered, so emitting a parsed report
//! reproduces the original bytes.

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::characterize::FrameReport;
use crate::metrics::Curves;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub fn emit_json<T: Serialize>(value: &T) -> Result<Vec<u8>, ReportError> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn parse_json<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ReportError> {
    Ok(serde_json::from_slice(bytes)?)
}

#[derive(Serialize)]
struct PotholeRow<'a> {
    frame_id: &'a str,
    instance_id: usize,
    pixel_area: usize,
    contour_area: f64,
    bbox_x_min: usize,
    bbox_y_min: usize,
    bbox_x_max: usize,
    bbox_y_max: usize,
    p_d: Option<f64>,
    s_d: Option<f64>,
    rp_d_difference: Option<f64>,
    rp_d_ratio: Option<f64>,
    severity: f64,
    warning: Option<&'a str>,
}

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, ReportError> {
    writer
        .into_inner()
        .map_err(|e| ReportError::Csv(csv::Error::from(e.into_error())))
}

/// One CSV row per pothole, in report order; the header is always present.
pub fn pothole_csv(reports: &[FrameReport]) -> Result<Vec<u8>, ReportError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record([
        "frame_id",
        "instance_id",
        "pixel_area",
        "contour_area",
        "bbox_x_min",
        "bbox_y_min",
        "bbox_x_max",
        "bbox_y_max",
        "p_d",
        "s_d",
        "rp_d_difference",
        "rp_d_ratio",
        "severity",
        "warning",
    ])?;
    for report in reports {
        for r in &report.potholes {
            let b = r.instance.bbox;
            w.serialize(PotholeRow {
                frame_id: &report.frame_id,
                instance_id: r.instance.id,
                pixel_area: r.instance.pixel_area,
                contour_area: r.instance.contour_area,
                bbox_x_min: b.x_min,
                bbox_y_min: b.y_min,
                bbox_x_max: b.x_max,
                bbox_y_max: b.y_max,
                p_d: r.depth.as_ref().map(|d| d.p_d),
                s_d: r.depth.as_ref().map(|d| d.s_d),
                rp_d_difference: r.rp_d_difference,
                rp_d_ratio: r.rp_d_ratio,
                severity: r.severity,
                warning: r.warning.as_deref(),
            })?;
        }
    }
    finish(w)
}

/// Confidence sweep rows (`threshold,precision,recall,f1`).
pub fn confidence_curve_csv(curves: &Curves) -> Result<Vec<u8>, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &curves.confidence {
        w.serialize(p)?;
    }
    if curves.confidence.is_empty() {
        w.write_record(["threshold", "precision", "recall", "f1"])?;
    }
    finish(w)
}

/// Interpolated precision on the recall grid (`recall,precision`).
pub fn pr_curve_csv(curves: &Curves) -> Result<Vec<u8>, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &curves.precision_recall {
        w.serialize(p)?;
    }
    if curves.precision_recall.is_empty() {
        w.write_record(["recall", "precision"])?;
    }
    finish(w)
}
