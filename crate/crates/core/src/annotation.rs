//! YOLO-seg polygon text codec.
//!
//! One region per line: `class x1 y1 ... xn yn` with coordinates normalized
//! to [0, 1]. Prediction lines carry a trailing confidence.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::io::{self, IoError};
use crate::metrics::{Detection, GroundTruth, MetricsError, Shape};
use crate::raster::Polygon;

#[derive(Debug, Error)]
pub enum AnnotationError {
    /// `position` is the 1-based field index on the line (0 for the whole line).
    #[error("line {line}, field {position}: {reason}")]
    MalformedLine {
        line: usize,
        position: usize,
        reason: String,
    },
    #[error("line {line}, field {position}: value {value} is outside [0, 1]")]
    OutOfRangeCoordinate {
        line: usize,
        position: usize,
        value: f64,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotationKind {
    GroundTruth,
    Prediction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationLine {
    pub class_id: u32,
    pub polygon: Vec<[f64; 2]>,
    pub confidence: Option<f64>,
}

impl AnnotationLine {
    pub fn polygon(&self) -> Result<Polygon, AnnotationError> {
        Polygon::new(self.polygon.clone()).map_err(|e| AnnotationError::Metrics(e.into()))
    }

    pub fn to_ground_truth(
        &self,
        frame_id: &str,
        width: usize,
        height: usize,
    ) -> Result<GroundTruth, AnnotationError> {
        let shape = Shape::from_polygon(&self.polygon()?, width, height)?;
        Ok(GroundTruth::new(frame_id, self.class_id, shape))
    }

    /// A line without a confidence is treated as certain.
    pub fn to_detection(
        &self,
        frame_id: &str,
        width: usize,
        height: usize,
    ) -> Result<Detection, AnnotationError> {
        let shape = Shape::from_polygon(&self.polygon()?, width, height)?;
        Ok(Detection::new(
            frame_id,
            self.class_id,
            self.confidence.unwrap_or(1.0),
            shape,
        )?)
    }
}

fn malformed(line: usize, position: usize, reason: impl Into<String>) -> AnnotationError {
    AnnotationError::MalformedLine {
        line,
        position,
        reason: reason.into(),
    }
}

fn unit_value(token: &str, line: usize, position: usize) -> Result<f64, AnnotationError> {
    let value: f64 = token
        .parse()
        .map_err(|_| malformed(line, position, format!("`{token}` is not a number")))?;
    if !value.is_finite() {
        return Err(malformed(
            line,
            position,
            format!("`{token}` is not finite"),
        ));
    }
    if !(0.0..=1.0).contains(&value) {
        return Err(AnnotationError::OutOfRangeCoordinate {
            line,
            position,
            value,
        });
    }
    Ok(value)
}

/// Parse one non-empty line; `line` is the 1-based line number used in errors.
pub fn parse_line(
    text: &str,
    kind: AnnotationKind,
    line: usize,
) -> Result<AnnotationLine, AnnotationError> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let Some((class_token, rest)) = tokens.split_first() else {
        return Err(malformed(line, 0, "empty line"));
    };
    let class_id: u32 = class_token.parse().map_err(|_| {
        malformed(
            line,
            1,
            format!("class id `{class_token}` is not a non-negative integer"),
        )
    })?;

    let (coords, confidence) = match kind {
        AnnotationKind::GroundTruth => {
            if rest.len() % 2 != 0 {
                return Err(malformed(
                    line,
                    tokens.len(),
                    format!("odd coordinate count {}", rest.len()),
                ));
            }
            (rest, None)
        }
        AnnotationKind::Prediction => {
            if rest.len() % 2 == 0 {
                return Err(malformed(
                    line,
                    tokens.len(),
                    format!(
                        "expected an even coordinate count plus a confidence, got {} fields",
                        rest.len()
                    ),
                ));
            }
            let (conf, coords) = rest.split_last().expect("odd length is nonzero");
            let value: f64 = conf
                .parse()
                .map_err(|_| malformed(line, tokens.len(), format!("`{conf}` is not a number")))?;
            if !(0.0..=1.0).contains(&value) {
                return Err(malformed(
                    line,
                    tokens.len(),
                    format!("confidence {conf} is outside [0, 1]"),
                ));
            }
            (coords, Some(value))
        }
    };
    if coords.len() < 6 {
        return Err(malformed(
            line,
            0,
            format!(
                "polygon needs at least 3 vertices, got {} coordinates",
                coords.len()
            ),
        ));
    }

    let mut polygon = Vec::with_capacity(coords.len() / 2);
    for (i, pair) in coords.chunks_exact(2).enumerate() {
        let position = 2 + 2 * i;
        polygon.push([
            unit_value(pair[0], line, position)?,
            unit_value(pair[1], line, position + 1)?,
        ]);
    }
    Ok(AnnotationLine {
        class_id,
        polygon,
        confidence,
    })
}

/// Parse a whole file body; blank lines are skipped, every other line must
/// parse.
pub fn parse_text(
    text: &str,
    kind: AnnotationKind,
) -> Result<Vec<AnnotationLine>, AnnotationError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_line(l, kind, i + 1))
        .collect()
}

/// Like [`parse_text`], but each line's kind follows from its field count:
/// an odd count (class plus coordinate pairs) is ground truth, an even count
/// carries a trailing confidence.
pub fn parse_text_any(text: &str) -> Result<Vec<AnnotationLine>, AnnotationError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let kind = if l.split_whitespace().count() % 2 == 0 {
                AnnotationKind::Prediction
            } else {
                AnnotationKind::GroundTruth
            };
            parse_line(l, kind, i + 1)
        })
        .collect()
}

/// Shortest representation that parses back to the same value.
pub fn emit_line(line: &AnnotationLine) -> String {
    let mut out = line.class_id.to_string();
    for [x, y] in &line.polygon {
        write!(out, " {x} {y}").expect("writing to a String");
    }
    if let Some(c) = line.confidence {
        write!(out, " {c}").expect("writing to a String");
    }
    out
}

pub fn emit_text(lines: &[AnnotationLine]) -> String {
    lines.iter().map(|l| emit_line(l) + "\n").collect()
}

pub fn read_annotations(
    path: &Path,
    kind: AnnotationKind,
) -> Result<Vec<AnnotationLine>, AnnotationError> {
    parse_text(&io::read_string(path)?, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ground_truth_line() {
        let a = parse_line("0 0.1 0.1 0.9 0.1 0.5 0.9", AnnotationKind::GroundTruth, 1).unwrap();
        assert_eq!(a.class_id, 0);
        assert_eq!(a.polygon, vec![[0.1, 0.1], [0.9, 0.1], [0.5, 0.9]]);
        assert_eq!(a.confidence, None);
    }

    #[test]
    fn prediction_line() {
        let a = parse_line(
            "0 0.1 0.1 0.9 0.1 0.5 0.9 0.87",
            AnnotationKind::Prediction,
            1,
        )
        .unwrap();
        assert_eq!(a.polygon.len(), 3);
        assert_eq!(a.confidence, Some(0.87));
    }

    #[test]
    fn malformed_lines_are_positioned() {
        let err = parse_line("0 0.1 0.1 0.9", AnnotationKind::GroundTruth, 4).unwrap_err();
        assert!(matches!(
            err,
            AnnotationError::MalformedLine { line: 4, .. }
        ));
        let err = parse_line("0 0.1 0.1 0.9 0.1", AnnotationKind::GroundTruth, 2).unwrap_err();
        assert!(matches!(
            err,
            AnnotationError::MalformedLine { line: 2, .. }
        ));
        let err =
            parse_line("0 0.1 0.1 0.9 0.1 0.5 0.9", AnnotationKind::Prediction, 1).unwrap_err();
        assert!(matches!(err, AnnotationError::MalformedLine { .. }));
        let err =
            parse_line("x 0.1 0.1 0.9 0.1 0.5 0.9", AnnotationKind::GroundTruth, 1).unwrap_err();
        assert!(matches!(
            err,
            AnnotationError::MalformedLine { position: 1, .. }
        ));
        let err =
            parse_line("0 0.1 0.1 0.9 abc 0.5 0.9", AnnotationKind::GroundTruth, 1).unwrap_err();
        assert!(matches!(
            err,
            AnnotationError::MalformedLine { position: 5, .. }
        ));
        let err =
            parse_line("0 0.1 0.1 1.2 0.1 0.5 0.9", AnnotationKind::GroundTruth, 3).unwrap_err();
        assert!(matches!(
            err,
            AnnotationError::OutOfRangeCoordinate {
                line: 3,
                position: 4,
                ..
            }
        ));
        let err = parse_line(
            "0 0.1 0.1 0.9 0.1 0.5 0.9 1.5",
            AnnotationKind::Prediction,
            1,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            AnnotationError::MalformedLine { position: 8, .. }
        ));
        assert!(parse_line("-1 0.1 0.1 0.9 0.1 0.5 0.9", AnnotationKind::GroundTruth, 1).is_err());
        assert!(parse_line("0 NaN 0.1 0.9 0.1 0.5 0.9", AnnotationKind::GroundTruth, 1).is_err());
    }

    #[test]
    fn files_skip_blank_lines_but_not_bad_ones() {
        let text = "0 0 0 1 0 1 1\n\n  \n0 0 0 1 0 0 1\n";
        assert_eq!(
            parse_text(text, AnnotationKind::GroundTruth).unwrap().len(),
            2
        );
        let bad = "0 0 0 1 0 1 1\n0 0 0\n";
        let err = parse_text(bad, AnnotationKind::GroundTruth).unwrap_err();
        assert!(matches!(
            err,
            AnnotationError::MalformedLine { line: 2, .. }
        ));
    }

    #[test]
    fn mixed_kinds() {
        let text = "0 0 0 1 0 1 1\n0 0 0 1 0 1 1 0.4\n";
        let lines = parse_text_any(text).unwrap();
        assert_eq!(lines[0].confidence, None);
        assert_eq!(lines[1].confidence, Some(0.4));
        assert!(parse_text_any("0 0 0 1\n").is_err());
    }

    #[test]
    fn conversions() {
        let a = parse_line(
            "0 0 0 0.5 0 0.5 0.5 0 0.5 0.6",
            AnnotationKind::Prediction,
            1,
        )
        .unwrap();
        let d = a.to_detection("f", 10, 10).unwrap();
        assert_eq!(d.confidence, 0.6);
        assert_eq!(d.shape.mask.pixel_count(), 25);
        let g = a.to_ground_truth("f", 10, 10).unwrap();
        assert_eq!(g.shape.mask, d.shape.mask);
    }

    fn line_strategy() -> impl Strategy<Value = AnnotationLine> {
        (
            0u32..5,
            prop::collection::vec([0.0f64..=1.0, 0.0f64..=1.0], 3..12),
            prop::option::of(0.0f64..=1.0),
        )
            .prop_map(|(class_id, polygon, confidence)| AnnotationLine {
                class_id,
                polygon,
                confidence,
            })
    }

    proptest! {
        #[test]
        fn emit_parse_round_trip(lines in prop::collection::vec(line_strategy(), 0..6), pred in any::<bool>()) {
            let lines: Vec<AnnotationLine> = lines
                .into_iter()
                .map(|mut l| {
                    if pred { l.confidence.get_or_insert(0.5); } else { l.confidence = None; }
                    l
                })
                .collect();
            let kind = if pred { AnnotationKind::Prediction } else { AnnotationKind::GroundTruth };
            let text = emit_text(&lines);
            let parsed = parse_text(&text, kind).unwrap();
            prop_assert_eq!(&parsed, &lines);
            prop_assert_eq!(emit_text(&parsed), text);
        }
    }
}
