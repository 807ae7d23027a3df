//! Per-pothole and per-frame characterization: areas, damage percentage,
//! pothole vs. surrounding-band depth, relative depth and severity ordering.
//!
//! Depth convention: a larger normalized value is farther from the camera, so
//! a pothole whose mean depth exceeds its surroundings is recessed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{
    surrounding_band, BinaryMask, DepthField, DepthMap, Instance, PixelBounds, RasterError,
    MISSING_DEPTH,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Far limit of the Kinect V2 depth sensor.
pub const DEFAULT_DEPTH_RANGE_MM: f64 = 4500.0;
pub const RP_D_DEFINITIONS: &str = "rp_d_difference = (p_d - s_d) * 100; \
rp_d_ratio = (p_d - s_d) / s_d * 100; rp_d_mode names the configured primary definition; \
severity always uses rp_d_difference";
pub const DEFAULT_BAND_RADIUS: usize = 15;
pub const DEFAULT_MIN_VALID_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Pothole,
    Band,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Region::Pothole => "pothole",
            Region::Band => "band",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CharacterizeError {
    #[error(
        "insufficient depth coverage in {region}: valid fraction {fraction:.4} below {required}"
    )]
    InsufficientDepthCoverage {
        region: Region,
        fraction: f64,
        required: f64,
    },
    #[error("surrounding depth is zero; ratio-mode relative depth is undefined")]
    ZeroSurroundDepth,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RpdMode {
    /// `(P_D - S_D) / S_D * 100`
    Ratio,
    /// `(P_D - S_D) * 100`
    #[default]
    Difference,
}

impl std::str::FromStr for RpdMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ratio" => Ok(Self::Ratio),
            "difference" => Ok(Self::Difference),
            other => Err(format!(
                "unknown rp_d mode `{other}` (expected ratio|difference)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacterizeParams {
    pub band_radius: usize,
    pub min_valid_fraction: f64,
    pub rpd_mode: RpdMode,
}

impl Default for CharacterizeParams {
    fn default() -> Self {
        Self {
            band_radius: DEFAULT_BAND_RADIUS,
            min_valid_fraction: DEFAULT_MIN_VALID_FRACTION,
            rpd_mode: RpdMode::Difference,
        }
    }
}

pub fn display_percent(v: f64) -> String {
    format!("{v:.2}")
}

pub fn display_depth(v: f64) -> String {
    format!("{v:.4}")
}

/// Map millimeters to `[0, 1]` by `mm / max_range_mm`, clamped; missing stays missing.
pub fn normalize_depth(
    depth: &DepthMap,
    max_range_mm: f64,
) -> Result<DepthField, CharacterizeError> {
    if max_range_mm.is_nan() || max_range_mm <= 0.0 {
        return Err(CharacterizeError::InvalidParameter(format!(
            "depth range must be positive, got {max_range_mm}"
        )));
    }
    let values = depth
        .samples()
        .iter()
        .map(|&s| (s != MISSING_DEPTH).then(|| (s as f64 / max_range_mm).clamp(0.0, 1.0)))
        .collect();
    Ok(DepthField::new(depth.width(), depth.height(), values)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthStats {
    pub p_d: f64,
    pub s_d: f64,
    pub p_d_display: String,
    pub s_d_display: String,
    pub valid_pothole_fraction: f64,
    pub valid_band_fraction: f64,
    pub pothole_pixels: usize,
    pub band_pixels: usize,
}

/// Mean of valid samples under `mask` in raster order, with (valid, total) counts.
fn masked_mean(field: &DepthField, mask: &BinaryMask) -> (Option<f64>, usize, usize) {
    let mut sum = 0.0;
    let (mut valid, mut total) = (0usize, 0usize);
    for (x, y) in mask.iter_set() {
        total += 1;
        if let Some(v) = field.get(x, y) {
            sum += v;
            valid += 1;
        }
    }
    let mean = (valid > 0).then(|| sum / valid as f64);
    (mean, valid, total)
}

/// Mean normalized depth over the pothole (`p_d`) and over its surrounding
/// band (`s_d`). Either region falling below `min_valid_fraction` valid
/// samples is an error.
pub fn depth_stats(
    instance_mask: &BinaryMask,
    all_potholes: &BinaryMask,
    field: &DepthField,
    band_radius: usize,
    min_valid_fraction: f64,
) -> Result<DepthStats, CharacterizeError> {
    if band_radius == 0 {
        return Err(CharacterizeError::InvalidParameter(
            "band radius must be at least 1".into(),
        ));
    }
    if field.width() != instance_mask.width() || field.height() != instance_mask.height() {
        return Err(RasterError::DimensionMismatch {
            a_width: instance_mask.width(),
            a_height: instance_mask.height(),
            b_width: field.width(),
            b_height: field.height(),
        }
        .into());
    }
    let band = surrounding_band(instance_mask, all_potholes, band_radius)?;

    let fraction = |valid: usize, total: usize| {
        if total == 0 {
            0.0
        } else {
            valid as f64 / total as f64
        }
    };
    let (p_mean, p_valid, p_total) = masked_mean(field, instance_mask);
    let (s_mean, s_valid, s_total) = masked_mean(field, &band);
    let p_frac = fraction(p_valid, p_total);
    let s_frac = fraction(s_valid, s_total);

    let check = |region, frac: f64, mean: Option<f64>| match mean {
        Some(m) if frac >= min_valid_fraction => Ok(m),
        _ => Err(CharacterizeError::InsufficientDepthCoverage {
            region,
            fraction: frac,
            required: min_valid_fraction,
        }),
    };
    let p_d = check(Region::Pothole, p_frac, p_mean)?;
    let s_d = check(Region::Band, s_frac, s_mean)?;

    Ok(DepthStats {
        p_d,
        s_d,
        p_d_display: display_depth(p_d),
        s_d_display: display_depth(s_d),
        valid_pothole_fraction: p_frac,
        valid_band_fraction: s_frac,
        pothole_pixels: p_total,
        band_pixels: s_total,
    })
}

/// Relative pothole depth in percent.
pub fn relative_depth(p_d: f64, s_d: f64, mode: RpdMode) -> Result<f64, CharacterizeError> {
    match mode {
        RpdMode::Difference => Ok((p_d - s_d) * 100.0),
        RpdMode::Ratio if s_d == 0.0 => Err(CharacterizeError::ZeroSurroundDepth),
        RpdMode::Ratio => Ok((p_d - s_d) / s_d * 100.0),
    }
}

/// The geometric part of an instance, without its mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub id: usize,
    pub pixel_area: usize,
    pub contour_area: f64,
    pub bbox: PixelBounds,
    pub centroid: [f64; 2],
}

impl From<&Instance> for InstanceSummary {
    fn from(inst: &Instance) -> Self {
        Self {
            id: inst.id,
            pixel_area: inst.pixel_area,
            contour_area: inst.contour_area,
            bbox: inst.bbox,
            centroid: inst.centroid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotholeRecord {
    pub instance: InstanceSummary,
    pub depth: Option<DepthStats>,
    pub rp_d_ratio: Option<f64>,
    pub rp_d_difference: Option<f64>,
    pub rp_d_ratio_display: Option<String>,
    pub rp_d_difference_display: Option<String>,
    /// Ordering key only; not a physical quantity.
    pub severity: f64,
    pub warning: Option<String>,
}

impl PotholeRecord {
    pub fn new(instance: InstanceSummary, depth: Option<DepthStats>) -> Self {
        let rp_d_difference = depth
            .as_ref()
            .map(|d| relative_depth(d.p_d, d.s_d, RpdMode::Difference))
            .transpose()
            .expect("difference mode is total");
        let rp_d_ratio = depth
            .as_ref()
            .and_then(|d| relative_depth(d.p_d, d.s_d, RpdMode::Ratio).ok());
        let mut record = Self {
            instance,
            depth,
            rp_d_ratio,
            rp_d_difference,
            rp_d_ratio_display: rp_d_ratio.map(display_percent),
            rp_d_difference_display: rp_d_difference.map(display_percent),
            severity: 0.0,
            warning: None,
        };
        record.severity = severity(&record);
        record
    }

    pub fn with_warning(mut self, warning: impl Into<String>) -> Self {
        self.warning = Some(warning.into());
        self
    }

    pub fn rp_d(&self, mode: RpdMode) -> Option<f64> {
        match mode {
            RpdMode::Ratio => self.rp_d_ratio,
            RpdMode::Difference => self.rp_d_difference,
        }
    }
}

/// `contour_area * max(rp_d_difference, 0)`; zero without depth.
pub fn severity(record: &PotholeRecord) -> f64 {
    record
        .rp_d_difference
        .map_or(0.0, |rpd| record.instance.contour_area * rpd.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub schema_version: u32,
    pub frame_id: String,
    pub frame_area: f64,
    pub rp_d_mode: RpdMode,
    /// Both relative-depth definitions are reported on every record because
    /// the two readings of the indicator disagree; this spells them out.
    pub rp_d_definitions: String,
    pub pothole_count: usize,
    pub total_pothole_area: f64,
    pub damage_percent: f64,
    pub damage_percent_display: String,
    pub potholes: Vec<PotholeRecord>,
}

/// Sum of contour areas and the damage percentage `100 * total / frame_area`.
pub fn damage_summary(
    contour_areas: &[f64],
    frame_area: f64,
) -> Result<(f64, f64), CharacterizeError> {
    if frame_area.is_nan() || frame_area <= 0.0 {
        return Err(CharacterizeError::InvalidParameter(format!(
            "frame area must be positive, got {frame_area}"
        )));
    }
    let total = contour_areas.iter().fold(0.0, |acc, a| acc + a);
    Ok((total, 100.0 * total / frame_area))
}

/// Assemble a frame report from finished records, ordering potholes by
/// severity (descending, ties by instance id).
pub fn summarize_frame(
    frame_id: impl Into<String>,
    mut records: Vec<PotholeRecord>,
    frame_area: f64,
    mode: RpdMode,
) -> Result<FrameReport, CharacterizeError> {
    let areas: Vec<f64> = records.iter().map(|r| r.instance.contour_area).collect();
    let (total, damage) = damage_summary(&areas, frame_area)?;
    records.sort_by(|a, b| {
        b.severity
            .total_cmp(&a.severity)
            .then(a.instance.id.cmp(&b.instance.id))
    });
    Ok(FrameReport {
        schema_version: REPORT_SCHEMA_VERSION,
        frame_id: frame_id.into(),
        frame_area,
        rp_d_mode: mode,
        rp_d_definitions: RP_D_DEFINITIONS.to_string(),
        pothole_count: records.len(),
        total_pothole_area: total,
        damage_percent: damage,
        damage_percent_display: display_percent(damage),
        potholes: records,
    })
}

/// Characterize every instance of a frame. Insufficient depth coverage for
/// an instance becomes a warning on its record, not a frame failure.
pub fn frame_report(
    frame_id: impl Into<String>,
    instances: &[Instance],
    frame_area: f64,
    depth: Option<&DepthField>,
    params: &CharacterizeParams,
) -> Result<FrameReport, CharacterizeError> {
    let mut records = Vec::with_capacity(instances.len());
    if let (Some(field), Some(first)) = (depth, instances.first()) {
        let mut all = BinaryMask::new(first.mask.width(), first.mask.height())?;
        for inst in instances {
            all.union_with(&inst.mask)?;
        }
        for inst in instances {
            let summary = InstanceSummary::from(inst);
            let record = match depth_stats(
                &inst.mask,
                &all,
                field,
                params.band_radius,
                params.min_valid_fraction,
            ) {
                Ok(stats) => PotholeRecord::new(summary, Some(stats)),
                Err(e @ CharacterizeError::InsufficientDepthCoverage { .. }) => {
                    PotholeRecord::new(summary, None).with_warning(e.to_string())
                }
                Err(e) => return Err(e),
            };
            records.push(record);
        }
    } else {
        records.extend(
            instances
                .iter()
                .map(|inst| PotholeRecord::new(InstanceSummary::from(inst), None)),
        );
    }
    summarize_frame(frame_id, records, frame_area, params.rpd_mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{extract_instances, Connectivity};
    use proptest::prelude::*;

    fn summary(id: usize, contour_area: f64) -> InstanceSummary {
        InstanceSummary {
            id,
            pixel_area: contour_area.ceil() as usize + 1,
            contour_area,
            bbox: PixelBounds {
                x_min: 0,
                y_min: 0,
                x_max: 0,
                y_max: 0,
            },
            centroid: [0.0, 0.0],
        }
    }

    fn stats(p_d: f64, s_d: f64) -> DepthStats {
        DepthStats {
            p_d,
            s_d,
            p_d_display: display_depth(p_d),
            s_d_display: display_depth(s_d),
            valid_pothole_fraction: 1.0,
            valid_band_fraction: 1.0,
            pothole_pixels: 1,
            band_pixels: 1,
        }
    }

    /// Flat plane with a rectangular pothole; returns (field, instance mask).
    fn bowl(plane: f64, pothole: f64) -> (DepthField, BinaryMask) {
        let (w, h) = (60, 40);
        let mut mask = BinaryMask::new(w, h).unwrap();
        let mut values = vec![Some(plane); w * h];
        for y in 15..25 {
            for x in 20..35 {
                mask.set(x, y, true);
                values[y * w + x] = Some(pothole);
            }
        }
        (DepthField::new(w, h, values).unwrap(), mask)
    }

    #[test]
    fn normalize_examples() {
        let d = DepthMap::new(3, 1, vec![2250, 0, 9000]).unwrap();
        let f = normalize_depth(&d, 4500.0).unwrap();
        assert_eq!(f.values(), &[Some(0.5), None, Some(1.0)]);
        assert!(normalize_depth(&d, 0.0).is_err());
    }

    #[test]
    fn bowl_means_are_exact() {
        let (field, mask) = bowl(0.55, 0.75);
        let s = depth_stats(&mask, &mask, &field, 3, 0.2).unwrap();
        assert_eq!(s.p_d, 0.75);
        assert!((s.s_d - 0.55).abs() < 1e-12);
        assert_eq!(s.valid_pothole_fraction, 1.0);
        assert_eq!(s.pothole_pixels, 150);
    }

    #[test]
    fn reference_means_give_expected_rpd() {
        let (field, mask) = bowl(0.5808, 0.7693);
        let s = depth_stats(&mask, &mask, &field, 5, 0.2).unwrap();
        assert_eq!(s.p_d_display, "0.7693");
        assert_eq!(s.s_d_display, "0.5808");
    }

    #[test]
    fn missing_pothole_depth_is_insufficient() {
        let (field, mask) = bowl(0.55, 0.75);
        let values = field
            .values()
            .iter()
            .zip(mask.bits())
            .map(|(&v, &m)| if m { None } else { v })
            .collect();
        let holed = DepthField::new(field.width(), field.height(), values).unwrap();
        match depth_stats(&mask, &mask, &holed, 3, 0.2) {
            Err(CharacterizeError::InsufficientDepthCoverage {
                region, fraction, ..
            }) => {
                assert_eq!(region, Region::Pothole);
                assert_eq!(fraction, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_band_is_insufficient() {
        let mask = BinaryMask::from_bits(2, 2, vec![true; 4]).unwrap();
        let field = DepthField::new(2, 2, vec![Some(0.5); 4]).unwrap();
        assert!(matches!(
            depth_stats(&mask, &mask, &field, 2, 0.2),
            Err(CharacterizeError::InsufficientDepthCoverage {
                region: Region::Band,
                ..
            })
        ));
    }

    #[test]
    fn relative_depth_examples() {
        let diff = |p, s| display_percent(relative_depth(p, s, RpdMode::Difference).unwrap());
        let ratio = |p, s| display_percent(relative_depth(p, s, RpdMode::Ratio).unwrap());
        assert_eq!(diff(0.7693, 0.5808), "18.85");
        assert_eq!(diff(0.6925, 0.5254), "16.71");
        assert_eq!(diff(0.6046, 0.5200), "8.46");
        assert_eq!(diff(0.6659, 0.6631), "0.28");
        assert_eq!(ratio(0.7693, 0.5808), "32.46");
        assert_eq!(relative_depth(0.4, 0.4, RpdMode::Ratio).unwrap(), 0.0);
        assert_eq!(relative_depth(0.4, 0.4, RpdMode::Difference).unwrap(), 0.0);
        assert_eq!(
            relative_depth(0.4, 0.0, RpdMode::Ratio),
            Err(CharacterizeError::ZeroSurroundDepth)
        );
    }

    #[test]
    fn severity_examples() {
        let mut r = PotholeRecord::new(summary(0, 100.0), Some(stats(0.5, 0.6)));
        assert_eq!(r.severity, 0.0);
        r.rp_d_difference = Some(10.0);
        assert_eq!(severity(&r), 1000.0);
        let a = PotholeRecord::new(summary(0, 500.0), Some(stats(0.7693, 0.5808)));
        let c = PotholeRecord::new(summary(1, 500.0), Some(stats(0.6046, 0.5200)));
        let report = summarize_frame("f", vec![c, a], 245760.0, RpdMode::Difference).unwrap();
        assert_eq!(report.potholes[0].instance.id, 0);
    }

    #[test]
    fn reference_damage_rows() {
        let rows: [(&[f64], &str, &str); 5] = [
            (&[12101.0], "12101", "4.92"),
            (&[1723.5, 3778.0], "5501.5", "2.24"),
            (&[2497.0, 1113.5, 43.0], "3653.5", "1.49"),
            (&[5929.0], "5929", "2.41"),
            (&[8923.0], "8923", "3.63"),
        ];
        for (areas, total, pct) in rows {
            let records = areas
                .iter()
                .enumerate()
                .map(|(i, &a)| PotholeRecord::new(summary(i, a), None))
                .collect();
            let r = summarize_frame("x", records, 245760.0, RpdMode::Difference).unwrap();
            assert_eq!(r.total_pothole_area.to_string(), total);
            assert_eq!(r.damage_percent_display, pct);
        }
        let empty = summarize_frame("x", vec![], 245760.0, RpdMode::Difference).unwrap();
        assert_eq!(empty.damage_percent, 0.0);
        assert_eq!(empty.damage_percent_display, "0.00");
        assert!(summarize_frame("x", vec![], 0.0, RpdMode::Difference).is_err());
    }

    #[test]
    fn frame_report_warns_instead_of_failing() {
        let (field, mask) = bowl(0.55, 0.75);
        let mut two = mask.clone();
        for y in 2..6 {
            for x in 2..6 {
                two.set(x, y, true);
            }
        }
        // blank the small pothole's depth
        let values = field
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let (x, y) = (i % 60, i / 60);
                if (2..6).contains(&x) && (2..6).contains(&y) {
                    None
                } else {
                    v
                }
            })
            .collect();
        let field = DepthField::new(60, 40, values).unwrap();
        let instances = extract_instances(&two, Connectivity::Eight).unwrap();
        let params = CharacterizeParams {
            band_radius: 3,
            ..Default::default()
        };
        let r = frame_report("f", &instances, 2400.0, Some(&field), &params).unwrap();
        assert_eq!(r.pothole_count, 2);
        let big = &r.potholes[0];
        assert!(big.depth.is_some());
        assert!(big.severity > 0.0);
        let small = &r.potholes[1];
        assert!(small.depth.is_none());
        assert!(small.warning.as_deref().unwrap().contains("pothole"));
        assert_eq!(r.total_pothole_area, 9.0 + 14.0 * 9.0);
    }

    proptest! {
        #[test]
        fn ratio_equals_difference_over_surround(p in 0.0f64..1.0, s in 0.01f64..1.0) {
            let ratio = relative_depth(p, s, RpdMode::Ratio).unwrap();
            let diff = relative_depth(p, s, RpdMode::Difference).unwrap();
            prop_assert!((ratio - diff / s).abs() < 1e-9);
            prop_assert_eq!(ratio.signum(), diff.signum());
        }

        #[test]
        fn ratio_mode_is_scale_invariant(p in 0.05f64..0.45, s in 0.05f64..0.45, k in prop::sample::select(vec![0.5, 2.0])) {
            let base = relative_depth(p, s, RpdMode::Ratio).unwrap();
            let scaled = relative_depth(k * p, k * s, RpdMode::Ratio).unwrap();
            prop_assert!((base - scaled).abs() < 1e-9);
            let d0 = relative_depth(p, s, RpdMode::Difference).unwrap();
            let d1 = relative_depth(k * p, k * s, RpdMode::Difference).unwrap();
            prop_assert!((d1 - k * d0).abs() < 1e-9);
        }

        #[test]
        fn ordering_ignores_frame_area(areas in prop::collection::vec((1.0f64..5000.0, 0.3f64..0.9, 0.3f64..0.9), 1..8), scale in 1.0f64..10.0) {
            let records: Vec<_> = areas
                .iter()
                .enumerate()
                .map(|(i, &(a, p, s))| PotholeRecord::new(summary(i, a), Some(stats(p, s))))
                .collect();
            let ids = |r: FrameReport| r.potholes.iter().map(|p| p.instance.id).collect::<Vec<_>>();
            let a = summarize_frame("f", records.clone(), 1e6, RpdMode::Difference).unwrap();
            let b = summarize_frame("f", records, 1e6 * scale, RpdMode::Difference).unwrap();
            prop_assert_eq!(ids(a), ids(b));
        }
    }
}
