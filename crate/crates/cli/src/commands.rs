use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use roadchar_core::annotation::{parse_text, parse_text_any, AnnotationKind};
use roadchar_core::characterize::{frame_report, normalize_depth, FrameReport};
use roadchar_core::config::Config;
use roadchar_core::dataset::{self, derive_seed, PrepParams};
use roadchar_core::depth_eval::{evaluate_set, DepthUnits};
use roadchar_core::io;
use roadchar_core::metrics::{evaluate as evaluate_metrics, Detection, GroundTruth};
use roadchar_core::overlay::render_overlay;
use roadchar_core::raster::{extract_instances, rasterize_polygon, BinaryMask, RasterError};
use roadchar_core::report::{confidence_curve_csv, emit_json, pothole_csv, pr_curve_csv};
use roadchar_core::synth::{generate, random_scene_spec, write_scene};

/// Marks errors that should exit with the usage status.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once('x')
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
    let w: usize = w.parse().map_err(|_| format!("bad width `{w}`"))?;
    let h: usize = h.parse().map_err(|_| format!("bad height `{h}`"))?;
    if w == 0 || h == 0 {
        return Err("size must be positive".into());
    }
    Ok((w, h))
}

#[derive(Args, Debug)]
pub struct PrepArgs {
    /// Directory with rgb/<id>.png and depth/<id>.png
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Originals held out for testing (with all their variants)
    #[arg(long, default_value_t = 50)]
    test_count: usize,
    /// Target size as WIDTHxHEIGHT
    #[arg(long, default_value = "640x640", value_parser = parse_size)]
    size: (usize, usize),
    #[arg(long)]
    no_resize: bool,
    #[arg(long)]
    no_augment: bool,
}

pub fn prep(args: &PrepArgs, config: &Config) -> Result<()> {
    let pairs = dataset::load_pairs(&args.input)
        .with_context(|| format!("loading dataset from {}", args.input.display()))?;
    let params = PrepParams {
        zero_fraction_threshold: config.zero_fraction_threshold,
        augment: !args.no_augment,
        target_size: (!args.no_resize).then_some(args.size),
        test_count: args.test_count,
        seed: config.seed,
    };
    let (out, manifest) = dataset::prepare(pairs, &params)?;
    dataset::write_pairs(&args.out, &out)?;
    io::write_bytes(&args.out.join("manifest.json"), &emit_json(&manifest)?)?;
    println!(
        "prepared {} pairs ({} removed, {} test families)",
        manifest.counts.output,
        manifest.counts.removed_by_cleaning,
        manifest.split.test_families.len()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct CharacterizeArgs {
    /// RGB frames, <id>.png
    #[arg(long)]
    frames: PathBuf,
    /// Predictions: <id>.txt polygons or <id>.png masks
    #[arg(long)]
    preds: PathBuf,
    /// 16-bit depth maps, <id>.png; frames without one get no depth fields
    #[arg(long)]
    depths: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    no_overlays: bool,
}

fn file(dir: &Path, id: &str, ext: &str) -> PathBuf {
    dir.join(format!("{id}.{ext}"))
}

/// Union of predicted regions at or above the confidence threshold.
fn prediction_mask(dir: &Path, id: &str, w: usize, h: usize, conf: f64) -> Result<BinaryMask> {
    let txt = file(dir, id, "txt");
    let png = file(dir, id, "png");
    let mut mask = BinaryMask::new(w, h)?;
    if txt.is_file() {
        let lines = parse_text_any(&io::read_string(&txt)?)
            .with_context(|| format!("parsing {}", txt.display()))?;
        for line in lines.iter().filter(|l| l.confidence.unwrap_or(1.0) >= conf) {
            match rasterize_polygon(&line.polygon()?, w, h) {
                Ok(m) => mask.union_with(&m)?,
                // collapses to a line or point at this resolution: no pixels
                Err(RasterError::DegeneratePolygon) => {}
                Err(e) => return Err(e.into()),
            }
        }
    } else if png.is_file() {
        mask = io::read_mask_png(&png)?;
        if (mask.width(), mask.height()) != (w, h) {
            bail!(
                "{}: mask is {}x{} but the frame is {w}x{h}",
                png.display(),
                mask.width(),
                mask.height()
            );
        }
    }
    Ok(mask)
}

fn characterize_frame(args: &CharacterizeArgs, config: &Config, id: &str) -> Result<FrameReport> {
    let rgb = io::read_rgb_png(&file(&args.frames, id, "png"))?;
    let (w, h) = (rgb.width(), rgb.height());
    let mask = prediction_mask(&args.preds, id, w, h, config.conf_threshold)?;
    let instances = extract_instances(&mask, config.connectivity())?;
    let depth = match &args.depths {
        Some(dir) if file(dir, id, "png").is_file() => {
            let map = io::read_depth_png(&file(dir, id, "png"))?;
            Some(normalize_depth(&map, config.depth_range_mm)?)
        }
        _ => None,
    };
    let report = frame_report(
        id,
        &instances,
        (w * h) as f64,
        depth.as_ref(),
        &config.characterize_params(),
    )?;
    io::write_bytes(
        &args.out.join("reports").join(format!("{id}.json")),
        &emit_json(&report)?,
    )?;
    if !args.no_overlays {
        let overlay = render_overlay(&rgb, depth.as_ref(), &instances, &report.potholes)?;
        io::write_rgb_png(&file(&args.out.join("overlays"), id, "png"), &overlay.image)?;
    }
    Ok(report)
}

pub fn characterize(args: &CharacterizeArgs, config: &Config) -> Result<()> {
    let ids = io::list_stems(&args.frames, "png")?;
    if ids.is_empty() {
        bail!("no frames found in {}", args.frames.display());
    }
    let reports = ids
        .par_iter()
        .map(|id| characterize_frame(args, config, id).with_context(|| format!("frame {id}")))
        .collect::<Result<Vec<_>>>()?;
    io::write_bytes(&args.out.join("potholes.csv"), &pothole_csv(&reports)?)?;
    let potholes: usize = reports.iter().map(|r| r.pothole_count).sum();
    println!(
        "characterized {} frames, {potholes} potholes",
        reports.len()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Ground truth, <id>.txt
    #[arg(long)]
    labels: PathBuf,
    /// Predictions with confidences, <id>.txt
    #[arg(long)]
    preds: PathBuf,
    /// Frames used for per-frame dimensions, <id>.png
    #[arg(long)]
    frames: Option<PathBuf>,
    #[arg(long, requires = "height")]
    width: Option<usize>,
    #[arg(long, requires = "width")]
    height: Option<usize>,
    /// Output directory; without it the summary is printed
    #[arg(long)]
    out: Option<PathBuf>,
}

type FrameShapes = (Vec<Detection>, Vec<GroundTruth>);

fn evaluate_frame(args: &EvaluateArgs, id: &str) -> Result<FrameShapes> {
    let (w, h) = match (&args.frames, args.width, args.height) {
        (Some(dir), _, _) => io::image_dimensions(&file(dir, id, "png"))?,
        (None, Some(w), Some(h)) => (w, h),
        _ => return Err(usage("evaluate needs --frames or --width/--height")),
    };
    let read = |dir: &Path, kind| -> Result<_> {
        let path = file(dir, id, "txt");
        if !path.is_file() {
            return Ok(Vec::new());
        }
        parse_text(&io::read_string(&path)?, kind)
            .with_context(|| format!("parsing {}", path.display()))
    };
    let gts = read(&args.labels, AnnotationKind::GroundTruth)?
        .iter()
        .map(|l| l.to_ground_truth(id, w, h))
        .collect::<Result<Vec<_>, _>>()?;
    let dets = read(&args.preds, AnnotationKind::Prediction)?
        .iter()
        .map(|l| l.to_detection(id, w, h))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((dets, gts))
}

pub fn evaluate(args: &EvaluateArgs, config: &Config) -> Result<()> {
    if args.frames.is_none() && args.width.is_none() {
        return Err(usage("evaluate needs --frames or --width/--height"));
    }
    let mut ids: BTreeSet<String> = io::list_stems(&args.labels, "txt")?.into_iter().collect();
    ids.extend(io::list_stems(&args.preds, "txt")?);
    let ids: Vec<String> = ids.into_iter().collect();
    let per_frame = ids
        .par_iter()
        .map(|id| evaluate_frame(args, id).with_context(|| format!("frame {id}")))
        .collect::<Result<Vec<_>>>()?;
    let (mut dets, mut gts) = (Vec::new(), Vec::new());
    for (d, g) in per_frame {
        dets.extend(d);
        gts.extend(g);
    }
    let summary = evaluate_metrics(&dets, &gts, config.conf_threshold, config.iou_threshold)?;
    let json = emit_json(&summary)?;
    match &args.out {
        Some(out) => {
            io::write_bytes(&out.join("metrics.json"), &json)?;
            for (name, kind) in [
                ("box", &summary.box_metrics),
                ("mask", &summary.mask_metrics),
            ] {
                io::write_bytes(
                    &out.join(format!("{name}_confidence_curve.csv")),
                    &confidence_curve_csv(&kind.curves)?,
                )?;
                io::write_bytes(
                    &out.join(format!("{name}_pr_curve.csv")),
                    &pr_curve_csv(&kind.curves)?,
                )?;
            }
            println!(
                "box mAP50 {:.4} mAP50-95 {:.4}; mask mAP50 {:.4} mAP50-95 {:.4}",
                summary.box_metrics.mean.ap50,
                summary.box_metrics.mean.ap50_95,
                summary.mask_metrics.mean.ap50,
                summary.mask_metrics.mean.ap50_95
            );
        }
        None => print!("{}", String::from_utf8(json)?),
    }
    Ok(())
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Units {
    Normalized,
    Mm,
}

#[derive(Args, Debug)]
pub struct DepthEvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, value_enum, default_value_t = Units::Normalized)]
    units: Units,
    /// Output JSON file; without it the result is printed
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn depth_eval(args: &DepthEvalArgs, config: &Config) -> Result<()> {
    let units = match args.units {
        Units::Normalized => DepthUnits::Normalized {
            depth_range_mm: config.depth_range_mm,
        },
        Units::Mm => DepthUnits::Millimeters,
    };
    let result = evaluate_set(&args.pred, &args.gt, units)?;
    let json = emit_json(&result)?;
    match &args.out {
        Some(path) => {
            io::write_bytes(path, &json)?;
            println!(
                "mean RMSE {} over {} frames",
                result.mean_rmse,
                result.per_frame.len()
            );
        }
        None => print!("{}", String::from_utf8(json)?),
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 160)]
    width: usize,
    #[arg(long, default_value_t = 120)]
    height: usize,
    /// Gaussian depth noise sigma, normalized units
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Fraction of depth samples blanked
    #[arg(long, default_value_t = 0.0)]
    speckle: f64,
}

pub fn synth(args: &SynthArgs, config: &Config) -> Result<()> {
    let ids: Vec<String> = (0..args.count).map(|i| format!("synth_{i:04}")).collect();
    ids.par_iter()
        .map(|id| {
            let seed = derive_seed(config.seed, id);
            let mut spec = random_scene_spec(seed, args.width, args.height);
            spec.noise_sigma = args.noise;
            spec.missing_speckle = args.speckle;
            spec.band_radius = config.band_radius;
            spec.depth_range_mm = config.depth_range_mm;
            let scene = generate(&spec, seed).with_context(|| format!("scene {id}"))?;
            write_scene(&args.out, id, &scene)?;
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;
    println!("wrote {} scenes to {}", ids.len(), args.out.display());
    Ok(())
}
