//! Pothole characterization from segmentation output and depth maps.
//!
//! The crate turns per-frame pothole masks (or YOLO-seg polygons) and
//! Kinect-style depth maps into per-pothole area and relative-depth records,
//! and carries the tooling around that: dataset preparation, detection and
//! depth evaluation, synthetic scenes with known answers, and report codecs.

pub mod annotation;
pub mod characterize;
pub mod config;
pub mod dataset;
pub mod depth_eval;
pub mod io;
pub mod metrics;
pub mod overlay;
pub mod raster;
pub mod report;
pub mod synth;
