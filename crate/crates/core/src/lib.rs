//! Dataset preparation and evaluation engine for window instance segmentation
//! in facade imagery.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`annotation`] reads and writes VIA polygon annotations, resolves image
//!   dimensions, and produces splits, folds and summary statistics.
//! * [`geometry`] holds the polygon, box and mask primitives everything else
//!   is built on.
//! * [`augment`] plans and applies polygon-preserving flips and affine warps.
//! * [`anchors`] generates anchor grids, assigns labels, and runs NMS.
//! * [`eval`] matches detections against ground truth and computes
//!   precision, recall, AP/mAP and pixel accuracy.
//! * [`losses`] aggregates weighted training losses and picks epochs.
//! * [`render`] draws overlays and writes PPM/PNG images.

pub mod anchors;
pub mod annotation;
pub mod augment;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod losses;
pub mod render;
pub mod rng;
pub mod testkit;

pub use error::{Error, Result};
