//! Detection evaluation: greedy matching at an IoU threshold, precision,
//! recall, AP/mAP, pixel accuracy and confidence sweeps.
//!
//! Evaluation is split in two phases. [`PreparedEval`] rasterises every
//! instance once and keeps only compact per-image results (the IoU matrix
//! and a score-indexed pixel coverage table). Reports for any score or IoU
//! threshold are then cheap queries over that state.

mod matching;
mod metrics;
mod predictions;
mod synth;

pub use matching::{
    evaluate, match_detections, pixel_accuracy, sweep_confidence, DetectionMatch, EvalReport,
    ImageMatch, ImageRow, PixelAccuracy, PreparedEval, SweepRow,
};
pub use metrics::{
    average_precision, average_precision_with, f1, pr_curve, precision_recall, ApInterpolation,
    MatchCounts, PrCurve, PrPoint,
};
pub use predictions::{
    load_predictions, resolve_mask_payloads, write_predictions, Detection, Payload,
};
pub use synth::{synth_predictions, PerturbSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IouKind {
    #[default]
    Mask,
    Box,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApMode {
    /// AP per image, averaged over images.
    #[default]
    PerImageMean,
    /// One AP over detections pooled from every image.
    DatasetWide,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub iou_kind: IouKind,
    /// Detections with `score >= score_threshold` are evaluated.
    pub score_threshold: f64,
    pub ap_mode: ApMode,
    pub interpolation: ApInterpolation,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            iou_kind: IouKind::Mask,
            score_threshold: 0.9,
            ap_mode: ApMode::PerImageMean,
            interpolation: ApInterpolation::AllPoint,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("iou_threshold", self.iou_threshold),
            ("score_threshold", self.score_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}
