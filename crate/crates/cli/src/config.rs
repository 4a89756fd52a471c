//! Run configuration: built-in defaults, then a JSON config file, then flags.

use std::path::{Path, PathBuf};

use facet_core::anchors::AnchorConfig;
use facet_core::augment::AugmentRanges;
use facet_core::eval::{ApInterpolation, ApMode, EvalConfig, IouKind, PerturbSpec};
use facet_core::render::{Caption, ImageKind, OverlayMode, OverlaySpec};
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub folds: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub max_rotation_deg: f64,
    pub max_shear_deg: f64,
    pub flip_probability: f64,
    pub copies: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        let r = AugmentRanges::default();
        Self {
            max_rotation_deg: r.max_rotation_deg,
            max_shear_deg: r.max_shear_deg,
            flip_probability: r.flip_probability,
            copies: 1,
        }
    }
}

impl AugmentConfig {
    pub fn ranges(&self) -> AugmentRanges {
        AugmentRanges {
            max_rotation_deg: self.max_rotation_deg,
            max_shear_deg: self.max_shear_deg,
            flip_probability: self.flip_probability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnchorsConfig {
    pub scales: Vec<f64>,
    pub ratios: Vec<f64>,
    pub stride: u32,
    pub fmap_width: usize,
    pub fmap_height: usize,
    pub pos_iou: f64,
    pub neg_iou: f64,
}

impl Default for AnchorsConfig {
    fn default() -> Self {
        let a = AnchorConfig::default();
        Self {
            scales: a.scales,
            ratios: a.ratios,
            stride: a.stride,
            fmap_width: 32,
            fmap_height: 32,
            pos_iou: 0.7,
            neg_iou: 0.3,
        }
    }
}

impl AnchorsConfig {
    pub fn anchor_config(&self) -> AnchorConfig {
        AnchorConfig {
            scales: self.scales.clone(),
            ratios: self.ratios.clone(),
            stride: self.stride,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub drop_rate: f64,
    pub spurious_rate: f64,
    pub jitter_px: f64,
    pub score_noise: f64,
}

impl SynthConfig {
    pub fn spec(&self, seed: u64) -> PerturbSpec {
        PerturbSpec {
            drop_rate: self.drop_rate,
            spurious_rate: self.spurious_rate,
            jitter_px: self.jitter_px,
            score_noise: self.score_noise,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub mode: OverlayMode,
    pub caption: Caption,
    pub fill_alpha: f64,
    pub outline_width: u32,
    pub caption_scale: u32,
    pub format: ImageKind,
}

impl Default for RenderConfig {
    fn default() -> Self {
        let o = OverlaySpec::default();
        Self {
            mode: o.mode,
            caption: o.caption,
            fill_alpha: o.fill_alpha,
            outline_width: o.outline_width,
            caption_scale: o.caption_scale,
            format: ImageKind::Png,
        }
    }
}

impl RenderConfig {
    pub fn overlay(&self) -> OverlaySpec {
        OverlaySpec {
            mode: self.mode,
            caption: self.caption,
            fill_alpha: self.fill_alpha,
            outline_width: self.outline_width,
            caption_scale: self.caption_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub image_dir: Option<PathBuf>,
    pub dims_manifest: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub iou_threshold: f64,
    pub score_threshold: f64,
    pub iou_kind: IouKind,
    pub ap_mode: ApMode,
    pub interpolation: ApInterpolation,
    pub thresholds: Vec<f64>,
    pub split: SplitConfig,
    pub augment: AugmentConfig,
    pub anchors: AnchorsConfig,
    pub synth: SynthConfig,
    pub render: RenderConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let e = EvalConfig::default();
        Self {
            dataset: None,
            image_dir: None,
            dims_manifest: None,
            predictions: None,
            out_dir: PathBuf::from("facet-out"),
            seed: 0,
            iou_threshold: e.iou_threshold,
            score_threshold: e.score_threshold,
            iou_kind: e.iou_kind,
            ap_mode: e.ap_mode,
            interpolation: e.interpolation,
            thresholds: vec![0.5, 0.6, 0.7, 0.8, 0.9],
            split: SplitConfig::default(),
            augment: AugmentConfig::default(),
            anchors: AnchorsConfig::default(),
            synth: SynthConfig::default(),
            render: RenderConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("config {}: {e}", path.display())))
    }

    pub fn eval(&self) -> EvalConfig {
        EvalConfig {
            iou_threshold: self.iou_threshold,
            iou_kind: self.iou_kind,
            score_threshold: self.score_threshold,
            ap_mode: self.ap_mode,
            interpolation: self.interpolation,
        }
    }

    /// Range checks for every section, whichever subcommand runs.
    pub fn validate(&self) -> Result<(), UsageError> {
        let bad = |e: facet_core::Error| UsageError(format!("config: {e}"));
        self.eval().validate().map_err(bad)?;
        self.augment.ranges().validate().map_err(bad)?;
        self.anchors.anchor_config().validate().map_err(bad)?;
        self.synth.spec(0).validate().map_err(bad)?;
        let check = |ok: bool, msg: String| {
            if ok {
                Ok(())
            } else {
                Err(UsageError(format!("config: {msg}")))
            }
        };
        check(
            self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0,
            format!(
                "train_fraction {} outside (0, 1)",
                self.split.train_fraction
            ),
        )?;
        check(
            self.split.folds >= 2,
            format!("folds must be at least 2, got {}", self.split.folds),
        )?;
        check(self.augment.copies >= 1, "copies must be at least 1".into())?;
        check(
            self.anchors.fmap_width > 0 && self.anchors.fmap_height > 0,
            "feature map must be non-empty".into(),
        )?;
        check(
            0.0 <= self.anchors.neg_iou
                && self.anchors.neg_iou < self.anchors.pos_iou
                && self.anchors.pos_iou <= 1.0,
            format!(
                "need 0 <= neg_iou < pos_iou <= 1, got {} / {}",
                self.anchors.neg_iou, self.anchors.pos_iou
            ),
        )?;
        check(
            self.thresholds.iter().all(|t| (0.0..=1.0).contains(t)),
            format!("sweep thresholds must lie in [0, 1]: {:?}", self.thresholds),
        )?;
        check(
            (0.0..=1.0).contains(&self.render.fill_alpha),
            format!("fill_alpha {} outside [0, 1]", self.render.fill_alpha),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let c: RunConfig =
            serde_json::from_str(r#"{"score_threshold": 0.5, "augment": {"copies": 3}}"#).unwrap();
        assert_eq!(c.score_threshold, 0.5);
        assert_eq!(c.iou_threshold, 0.5);
        assert_eq!(c.augment.copies, 3);
        assert_eq!(c.augment.max_rotation_deg, 45.0);
    }

    #[test]
    fn unknown_keys_and_wrong_types_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"scor_threshold": 0.5}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"score_threshold": "high"}"#).is_err());
    }

    #[test]
    fn out_of_range_values_rejected() {
        let c = RunConfig {
            iou_threshold: 1.5,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.augment.max_shear_deg = 20.0;
        assert!(c.validate().is_err());
    }
}
