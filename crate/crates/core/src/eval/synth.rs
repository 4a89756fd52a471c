//! Synthetic predictions derived from ground truth, for exercising the
//! evaluator with known degradations.

use serde::{Deserialize, Serialize};

use super::{Detection, Payload};
use crate::annotation::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{BBox, Point};
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbSpec {
    /// Probability of dropping each ground-truth instance.
    pub drop_rate: f64,
    /// Expected spurious boxes per ground-truth instance.
    pub spurious_rate: f64,
    /// Each vertex coordinate moves by a uniform offset in `[-jitter_px, jitter_px)`.
    pub jitter_px: f64,
    /// True detections score `1 - score_noise * u` with `u` uniform in `[0, 1)`.
    pub score_noise: f64,
    pub seed: u64,
}

impl PerturbSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("drop_rate", self.drop_rate),
            ("spurious_rate", self.spurious_rate),
            ("score_noise", self.score_noise),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} {v} outside [0, 1]")));
            }
        }
        if !(self.jitter_px >= 0.0 && self.jitter_px.is_finite()) {
            return Err(Error::InvalidArgument(
                "jitter_px must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Copies ground-truth polygons with seeded drops, vertex jitter and score
/// noise, and adds low-scoring spurious boxes.
///
/// Every region consumes the same fixed sequence of draws whatever the rates
/// are, so with a fixed seed the instances dropped at a lower `drop_rate` are
/// a subset of those dropped at a higher one.
pub fn synth_predictions(d: &Dataset, spec: &PerturbSpec) -> Result<Vec<Detection>> {
    spec.validate()?;
    let mut out = Vec::new();
    for img in &d.images {
        let mut rng = SplitMix64::new(derive_seed(spec.seed, &img.filename));
        let (w, h) = (img.width as f64, img.height as f64);
        for r in &img.regions {
            let dropped = rng.next_f64() < spec.drop_rate;
            let polygon = r.polygon.map_points(|p| {
                let dx = rng.uniform(-spec.jitter_px, spec.jitter_px);
                let dy = rng.uniform(-spec.jitter_px, spec.jitter_px);
                Point::new(p.x + dx, p.y + dy)
            });
            let score = (1.0 - spec.score_noise * rng.next_f64()).clamp(0.0, 1.0);
            let spurious = rng.next_f64() < spec.spurious_rate;
            let (bw, bh) = (w * rng.uniform(0.03, 0.12), h * rng.uniform(0.03, 0.12));
            let (bx, by) = (
                rng.uniform(0.0, (w - bw).max(0.0)),
                rng.uniform(0.0, (h - bh).max(0.0)),
            );
            let spurious_score = rng.uniform(0.0, 0.5);

            if !dropped {
                out.push(Detection {
                    image: img.filename.clone(),
                    class: r.class_name().to_string(),
                    score,
                    payload: Payload::Polygon(polygon),
                });
            }
            if spurious && bw > 0.0 && bh > 0.0 {
                out.push(Detection {
                    image: img.filename.clone(),
                    class: r.class_name().to_string(),
                    score: spurious_score,
                    payload: Payload::BBox(BBox::new(bx, by, bx + bw, by + bh)),
                });
            }
        }
    }
    Ok(out)
}
