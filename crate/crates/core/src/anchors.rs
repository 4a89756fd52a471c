//! Region-proposal primitives: anchor grids, foreground/background labels,
//! delta refinement and greedy non-maximum suppression.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{bbox_iou, decode_delta, BBox, BoxDelta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig {
    /// Anchor side length in image pixels for ratio 1.
    pub scales: Vec<f64>,
    /// Width / height.
    pub ratios: Vec<f64>,
    /// Feature-map cell size in image pixels.
    pub stride: u32,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self {
            scales: vec![64.0, 128.0, 256.0],
            ratios: vec![0.5, 1.0, 2.0],
            stride: 32,
        }
    }
}

impl AnchorConfig {
    /// Anchors per feature-map cell.
    pub fn k(&self) -> usize {
        self.scales.len() * self.ratios.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() || self.ratios.is_empty() {
            return Err(Error::InvalidArgument(
                "anchor scales and ratios must be non-empty".into(),
            ));
        }
        if self
            .scales
            .iter()
            .chain(&self.ratios)
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(Error::InvalidArgument(
                "anchor scales and ratios must be positive".into(),
            ));
        }
        if self.stride == 0 {
            return Err(Error::InvalidArgument(
                "anchor stride must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `fmap_w * fmap_h * k` unclipped anchors. Order: row, column, scale, ratio.
/// Each is centred on its cell centre in image pixels with
/// `w = scale * sqrt(ratio)` and `h = scale / sqrt(ratio)`.
pub fn generate_anchors(cfg: &AnchorConfig, fmap_w: usize, fmap_h: usize) -> Result<Vec<BBox>> {
    cfg.validate()?;
    let stride = cfg.stride as f64;
    let mut out = Vec::with_capacity(fmap_w * fmap_h * cfg.k());
    for y in 0..fmap_h {
        let cy = (y as f64 + 0.5) * stride;
        for x in 0..fmap_w {
            let cx = (x as f64 + 0.5) * stride;
            for &s in &cfg.scales {
                for &r in &cfg.ratios {
                    let sr = r.sqrt();
                    out.push(BBox::from_center(cx, cy, s * sr, s / sr));
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "label", content = "gt", rename_all = "lowercase")]
pub enum AnchorLabel {
    Foreground(usize),
    Background,
    Ignore,
}

impl AnchorLabel {
    pub fn name(&self) -> &'static str {
        match self {
            AnchorLabel::Foreground(_) => "foreground",
            AnchorLabel::Background => "background",
            AnchorLabel::Ignore => "ignore",
        }
    }
}

/// Labels each anchor by its best IoU with any ground-truth box:
/// foreground at `>= pos_iou`, background below `neg_iou`, ignore between.
/// In addition, the highest-IoU anchor of every ground truth with non-zero
/// overlap is foreground, so no object is left without a positive.
/// Returns the labels and each anchor's best IoU.
pub fn assign_anchors(
    anchors: &[BBox],
    gt_boxes: &[BBox],
    pos_iou: f64,
    neg_iou: f64,
) -> Result<(Vec<AnchorLabel>, Vec<f64>)> {
    if !(0.0 <= neg_iou && neg_iou < pos_iou && pos_iou <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= neg_iou < pos_iou <= 1, got {neg_iou} / {pos_iou}"
        )));
    }
    let mut best = vec![(0.0f64, None::<usize>); anchors.len()];
    let mut gt_best = vec![(0.0f64, None::<usize>); gt_boxes.len()];
    for (ai, a) in anchors.iter().enumerate() {
        for (gi, g) in gt_boxes.iter().enumerate() {
            let iou = bbox_iou(a, g);
            if iou > best[ai].0 {
                best[ai] = (iou, Some(gi));
            }
            if iou > gt_best[gi].0 {
                gt_best[gi] = (iou, Some(ai));
            }
        }
    }
    let mut labels: Vec<AnchorLabel> = best
        .iter()
        .map(|&(iou, gi)| match gi {
            Some(g) if iou >= pos_iou => AnchorLabel::Foreground(g),
            _ if iou < neg_iou => AnchorLabel::Background,
            _ => AnchorLabel::Ignore,
        })
        .collect();
    for &(_, ai) in &gt_best {
        if let Some(ai) = ai {
            let g = best[ai].1.expect("argmax anchor overlaps some gt");
            labels[ai] = AnchorLabel::Foreground(g);
        }
    }
    Ok((labels, best.iter().map(|b| b.0).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Proposal {
    pub bbox: BBox,
    pub score: f64,
}

/// Indices sorted by descending score; equal scores keep input order.
fn rank_by_score(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Greedy NMS. Returns kept indices in keep order (descending score). A box
/// is suppressed iff its IoU with an already-kept box is strictly greater
/// than `iou_threshold`.
pub fn nms(proposals: &[Proposal], iou_threshold: f64) -> Vec<usize> {
    let scores: Vec<f64> = proposals.iter().map(|p| p.score).collect();
    let mut kept: Vec<usize> = Vec::new();
    for i in rank_by_score(&scores) {
        let b = &proposals[i].bbox;
        if kept
            .iter()
            .all(|&k| bbox_iou(&proposals[k].bbox, b) <= iou_threshold)
        {
            kept.push(i);
        }
    }
    kept
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectParams {
    pub image_w: f64,
    pub image_h: f64,
    pub pre_nms_top_n: usize,
    pub nms_threshold: f64,
    pub post_nms_top_n: usize,
}

/// Decodes deltas, clips to the image, keeps the `pre_nms_top_n` best by
/// score, applies NMS and truncates to `post_nms_top_n`.
pub fn refine_and_select(
    anchors: &[BBox],
    deltas: &[BoxDelta],
    scores: &[f64],
    p: &SelectParams,
) -> Result<Vec<Proposal>> {
    if anchors.len() != deltas.len() || anchors.len() != scores.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} anchors, {} deltas, {} scores",
            anchors.len(),
            deltas.len(),
            scores.len()
        )));
    }
    let mut ranked = rank_by_score(scores);
    ranked.truncate(p.pre_nms_top_n);
    let candidates = ranked
        .iter()
        .map(|&i| {
            Ok(Proposal {
                bbox: decode_delta(&anchors[i], &deltas[i])?.clip(p.image_w, p.image_h),
                score: scores[i],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(nms(&candidates, p.nms_threshold)
        .into_iter()
        .take(p.post_nms_top_n)
        .map(|i| candidates[i])
        .collect())
}

/// `x1,y1,x2,y2,score,label` rows for inspection.
pub fn anchors_csv(anchors: &[BBox], scores: &[f64], labels: Option<&[AnchorLabel]>) -> String {
    let mut s = String::from("x1,y1,x2,y2,score,label\n");
    for (i, a) in anchors.iter().enumerate() {
        let label = labels.map(|l| l[i].name()).unwrap_or("none");
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            a.x1,
            a.y1,
            a.x2,
            a.y2,
            scores.get(i).copied().unwrap_or(0.0),
            label
        ));
    }
    s
}
