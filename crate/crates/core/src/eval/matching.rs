use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{average_precision_with, f1, pr_curve, precision_recall, MatchCounts};
use super::{ApMode, Detection, EvalConfig, IouKind, Payload};
use crate::annotation::{Dataset, ImageRecord};
use crate::error::{Error, Result};
use crate::geometry::{bbox_iou, polygon_bbox, rasterize, BBox, BitMask, Polygon};

struct Shape {
    bbox: BBox,
    mask: BitMask,
    count: usize,
}

impl Shape {
    fn from_polygon(p: &Polygon, w: usize, h: usize) -> Self {
        let mask = rasterize(p, w, h);
        let count = mask.count();
        Self {
            bbox: polygon_bbox(p),
            mask,
            count,
        }
    }

    fn from_payload(d: &Detection, w: usize, h: usize) -> Result<Self> {
        match &d.payload {
            Payload::Polygon(p) => Ok(Self::from_polygon(p, w, h)),
            Payload::BBox(b) => Ok(Self::from_polygon(&Polygon::from_bbox(b), w, h)),
            Payload::Mask(m) => {
                if m.width() != w || m.height() != h {
                    return Err(Error::DimensionMismatch(format!(
                        "mask for {} is {}x{}, image is {w}x{h}",
                        d.image,
                        m.width(),
                        m.height()
                    )));
                }
                Ok(Self {
                    bbox: m.bbox().unwrap_or(BBox::new(0.0, 0.0, 0.0, 0.0)),
                    count: m.count(),
                    mask: m.clone(),
                })
            }
            Payload::MaskFile(p) => Err(Error::InvalidArgument(format!(
                "mask payload {} was not loaded",
                p.display()
            ))),
        }
    }
}

fn mask_pair_iou(a: &Shape, b: &Shape) -> f64 {
    if a.count == 0 || b.count == 0 {
        return 0.0;
    }
    let (x1, x2) = (a.bbox.x1.max(b.bbox.x1), a.bbox.x2.min(b.bbox.x2));
    let (y1, y2) = (a.bbox.y1.max(b.bbox.y1), a.bbox.y2.min(b.bbox.y2));
    if x1 > x2 || y1 > y2 {
        return 0.0;
    }
    let r0 = y1.floor().max(0.0) as usize;
    let r1 = (y2.ceil().max(0.0) as usize).saturating_add(1);
    let inter = a.mask.and_count_rows(&b.mask, r0, r1);
    let union = a.count + b.count - inter;
    inter as f64 / union as f64
}

#[derive(Debug, Clone)]
struct PreparedDet {
    index: usize,
    class: String,
    score: f64,
}

#[derive(Debug, Clone)]
struct PreparedImage {
    filename: String,
    gt_classes: Vec<String>,
    /// In input order.
    dets: Vec<PreparedDet>,
    /// `iou[d][g]`
    iou: Vec<Vec<f64>>,
    /// `(score, new gt pixels, new non-gt pixels)` by descending score; each
    /// predicted pixel is credited to the highest-scoring detection covering it.
    coverage: Vec<(f64, usize, usize)>,
    gt_pixels: usize,
}

/// Rasterised, threshold-independent evaluation state.
#[derive(Debug, Clone)]
pub struct PreparedEval {
    images: Vec<PreparedImage>,
    iou_kind: IouKind,
}

fn prepare_image(
    img: &ImageRecord,
    dets: &[(usize, &Detection)],
    kind: IouKind,
) -> Result<PreparedImage> {
    if !img.is_resolved() {
        return Err(Error::UnresolvedDimensions(img.filename.clone()));
    }
    let (w, h) = (img.width as usize, img.height as usize);
    let gts: Vec<Shape> = img
        .regions
        .iter()
        .map(|r| Shape::from_polygon(&r.polygon, w, h))
        .collect();
    let shapes = dets
        .iter()
        .map(|(_, d)| Shape::from_payload(d, w, h))
        .collect::<Result<Vec<_>>>()?;

    let iou = shapes
        .iter()
        .map(|s| {
            gts.iter()
                .map(|g| match kind {
                    IouKind::Mask => mask_pair_iou(s, g),
                    IouKind::Box => bbox_iou(&s.bbox, &g.bbox),
                })
                .collect()
        })
        .collect();

    let mut gt_union = BitMask::new(w, h);
    for g in &gts {
        gt_union.union_with(&g.mask)?;
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].1.score.total_cmp(&dets[a].1.score));
    let mut covered = BitMask::new(w, h);
    let coverage = order
        .iter()
        .map(|&i| {
            let (inside, outside) = covered.absorb(&shapes[i].mask, &gt_union);
            (dets[i].1.score, inside, outside)
        })
        .collect();

    Ok(PreparedImage {
        filename: img.filename.clone(),
        gt_classes: img
            .regions
            .iter()
            .map(|r| r.class_name().to_string())
            .collect(),
        dets: dets
            .iter()
            .map(|&(index, d)| PreparedDet {
                index,
                class: d.class.clone(),
                score: d.score,
            })
            .collect(),
        iou,
        coverage,
        gt_pixels: gt_union.count(),
    })
}

/// Outcome for one detection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionMatch {
    pub image: String,
    /// Index into the prediction list given to the evaluator.
    pub detection: usize,
    pub score: f64,
    pub tp: bool,
    /// Matched ground-truth region index, for true positives.
    pub gt: Option<usize>,
    /// IoU with the matched region, or the best same-class IoU otherwise.
    pub iou: f64,
}

/// Matching result for one image at fixed thresholds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageMatch {
    pub image: String,
    pub n_gt: usize,
    pub counts: MatchCounts,
    /// Detections in rank order (descending score, ties by input order).
    pub matches: Vec<DetectionMatch>,
}

impl ImageMatch {
    pub fn flags(&self) -> Vec<bool> {
        self.matches.iter().map(|m| m.tp).collect()
    }
}

impl PreparedImage {
    fn match_at(&self, score_threshold: f64, iou_threshold: f64) -> ImageMatch {
        let mut order: Vec<usize> = (0..self.dets.len())
            .filter(|&i| self.dets[i].score >= score_threshold)
            .collect();
        order.sort_by(|&a, &b| self.dets[b].score.total_cmp(&self.dets[a].score));
        let mut taken = vec![false; self.gt_classes.len()];
        let mut counts = MatchCounts::default();
        let mut matches = Vec::with_capacity(order.len());
        for di in order {
            let det = &self.dets[di];
            let mut best: Option<(usize, f64)> = None;
            let mut best_any = 0.0f64;
            for (gi, class) in self.gt_classes.iter().enumerate() {
                if *class != det.class {
                    continue;
                }
                let v = self.iou[di][gi];
                best_any = best_any.max(v);
                if !taken[gi] && best.is_none_or(|(_, b)| v > b) {
                    best = Some((gi, v));
                }
            }
            let hit = best.filter(|&(_, v)| v >= iou_threshold);
            if let Some((gi, _)) = hit {
                taken[gi] = true;
                counts.tp += 1;
            } else {
                counts.fp += 1;
            }
            matches.push(DetectionMatch {
                image: self.filename.clone(),
                detection: det.index,
                score: det.score,
                tp: hit.is_some(),
                gt: hit.map(|(g, _)| g),
                iou: hit.map_or(best_any, |(_, v)| v),
            });
        }
        counts.fn_ = self.gt_classes.len() - counts.tp;
        ImageMatch {
            image: self.filename.clone(),
            n_gt: self.gt_classes.len(),
            counts,
            matches,
        }
    }

    /// `(intersection, predicted)` pixel counts for detections at or above
    /// the score threshold.
    fn pixels_at(&self, score_threshold: f64) -> (usize, usize) {
        self.coverage
            .iter()
            .take_while(|c| c.0 >= score_threshold)
            .fold((0, 0), |(i, p), c| (i + c.1, p + c.1 + c.2))
    }
}

/// Pixel accuracy of the window class. `micro` is the pinned definition:
/// correctly covered ground-truth pixels over all ground-truth pixels, pooled
/// over images. `macro` averages the per-image ratio; `symmetric` is the
/// pooled intersection over union. Each is `None` when undefined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PixelAccuracy {
    pub micro: Option<f64>,
    #[serde(rename = "macro")]
    pub macro_: Option<f64>,
    pub symmetric: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageRow {
    pub image: String,
    pub n_gt: usize,
    pub n_pred: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    /// `None` when the image has neither ground truth nor detections.
    pub ap: Option<f64>,
    pub pixel_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub n_images: usize,
    pub n_gt: usize,
    pub n_predictions: usize,
    pub counts: MatchCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// mAP at IoU 0.5 in the configured AP mode.
    pub ap50: f64,
    /// mAP at the configured IoU threshold and AP mode.
    pub map: f64,
    pub map_per_image_mean: f64,
    pub map_dataset_wide: f64,
    pub pixel_accuracy: PixelAccuracy,
    pub per_image: Vec<ImageRow>,
    pub detections: Vec<DetectionMatch>,
}

impl EvalReport {
    /// Flat per-image CSV.
    pub fn per_image_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::from("image,n_gt,n_pred,tp,fp,fn,precision,recall,ap,pixel_accuracy\n");
        for r in &self.per_image {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.image,
                r.n_gt,
                r.n_pred,
                r.tp,
                r.fp,
                r.fn_,
                r.precision,
                r.recall,
                opt(r.ap),
                opt(r.pixel_accuracy)
            ));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub map: f64,
    pub n_predictions: usize,
}

fn image_ap(m: &ImageMatch, cfg: &EvalConfig) -> Option<f64> {
    if m.n_gt == 0 && m.matches.is_empty() {
        return None;
    }
    Some(average_precision_with(
        &pr_curve(&m.flags(), m.n_gt),
        cfg.interpolation,
    ))
}

fn mean_ap(per_image: &[Option<f64>]) -> f64 {
    let defined: Vec<f64> = per_image.iter().flatten().copied().collect();
    if defined.is_empty() {
        0.0
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    }
}

fn pooled_ap(matches: &[ImageMatch], cfg: &EvalConfig) -> f64 {
    let mut pooled: Vec<(f64, bool)> = matches
        .iter()
        .flat_map(|m| m.matches.iter().map(|d| (d.score, d.tp)))
        .collect();
    // Stable: ties keep image order, then rank within the image.
    pooled.sort_by(|a, b| b.0.total_cmp(&a.0));
    let flags: Vec<bool> = pooled.iter().map(|p| p.1).collect();
    let n_gt = matches.iter().map(|m| m.n_gt).sum();
    average_precision_with(&pr_curve(&flags, n_gt), cfg.interpolation)
}

impl PreparedEval {
    pub fn new(preds: &[Detection], dataset: &Dataset, iou_kind: IouKind) -> Result<Self> {
        let mut by_image: HashMap<&str, Vec<(usize, &Detection)>> = HashMap::new();
        for (i, d) in preds.iter().enumerate() {
            by_image.entry(d.image.as_str()).or_default().push((i, d));
        }
        let mut unknown: Vec<String> = by_image
            .keys()
            .filter(|k| dataset.find(k).is_none())
            .map(|k| k.to_string())
            .collect();
        if !unknown.is_empty() {
            unknown.sort();
            return Err(Error::UnknownImages(unknown));
        }
        let images = dataset
            .images
            .par_iter()
            .map(|img| {
                let dets = by_image
                    .get(img.filename.as_str())
                    .map(Vec::as_slice)
                    .unwrap_or(&[]);
                prepare_image(img, dets, iou_kind)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { images, iou_kind })
    }

    pub fn iou_kind(&self) -> IouKind {
        self.iou_kind
    }

    pub fn match_all(&self, score_threshold: f64, iou_threshold: f64) -> Vec<ImageMatch> {
        self.images
            .iter()
            .map(|img| img.match_at(score_threshold, iou_threshold))
            .collect()
    }

    fn map_for(&self, matches: &[ImageMatch], cfg: &EvalConfig) -> (f64, f64, Vec<Option<f64>>) {
        let per_image: Vec<Option<f64>> = matches.iter().map(|m| image_ap(m, cfg)).collect();
        (mean_ap(&per_image), pooled_ap(matches, cfg), per_image)
    }

    pub fn pixel_accuracy(&self, score_threshold: f64) -> (PixelAccuracy, Vec<Option<f64>>) {
        let (mut inter, mut gt, mut union) = (0usize, 0usize, 0usize);
        let mut per_image = Vec::with_capacity(self.images.len());
        for img in &self.images {
            let (i, p) = img.pixels_at(score_threshold);
            inter += i;
            gt += img.gt_pixels;
            union += p + img.gt_pixels - i;
            per_image.push((img.gt_pixels > 0).then(|| i as f64 / img.gt_pixels as f64));
        }
        let defined: Vec<f64> = per_image.iter().flatten().copied().collect();
        let acc = PixelAccuracy {
            micro: (gt > 0).then(|| inter as f64 / gt as f64),
            macro_: (!defined.is_empty())
                .then(|| defined.iter().sum::<f64>() / defined.len() as f64),
            symmetric: (union > 0).then(|| inter as f64 / union as f64),
        };
        (acc, per_image)
    }

    pub fn report(&self, cfg: &EvalConfig) -> Result<EvalReport> {
        cfg.validate()?;
        let matches = self.match_all(cfg.score_threshold, cfg.iou_threshold);
        let (per_image_mean, dataset_wide, per_image_ap) = self.map_for(&matches, cfg);
        let select = |a: f64, b: f64| match cfg.ap_mode {
            ApMode::PerImageMean => a,
            ApMode::DatasetWide => b,
        };
        let map = select(per_image_mean, dataset_wide);
        let ap50 = if cfg.iou_threshold == 0.5 {
            map
        } else {
            let (a, b, _) = self.map_for(&self.match_all(cfg.score_threshold, 0.5), cfg);
            select(a, b)
        };

        let mut counts = MatchCounts::default();
        for m in &matches {
            counts.add(&m.counts);
        }
        let (precision, recall) = precision_recall(&counts);
        let (pixel_accuracy, per_image_px) = self.pixel_accuracy(cfg.score_threshold);

        let per_image = matches
            .iter()
            .zip(per_image_ap)
            .zip(per_image_px)
            .map(|((m, ap), px)| {
                let (p, r) = precision_recall(&m.counts);
                ImageRow {
                    image: m.image.clone(),
                    n_gt: m.n_gt,
                    n_pred: m.matches.len(),
                    tp: m.counts.tp,
                    fp: m.counts.fp,
                    fn_: m.counts.fn_,
                    precision: p,
                    recall: r,
                    ap,
                    pixel_accuracy: px,
                }
            })
            .collect();

        Ok(EvalReport {
            config: *cfg,
            n_images: self.images.len(),
            n_gt: matches.iter().map(|m| m.n_gt).sum(),
            n_predictions: matches.iter().map(|m| m.matches.len()).sum(),
            counts,
            precision,
            recall,
            f1: f1(precision, recall),
            ap50,
            map,
            map_per_image_mean: per_image_mean,
            map_dataset_wide: dataset_wide,
            pixel_accuracy,
            per_image,
            detections: matches.into_iter().flat_map(|m| m.matches).collect(),
        })
    }
}

/// Matches detections of a single image against its regions.
pub fn match_detections(
    preds: &[Detection],
    image: &ImageRecord,
    cfg: &EvalConfig,
) -> Result<ImageMatch> {
    cfg.validate()?;
    if let Some(d) = preds.iter().find(|d| d.image != image.filename) {
        return Err(Error::InvalidArgument(format!(
            "detection refers to {} while matching {}",
            d.image, image.filename
        )));
    }
    let prepared = PreparedEval::new(preds, &Dataset::new(vec![image.clone()]), cfg.iou_kind)?;
    Ok(prepared.images[0].match_at(cfg.score_threshold, cfg.iou_threshold))
}

pub fn evaluate(preds: &[Detection], dataset: &Dataset, cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    PreparedEval::new(preds, dataset, cfg.iou_kind)?.report(cfg)
}

/// Pixel accuracy of detections at or above `score_threshold`.
pub fn pixel_accuracy(
    preds: &[Detection],
    dataset: &Dataset,
    score_threshold: f64,
) -> Result<PixelAccuracy> {
    Ok(PreparedEval::new(preds, dataset, IouKind::Box)?
        .pixel_accuracy(score_threshold)
        .0)
}

/// One evaluation per score threshold; everything else from `cfg`.
pub fn sweep_confidence(
    preds: &[Detection],
    dataset: &Dataset,
    cfg: &EvalConfig,
    thresholds: &[f64],
) -> Result<Vec<SweepRow>> {
    if let Some(t) = thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidArgument(format!(
            "threshold {t} outside [0, 1]"
        )));
    }
    let prepared = PreparedEval::new(preds, dataset, cfg.iou_kind)?;
    thresholds
        .iter()
        .map(|&t| {
            let r = prepared.report(&EvalConfig {
                score_threshold: t,
                ..*cfg
            })?;
            Ok(SweepRow {
                threshold: t,
                precision: r.precision,
                recall: r.recall,
                f1: r.f1,
                map: r.map,
                n_predictions: r.n_predictions,
            })
        })
        .collect()
}
