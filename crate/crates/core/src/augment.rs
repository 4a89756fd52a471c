//! Polygon-preserving augmentation: horizontal flips and affine
//! rotation/shear.
//!
//! Coordinates are screen coordinates (y down). A positive rotation angle is
//! counter-clockwise in math coordinates, which appears clockwise on screen:
//! rotating `(1, 0)` by 90 degrees about the origin gives `(0, 1)`.
//!
//! Only annotation geometry is transformed. Each augmented image gets a 3x3
//! matrix in the transform sidecar so a raster pipeline can warp the pixels
//! identically.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::{clamp_to_canvas, ClampReport, Dataset, ImageRecord, Region};
use crate::error::{Error, Result};
use crate::geometry::{polygon_area, Point, Polygon};
use crate::rng::{derive_seed, SplitMix64};

pub const MAX_ROTATION_DEG: f64 = 45.0;
pub const MAX_SHEAR_DEG: f64 = 16.0;

/// Row-major 3x3 homogeneous transform.
pub type Matrix3 = [[f64; 3]; 3];

pub const IDENTITY: Matrix3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn mat_mul(a: &Matrix3, b: &Matrix3) -> Matrix3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn apply(m: &Matrix3, p: Point) -> Point {
    Point::new(
        m[0][0] * p.x + m[0][1] * p.y + m[0][2],
        m[1][0] * p.x + m[1][1] * p.y + m[1][2],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineParams {
    rotation_deg: f64,
    shear_deg: f64,
    center: (f64, f64),
}

impl AffineParams {
    pub fn new(rotation_deg: f64, shear_deg: f64, center: (f64, f64)) -> Result<Self> {
        if !(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG).contains(&rotation_deg) {
            return Err(Error::InvalidArgument(format!(
                "rotation {rotation_deg} outside [-45, 45] degrees"
            )));
        }
        if !(-MAX_SHEAR_DEG..=MAX_SHEAR_DEG).contains(&shear_deg) {
            return Err(Error::InvalidArgument(format!(
                "shear {shear_deg} outside [-16, 16] degrees"
            )));
        }
        if !center.0.is_finite() || !center.1.is_finite() {
            return Err(Error::InvalidArgument(
                "affine centre must be finite".into(),
            ));
        }
        Ok(Self {
            rotation_deg,
            shear_deg,
            center,
        })
    }

    pub fn rotation_deg(&self) -> f64 {
        self.rotation_deg
    }

    pub fn shear_deg(&self) -> f64 {
        self.shear_deg
    }

    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    /// `T(c) * R(theta) * Sh(phi) * T(-c)` with `Sh = [[1, tan phi], [0, 1]]`.
    pub fn matrix(&self) -> Matrix3 {
        rotation_shear_matrix(self.rotation_deg, self.shear_deg, self.center)
    }
}

/// Rotation/shear about a centre without range checks; [`AffineParams`]
/// enforces the augmentation ranges.
pub fn rotation_shear_matrix(rotation_deg: f64, shear_deg: f64, center: (f64, f64)) -> Matrix3 {
    let (s, c) = rotation_deg.to_radians().sin_cos();
    let t = shear_deg.to_radians().tan();
    // R * Sh
    let m = [[c, c * t - s], [s, s * t + c]];
    let (cx, cy) = center;
    [
        [m[0][0], m[0][1], cx - m[0][0] * cx - m[0][1] * cy],
        [m[1][0], m[1][1], cy - m[1][0] * cx - m[1][1] * cy],
        [0.0, 0.0, 1.0],
    ]
}

pub fn fliplr_matrix(image_width: f64) -> Matrix3 {
    [[-1.0, 0.0, image_width], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

/// Mirrors horizontally with `x -> width - x`; vertex order is kept.
pub fn fliplr_polygon(p: &Polygon, image_width: f64) -> Polygon {
    p.map_points(|q| Point::new(image_width - q.x, q.y))
}

pub fn affine_polygon(p: &Polygon, a: &AffineParams) -> Polygon {
    transform_polygon(p, &a.matrix())
}

pub fn transform_polygon(p: &Polygon, m: &Matrix3) -> Polygon {
    p.map_points(|q| apply(m, q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum AugOp {
    Fliplr,
    Affine(AffineParams),
}

impl AugOp {
    pub fn matrix(&self, image_width: f64) -> Matrix3 {
        match self {
            AugOp::Fliplr => fliplr_matrix(image_width),
            AugOp::Affine(a) => a.matrix(),
        }
    }

    fn descriptor(&self) -> String {
        match self {
            AugOp::Fliplr => "fliplr".to_string(),
            AugOp::Affine(a) => format!("rot{:+.3}_shear{:+.3}", a.rotation_deg, a.shear_deg),
        }
    }
}

/// Sampling ranges. Limits must lie within the module-wide maxima.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentRanges {
    pub max_rotation_deg: f64,
    pub max_shear_deg: f64,
    pub flip_probability: f64,
}

impl Default for AugmentRanges {
    fn default() -> Self {
        Self {
            max_rotation_deg: MAX_ROTATION_DEG,
            max_shear_deg: MAX_SHEAR_DEG,
            flip_probability: 0.5,
        }
    }
}

impl AugmentRanges {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=MAX_ROTATION_DEG).contains(&self.max_rotation_deg)
            || !(0.0..=MAX_SHEAR_DEG).contains(&self.max_shear_deg)
            || !(0.0..=1.0).contains(&self.flip_probability)
        {
            return Err(Error::InvalidArgument(format!(
                "augmentation ranges out of bounds: rotation <= 45, shear <= 16, flip probability in [0, 1]; got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannedItem {
    pub source: usize,
    pub copy: usize,
    /// Applied in order: flip (if any) first, then affine.
    pub ops: Vec<AugOp>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AugmentPlan {
    pub seed: u64,
    pub copies: usize,
    /// Filenames the plan was built for, in dataset order.
    pub sources: Vec<String>,
    pub items: Vec<PlannedItem>,
}

/// For each image and copy: flip with `flip_probability`, and always an
/// affine warp with rotation and shear drawn uniformly from their ranges,
/// centred on the image. Each image draws from its own stream seeded by
/// `(seed, filename, copy)`.
pub fn plan_augmentation(
    d: &Dataset,
    seed: u64,
    copies: usize,
    ranges: &AugmentRanges,
) -> Result<AugmentPlan> {
    if copies == 0 {
        return Err(Error::InvalidArgument("copies must be at least 1".into()));
    }
    ranges.validate()?;
    let mut items = Vec::with_capacity(d.len() * copies);
    for (source, img) in d.images.iter().enumerate() {
        for copy in 0..copies {
            let mut rng = SplitMix64::new(derive_seed(seed, &format!("{}#{copy}", img.filename)));
            let flip = rng.next_f64() < ranges.flip_probability;
            let rot = rng.uniform(-ranges.max_rotation_deg, ranges.max_rotation_deg);
            let shear = rng.uniform(-ranges.max_shear_deg, ranges.max_shear_deg);
            let center = (img.width as f64 / 2.0, img.height as f64 / 2.0);
            let mut ops = Vec::with_capacity(2);
            if flip {
                ops.push(AugOp::Fliplr);
            }
            ops.push(AugOp::Affine(AffineParams::new(rot, shear, center)?));
            items.push(PlannedItem { source, copy, ops });
        }
    }
    Ok(AugmentPlan {
        seed,
        copies,
        sources: d.images.iter().map(|i| i.filename.clone()).collect(),
        items,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformRecord {
    pub filename: String,
    pub source: String,
    pub op: String,
    pub matrix: Matrix3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentOutput {
    pub dataset: Dataset,
    pub transforms: Vec<TransformRecord>,
    pub clamp: ClampReport,
    /// Regions whose clamped polygon fell below 1 px^2 and were dropped.
    pub dropped_regions: Vec<(String, usize)>,
}

fn renamed(filename: &str, copy: usize, ops: &[AugOp]) -> (String, String) {
    let desc = if ops.is_empty() {
        "id".to_string()
    } else {
        ops.iter()
            .map(AugOp::descriptor)
            .collect::<Vec<_>>()
            .join("_")
    };
    let (stem, ext) = match filename.rfind('.') {
        Some(i) if i > 0 => (&filename[..i], &filename[i..]),
        _ => (filename, ""),
    };
    (format!("{stem}.aug{copy}_{desc}{ext}"), desc)
}

/// Applies a plan, producing renamed images with transformed and clamped
/// polygons plus the per-image transform sidecar.
pub fn apply_plan(d: &Dataset, plan: &AugmentPlan) -> Result<AugmentOutput> {
    if plan.sources.len() != d.len()
        || plan
            .sources
            .iter()
            .zip(&d.images)
            .any(|(s, i)| *s != i.filename)
    {
        return Err(Error::PlanMismatch(format!(
            "plan covers {} images, dataset has {}",
            plan.sources.len(),
            d.len()
        )));
    }
    if let Some(bad) = plan.items.iter().find(|it| it.source >= d.len()) {
        return Err(Error::PlanMismatch(format!(
            "item references image {}",
            bad.source
        )));
    }
    if let Some(img) = d.images.iter().find(|i| !i.is_resolved()) {
        return Err(Error::UnresolvedDimensions(img.filename.clone()));
    }

    let produced: Vec<(ImageRecord, TransformRecord)> = plan
        .items
        .par_iter()
        .map(|item| {
            let src = &d.images[item.source];
            let m = item.ops.iter().fold(IDENTITY, |acc, op| {
                mat_mul(&op.matrix(src.width as f64), &acc)
            });
            let (name, desc) = renamed(&src.filename, item.copy, &item.ops);
            let mut img = src.clone();
            img.filename = name.clone();
            img.regions = src
                .regions
                .iter()
                .map(|r| Region {
                    polygon: transform_polygon(&r.polygon, &m),
                    attributes: r.attributes.clone(),
                })
                .collect();
            let rec = TransformRecord {
                filename: name,
                source: src.filename.clone(),
                op: desc,
                matrix: m,
            };
            (img, rec)
        })
        .collect();

    let (images, transforms): (Vec<_>, Vec<_>) = produced.into_iter().unzip();
    let mut dataset = Dataset {
        images,
        class_names: d.class_names.clone(),
    };
    let clamp = clamp_to_canvas(&mut dataset);
    let mut dropped_regions = Vec::new();
    for img in &mut dataset.images {
        let mut idx = 0;
        img.regions.retain(|r| {
            let keep = polygon_area(&r.polygon) >= 1.0;
            if !keep {
                dropped_regions.push((img.filename.clone(), idx));
            }
            idx += 1;
            keep
        });
    }
    Ok(AugmentOutput {
        dataset,
        transforms,
        clamp,
        dropped_regions,
    })
}
