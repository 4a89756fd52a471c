//! Deterministic synthetic facade datasets for tests, benchmarks and demos.
//!
//! Each image is a grid of quadrilateral "windows" with jittered corners, so
//! the data looks like hand-traced facade annotations but is fully
//! reproducible from a seed.

use crate::annotation::{Dataset, ImageRecord, Region};
use crate::geometry::{Point, Polygon};
use crate::rng::{derive_seed, SplitMix64};

/// Windows per image in the reference dataset: 60 images with 15 windows and
/// 40 with 16, i.e. 1540 windows over 100 images.
pub fn reference_counts(i: usize) -> usize {
    if i % 5 < 2 {
        16
    } else {
        15
    }
}

/// 100 images at 1024x1024 carrying 1540 windows (mean 15.4 per image).
pub fn reference_dataset() -> Dataset {
    facade_dataset(100, reference_counts, 1024, 1024, 0)
}

/// Builds `n` images named `facade_000.jpg`, ... with `count(i)` windows each
/// laid out on a 4-column grid inside a `width x height` canvas.
pub fn facade_dataset(
    n: usize,
    count: impl Fn(usize) -> usize,
    width: u32,
    height: u32,
    seed: u64,
) -> Dataset {
    let images = (0..n)
        .map(|i| {
            let name = format!("facade_{i:03}.jpg");
            let mut rng = SplitMix64::new(derive_seed(seed, &name));
            let mut img = ImageRecord::new(name, 100_000 + i as u64 * 137);
            img.width = width;
            img.height = height;
            let k = count(i);
            let cols = 4usize;
            let rows = k.div_ceil(cols).max(1);
            let (cw, ch) = (width as f64 / cols as f64, height as f64 / rows as f64);
            for w in 0..k {
                let (c, r) = ((w % cols) as f64, (w / cols) as f64);
                let ww = cw * rng.uniform(0.45, 0.7);
                let wh = ch * rng.uniform(0.45, 0.7);
                let x0 = c * cw + rng.uniform(0.05, 0.95 - ww / cw) * cw;
                let y0 = r * ch + rng.uniform(0.05, 0.95 - wh / ch) * ch;
                let mut j = || rng.uniform(-2.0, 2.0);
                let pts = vec![
                    Point::new(x0 + j(), y0 + j()),
                    Point::new(x0 + ww + j(), y0 + j()),
                    Point::new(x0 + ww + j(), y0 + wh + j()),
                    Point::new(x0 + j(), y0 + wh + j()),
                ];
                let pts = pts
                    .into_iter()
                    .map(|p| Point::new(round2(p.x), round2(p.y)))
                    .collect();
                img.regions.push(Region::new(
                    Polygon::new(pts).expect("four finite vertices"),
                ));
            }
            img
        })
        .collect();
    Dataset::new(images)
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// `filename,width,height` CSV for a dataset with resolved dimensions.
pub fn dimension_manifest(d: &Dataset) -> String {
    let mut s = String::from("filename,width,height\n");
    for img in &d.images {
        s.push_str(&format!("{},{},{}\n", img.filename, img.width, img.height));
    }
    s
}
