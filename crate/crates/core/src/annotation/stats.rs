use std::collections::BTreeMap;

use serde::Serialize;

use super::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub n_images: usize,
    pub n_instances: usize,
    /// `n_instances / n_images`, or 0 for an empty dataset.
    pub mean_instances_per_image: f64,
    /// instances-per-image -> number of images with that count
    pub histogram: BTreeMap<usize, usize>,
}

pub fn stats(d: &Dataset) -> DatasetStats {
    let mut histogram = BTreeMap::new();
    for img in &d.images {
        *histogram.entry(img.regions.len()).or_insert(0) += 1;
    }
    let n_instances = d.n_instances();
    DatasetStats {
        n_images: d.len(),
        n_instances,
        mean_instances_per_image: if d.is_empty() {
            0.0
        } else {
            n_instances as f64 / d.len() as f64
        },
        histogram,
    }
}
