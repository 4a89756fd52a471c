//! VIA polygon annotations: data model, parsing/writing, dimension
//! discovery, dataset splits and summary statistics.

mod dims;
mod split;
mod stats;
mod via;

use std::collections::{BTreeMap, HashSet};

use crate::geometry::Polygon;

pub use dims::{
    clamp_to_canvas, read_dimension_manifest, resolve_dimensions, resolve_dimensions_from_manifest,
    sniff_dimensions, ClampReport,
};
pub use split::{kfold, split, split_indices, Fold, FoldSet};
pub use stats::{stats, DatasetStats};
pub use via::{parse_via, write_via};

/// Class assigned to regions that carry no explicit `class` attribute.
pub const DEFAULT_CLASS: &str = "window";

/// Region attribute key that holds the class label.
pub const CLASS_ATTRIBUTE: &str = "class";

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub polygon: Polygon,
    pub attributes: BTreeMap<String, String>,
}

impl Region {
    pub fn new(polygon: Polygon) -> Self {
        Self {
            polygon,
            attributes: BTreeMap::new(),
        }
    }

    pub fn class_name(&self) -> &str {
        self.attributes
            .get(CLASS_ATTRIBUTE)
            .map(String::as_str)
            .unwrap_or(DEFAULT_CLASS)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub filename: String,
    pub file_size: u64,
    /// Pixel width; 0 until resolved.
    pub width: u32,
    /// Pixel height; 0 until resolved.
    pub height: u32,
    pub regions: Vec<Region>,
    pub file_attributes: BTreeMap<String, String>,
}

impl ImageRecord {
    pub fn new(filename: impl Into<String>, file_size: u64) -> Self {
        Self {
            filename: filename.into(),
            file_size,
            width: 0,
            height: 0,
            regions: Vec::new(),
            file_attributes: BTreeMap::new(),
        }
    }

    pub fn is_resolved(&self) -> bool {
        self.width > 0 && self.height > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Vec<ImageRecord>,
    pub class_names: Vec<String>,
}

impl Default for Dataset {
    fn default() -> Self {
        Self {
            images: Vec::new(),
            class_names: vec![DEFAULT_CLASS.to_string()],
        }
    }
}

impl Dataset {
    pub fn new(images: Vec<ImageRecord>) -> Self {
        Self {
            images,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn n_instances(&self) -> usize {
        self.images.iter().map(|i| i.regions.len()).sum()
    }

    pub fn find(&self, filename: &str) -> Option<&ImageRecord> {
        self.images.iter().find(|i| i.filename == filename)
    }

    /// Sub-dataset with the images at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Every invariant violation, one message each. Vertex bounds are only
    /// checked for images with resolved dimensions.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for img in &self.images {
            if !seen.insert(img.filename.as_str()) {
                out.push(format!("duplicate filename {}", img.filename));
            }
            if !img.is_resolved() {
                continue;
            }
            let (w, h) = (img.width as f64, img.height as f64);
            for (ri, r) in img.regions.iter().enumerate() {
                let outside = r
                    .polygon
                    .points()
                    .iter()
                    .filter(|p| p.x < 0.0 || p.y < 0.0 || p.x > w || p.y > h)
                    .count();
                if outside > 0 {
                    out.push(format!(
                        "{} region {ri}: {outside} vertices outside the {}x{} canvas",
                        img.filename, img.width, img.height
                    ));
                }
            }
        }
        out
    }
}
