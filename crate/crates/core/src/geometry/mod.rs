//! Polygon, box and mask primitives.
//!
//! Coordinates are continuous pixel coordinates with y growing downward.
//! Boxes use the corner convention `(x1, y1, x2, y2)` with area
//! `(x2 - x1) * (y2 - y1)`; there is no `+1`. Pixel `(i, j)` covers
//! `[i, i+1) x [j, j+1)` and is sampled at its centre `(i + 0.5, j + 0.5)`.

mod bbox;
mod delta;
mod mask;
mod polygon;
mod pool;

pub use bbox::{bbox_iou, BBox};
pub use delta::{decode_delta, encode_delta, BoxDelta};
pub use mask::{mask_down, mask_iou, mask_up, rasterize, read_pgm, BitMask, SoftMask};
pub use polygon::{polygon_area, polygon_bbox, Point, Polygon};
pub use pool::{roi_max_pool, Grid2D};
