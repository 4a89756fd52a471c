use super::BBox;
use crate::error::{Error, Result};

/// Dense feature grid, row-major with channels innermost:
/// `values[(y * width + x) * channels + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl Grid2D {
    pub fn new(width: usize, height: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "grid {width}x{height}x{channels} needs {} values, got {}",
                width * height * channels,
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            values,
        })
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.values[(y * self.width + x) * self.channels + c]
    }
}

/// Bin edges `start + round(k * len / bins)` for `k = 0..=bins`.
fn bin_edges(start: i64, len: i64, bins: usize) -> Vec<i64> {
    (0..=bins)
        .map(|k| start + (k as f64 * len as f64 / bins as f64).round() as i64)
        .collect()
}

/// RoI max pooling. The RoI is snapped to integer cells by rounding, split
/// into `out_h x out_w` bins with rounded edges, and each bin takes the
/// per-channel maximum. Bins that end up empty, or fall outside the grid,
/// produce 0.
pub fn roi_max_pool(g: &Grid2D, roi: &BBox, out_h: usize, out_w: usize) -> Result<Grid2D> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidArgument(
            "pooled size must be positive".into(),
        ));
    }
    let rx1 = roi.x1.round() as i64;
    let ry1 = roi.y1.round() as i64;
    let rx2 = (roi.x2.round() as i64).max(rx1 + 1);
    let ry2 = (roi.y2.round() as i64).max(ry1 + 1);
    if rx2 <= 0 || ry2 <= 0 || rx1 >= g.width as i64 || ry1 >= g.height as i64 {
        return Err(Error::RoiOutsideGrid);
    }
    let xs = bin_edges(rx1, rx2 - rx1, out_w);
    let ys = bin_edges(ry1, ry2 - ry1, out_h);
    let clamp_x = |v: i64| v.clamp(0, g.width as i64) as usize;
    let clamp_y = |v: i64| v.clamp(0, g.height as i64) as usize;

    let mut out = vec![0.0; out_w * out_h * g.channels];
    for by in 0..out_h {
        let (y0, y1) = (clamp_y(ys[by]), clamp_y(ys[by + 1]));
        for bx in 0..out_w {
            let (x0, x1) = (clamp_x(xs[bx]), clamp_x(xs[bx + 1]));
            if x0 >= x1 || y0 >= y1 {
                continue;
            }
            for c in 0..g.channels {
                let mut m = f64::NEG_INFINITY;
                for y in y0..y1 {
                    for x in x0..x1 {
                        m = m.max(g.get(x, y, c));
                    }
                }
                out[(by * out_w + bx) * g.channels + c] = m;
            }
        }
    }
    Grid2D::new(out_w, out_h, g.channels, out)
}
