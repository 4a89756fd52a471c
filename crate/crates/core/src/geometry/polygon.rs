use serde::{Deserialize, Serialize};

use super::BBox;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// A simple closed polygon given by at least three finite vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    points: Vec<Point>,
}

impl Polygon {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                points.len()
            )));
        }
        if let Some(p) = points.iter().find(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidPolygon(format!(
                "non-finite vertex ({}, {})",
                p.x, p.y
            )));
        }
        Ok(Self { points })
    }

    /// Builds a polygon from VIA-style parallel coordinate lists.
    pub fn from_xy(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidPolygon(format!(
                "all_points_x has {} entries but all_points_y has {}",
                xs.len(),
                ys.len()
            )));
        }
        Self::new(xs.iter().zip(ys).map(|(&x, &y)| Point::new(x, y)).collect())
    }

    /// Axis-aligned rectangle as a 4-vertex polygon.
    pub fn from_bbox(b: &BBox) -> Self {
        Self {
            points: vec![
                Point::new(b.x1, b.y1),
                Point::new(b.x2, b.y1),
                Point::new(b.x2, b.y2),
                Point::new(b.x1, b.y2),
            ],
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.y).collect()
    }

    /// Applies `f` to every vertex. The caller must keep the output finite.
    pub fn map_points(&self, mut f: impl FnMut(Point) -> Point) -> Self {
        Self {
            points: self.points.iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        self.map_points(|p| Point::new(p.x + dx, p.y + dy))
    }

    /// Iterates over edges `(p[i], p[i+1])`, closing back to `p[0]`.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.points.len();
        (0..n).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    /// Even-odd containment test.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > y) != (b.y > y) {
                let xi = (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x;
                if x < xi {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

pub fn polygon_bbox(p: &Polygon) -> BBox {
    let mut b = BBox {
        x1: f64::INFINITY,
        y1: f64::INFINITY,
        x2: f64::NEG_INFINITY,
        y2: f64::NEG_INFINITY,
    };
    for q in p.points() {
        b.x1 = b.x1.min(q.x);
        b.y1 = b.y1.min(q.y);
        b.x2 = b.x2.max(q.x);
        b.y2 = b.y2.max(q.y);
    }
    b
}

/// Shoelace area, always non-negative.
pub fn polygon_area(p: &Polygon) -> f64 {
    // Centre on the first vertex to limit cancellation for far-off polygons.
    let o = p.points()[0];
    let twice: f64 = p
        .edges()
        .map(|(a, b)| (a.x - o.x) * (b.y - o.y) - (b.x - o.x) * (a.y - o.y))
        .sum();
    twice.abs() / 2.0
}
