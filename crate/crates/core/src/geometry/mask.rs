use std::io::Write;
use std::path::Path;

use super::{BBox, Polygon};
use crate::error::{Error, Result};

/// Binary raster, row-major, bit-packed into `u64` words.
///
/// Bit `y * width + x` lives in word `idx / 64` at position `idx % 64`.
/// Bits past `width * height` are always zero, so whole-word operations are
/// safe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMask {
    width: usize,
    height: usize,
    words: Vec<u64>,
}

impl BitMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            words: vec![0; (width * height).div_ceil(64)],
        }
    }

    pub fn filled(width: usize, height: usize) -> Self {
        let mut m = Self::new(width, height);
        m.fill_range(0, width * height);
        m
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        let i = y * self.width + x;
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        let i = y * self.width + x;
        if v {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    /// Sets bits `[start, end)` of the flat index space.
    fn fill_range(&mut self, start: usize, end: usize) {
        if start >= end {
            return;
        }
        let (ws, we) = (start / 64, (end - 1) / 64);
        let lo = !0u64 << (start % 64);
        let hi = !0u64 >> (63 - (end - 1) % 64);
        if ws == we {
            self.words[ws] |= lo & hi;
        } else {
            self.words[ws] |= lo;
            for w in &mut self.words[ws + 1..we] {
                *w = !0;
            }
            self.words[we] |= hi;
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn check_same(&self, other: &BitMask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    pub fn and_count(&self, other: &BitMask) -> Result<usize> {
        self.check_same(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum())
    }

    /// Intersection count restricted to rows `[y0, y1)`.
    pub(crate) fn and_count_rows(&self, other: &BitMask, y0: usize, y1: usize) -> usize {
        let y1 = y1.min(self.height);
        if y0 >= y1 {
            return 0;
        }
        let ws = y0 * self.width / 64;
        let we = (y1 * self.width).div_ceil(64);
        self.words[ws..we]
            .iter()
            .zip(&other.words[ws..we])
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// Adds the pixels of `m` not yet in `self` and returns how many of those
    /// new pixels are inside and outside `reference`.
    pub(crate) fn absorb(&mut self, m: &BitMask, reference: &BitMask) -> (usize, usize) {
        let (mut inside, mut outside) = (0, 0);
        for ((c, &w), &r) in self.words.iter_mut().zip(&m.words).zip(&reference.words) {
            let fresh = w & !*c;
            inside += (fresh & r).count_ones() as usize;
            outside += (fresh & !r).count_ones() as usize;
            *c |= w;
        }
        (inside, outside)
    }

    pub fn union_with(&mut self, other: &BitMask) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        Ok(())
    }

    pub fn complement(&self) -> BitMask {
        let mut m = self.clone();
        for w in &mut m.words {
            *w = !*w;
        }
        let n = self.width * self.height;
        if !n.is_multiple_of(64) {
            if let Some(last) = m.words.last_mut() {
                *last &= (1u64 << (n % 64)) - 1;
            }
        }
        m
    }

    /// Tight bounding box of set pixels in corner convention, or `None`.
    pub fn bbox(&self) -> Option<BBox> {
        let (mut x1, mut y1, mut x2, mut y2) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    x1 = x1.min(x);
                    y1 = y1.min(y);
                    x2 = x2.max(x + 1);
                    y2 = y2.max(y + 1);
                }
            }
        }
        (x1 != usize::MAX).then(|| BBox::new(x1 as f64, y1 as f64, x2 as f64, y2 as f64))
    }

    /// Copies `self` into a `width x height` canvas with its top-left corner
    /// at `(x0, y0)`. Pixels falling outside the canvas are dropped.
    pub fn paste(&self, x0: i64, y0: i64, width: usize, height: usize) -> BitMask {
        let mut out = BitMask::new(width, height);
        for y in 0..self.height {
            let ty = y0 + y as i64;
            if ty < 0 || ty >= height as i64 {
                continue;
            }
            for x in 0..self.width {
                let tx = x0 + x as i64;
                if tx >= 0 && tx < width as i64 && self.get(x, y) {
                    out.set(tx as usize, ty as usize, true);
                }
            }
        }
        out
    }

    /// Erodes with a square structuring element of radius `r` (Chebyshev
    /// distance). Pixels outside the raster count as unset.
    pub fn erode(&self, r: usize) -> BitMask {
        if r == 0 {
            return self.clone();
        }
        let (w, h) = (self.width as i64, self.height as i64);
        let r = r as i64;
        BitMask::from_fn(self.width, self.height, |x, y| {
            let (x, y) = (x as i64, y as i64);
            if !self.get(x as usize, y as usize) {
                return false;
            }
            for yy in y - r..=y + r {
                for xx in x - r..=x + r {
                    if xx < 0 || yy < 0 || xx >= w || yy >= h || !self.get(xx as usize, yy as usize)
                    {
                        return false;
                    }
                }
            }
            true
        })
    }

    /// Binary PGM (P5), 0 for unset and 255 for set.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(if self.get(x, y) { 255 } else { 0 });
            }
        }
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

/// Parses a binary PGM (P5, maxval < 256); any non-zero sample is set.
pub fn read_pgm(bytes: &[u8]) -> Result<BitMask> {
    let bad = |m: &str| Error::InvalidArgument(format!("PGM: {m}"));
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
    }
    if fields[0] != "P5" {
        return Err(bad("expected magic P5"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (w, h, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit PGM is supported"));
    }
    pos += 1;
    let data = bytes
        .get(pos..pos + w * h)
        .ok_or_else(|| bad("truncated pixel data"))?;
    let mut m = BitMask::new(w, h);
    for (i, &v) in data.iter().enumerate() {
        if v != 0 {
            m.set(i % w, i / w, true);
        }
    }
    Ok(m)
}

/// Smallest `i` with `i + 0.5 >= x`.
fn first_center_at_or_after(x: f64) -> i64 {
    let mut i = (x - 0.5).ceil() as i64;
    while (i as f64) + 0.5 < x {
        i += 1;
    }
    while ((i - 1) as f64) + 0.5 >= x {
        i -= 1;
    }
    i
}

/// Scanline even-odd fill sampled at pixel centres.
///
/// Row `j` intersects the horizontal line `y = j + 0.5` with every edge that
/// crosses it (half-open in y), sorts the crossings, and fills centres with
/// `x_a <= x < x_b` for each consecutive pair. This is exactly the set of
/// centres for which a ray to +x crosses an odd number of edges.
pub fn rasterize(p: &Polygon, width: usize, height: usize) -> BitMask {
    let mut m = BitMask::new(width, height);
    if width == 0 || height == 0 {
        return m;
    }
    let bb = super::polygon_bbox(p);
    let j0 = first_center_at_or_after(bb.y1).max(0) as usize;
    let j1 = (first_center_at_or_after(bb.y2).max(0) as usize).min(height);
    let edges: Vec<_> = p.edges().filter(|(a, b)| a.y != b.y).collect();
    let mut xs = Vec::with_capacity(edges.len());
    for j in j0..j1 {
        let yc = j as f64 + 0.5;
        xs.clear();
        for (a, b) in &edges {
            if (a.y > yc) != (b.y > yc) {
                xs.push((b.x - a.x) * (yc - a.y) / (b.y - a.y) + a.x);
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let s = first_center_at_or_after(pair[0]).clamp(0, width as i64) as usize;
            let e = first_center_at_or_after(pair[1]).clamp(0, width as i64) as usize;
            m.fill_range(j * width + s, j * width + e);
        }
    }
    m
}

/// `|a & b| / |a | b|`, 0 when both are empty.
pub fn mask_iou(a: &BitMask, b: &BitMask) -> Result<f64> {
    let inter = a.and_count(b)?;
    let union = a.count() + b.count() - inter;
    Ok(if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    })
}

/// Square float mask with values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask {
    side: usize,
    values: Vec<f64>,
}

impl SoftMask {
    pub const DEFAULT_SIDE: usize = 28;

    pub fn new(side: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != side * side {
            return Err(Error::DimensionMismatch(format!(
                "soft mask of side {side} needs {} values, got {}",
                side * side,
                values.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(
                "soft mask values must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { side, values })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.side + x]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in self.values.chunks(self.side) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// Area-weighted overlap of source interval `[i, i+1)` with `[lo, hi)`.
fn overlap(i: usize, lo: f64, hi: f64) -> f64 {
    ((i as f64 + 1.0).min(hi) - (i as f64).max(lo)).max(0.0)
}

/// Downsamples a binary mask into a `side x side` soft mask. Every output
/// cell is the exact covered fraction of its footprint in the source, so the
/// mean of the output equals the set fraction of the input.
pub fn mask_down(m: &BitMask, side: usize) -> Result<SoftMask> {
    if side == 0 || m.width() == 0 || m.height() == 0 {
        return Err(Error::InvalidArgument(
            "mask_down needs a non-empty raster and side > 0".into(),
        ));
    }
    let (sx, sy) = (
        m.width() as f64 / side as f64,
        m.height() as f64 / side as f64,
    );
    let mut values = Vec::with_capacity(side * side);
    for oy in 0..side {
        let (ylo, yhi) = (oy as f64 * sy, (oy + 1) as f64 * sy);
        let rows = ylo.floor() as usize..(yhi.ceil() as usize).min(m.height());
        for ox in 0..side {
            let (xlo, xhi) = (ox as f64 * sx, (ox + 1) as f64 * sx);
            let cols = xlo.floor() as usize..(xhi.ceil() as usize).min(m.width());
            let mut acc = 0.0;
            for y in rows.clone() {
                let wy = overlap(y, ylo, yhi);
                for x in cols.clone() {
                    if m.get(x, y) {
                        acc += wy * overlap(x, xlo, xhi);
                    }
                }
            }
            values.push((acc / (sx * sy)).clamp(0.0, 1.0));
        }
    }
    SoftMask::new(side, values)
}

/// Bilinearly resamples `s` onto the integer pixel extent of `b`
/// (`floor(x1)..ceil(x2)` by `floor(y1)..ceil(y2)`) and thresholds at
/// `threshold` (inclusive). The result is box-sized; use
/// [`BitMask::paste`] with `(floor(x1), floor(y1))` to place it on a canvas.
pub fn mask_up(s: &SoftMask, b: &BBox, threshold: f64) -> Result<BitMask> {
    let (x0, y0) = (b.x1.floor(), b.y1.floor());
    let w = (b.x2.ceil() - x0).max(0.0) as usize;
    let h = (b.y2.ceil() - y0).max(0.0) as usize;
    if b.area() <= 0.0 || w == 0 || h == 0 {
        return Err(Error::DegenerateBox(format!(
            "({}, {}, {}, {}) has zero area",
            b.x1, b.y1, b.x2, b.y2
        )));
    }
    let n = s.side();
    let last = (n - 1) as f64;
    let sample = |u: f64, v: f64| -> f64 {
        let u = u.clamp(0.0, last);
        let v = v.clamp(0.0, last);
        let (u0, v0) = (u.floor() as usize, v.floor() as usize);
        let (u1, v1) = ((u0 + 1).min(n - 1), (v0 + 1).min(n - 1));
        let (fu, fv) = (u - u0 as f64, v - v0 as f64);
        let top = s.get(u0, v0) * (1.0 - fu) + s.get(u1, v0) * fu;
        let bottom = s.get(u0, v1) * (1.0 - fu) + s.get(u1, v1) * fu;
        top * (1.0 - fv) + bottom * fv
    };
    let (scx, scy) = (n as f64 / w as f64, n as f64 / h as f64);
    Ok(BitMask::from_fn(w, h, |x, y| {
        let u = (x as f64 + 0.5) * scx - 0.5;
        let v = (y as f64 + 0.5) * scy - 0.5;
        sample(u, v) >= threshold
    }))
}
