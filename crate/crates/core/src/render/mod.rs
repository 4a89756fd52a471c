//! Overlay rendering: ground truth in green, predictions in red (or a
//! per-instance colour), alpha-blended fills, inner outlines and bitmap
//! captions. Plus PPM/PNG output.

pub mod font;

use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::annotation::ImageRecord;
use crate::error::{Error, Result};
use crate::eval::{Detection, DetectionMatch, Payload};
use crate::geometry::{rasterize, BitMask, Polygon};
use crate::rng::fnv1a;

pub const GT_COLOR: [u8; 3] = [0, 255, 0];
pub const PRED_COLOR: [u8; 3] = [255, 0, 0];
pub const CAPTION_FG: [u8; 3] = [255, 255, 255];
pub const CAPTION_BG: [u8; 3] = [0, 0, 0];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlayMode {
    GtOnly,
    PredOnly,
    #[default]
    Overlap,
}

impl OverlayMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            OverlayMode::GtOnly => "gt_only",
            OverlayMode::PredOnly => "pred_only",
            OverlayMode::Overlap => "overlap",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Caption {
    None,
    Class,
    Score,
    #[default]
    ScoreIou,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OverlaySpec {
    pub mode: OverlayMode,
    pub caption: Caption,
    pub fill_alpha: f64,
    pub outline_width: u32,
    /// Integer magnification of the 5x7 caption font.
    pub caption_scale: u32,
}

impl Default for OverlaySpec {
    fn default() -> Self {
        Self {
            mode: OverlayMode::Overlap,
            caption: Caption::ScoreIou,
            fill_alpha: 0.4,
            outline_width: 2,
            caption_scale: 2,
        }
    }
}

/// A prediction to draw and, when available, its match outcome.
#[derive(Debug, Clone, Copy)]
pub struct OverlayItem<'a> {
    pub detection: &'a Detection,
    pub matched: Option<&'a DetectionMatch>,
}

/// Deterministic bright colour for instance `index` of `filename`.
pub fn instance_color(filename: &str, index: usize) -> [u8; 3] {
    let h = fnv1a(format!("{filename}#{index}").as_bytes());
    [
        (h >> 16) as u8 | 0x40,
        (h >> 8) as u8 | 0x40,
        h as u8 | 0x40,
    ]
}

pub fn caption_text(caption: Caption, d: &Detection, m: Option<&DetectionMatch>) -> Option<String> {
    match caption {
        Caption::None => None,
        Caption::Class => Some(d.class.clone()),
        Caption::Score => Some(format!("{:.2}", d.score)),
        Caption::ScoreIou => Some(match m {
            Some(m) => format!("{:.2}/{:.2}", d.score, m.iou),
            None => format!("{:.2}/-", d.score),
        }),
    }
}

fn blend(p: u8, c: u8, alpha: f64) -> u8 {
    (alpha * c as f64 + (1.0 - alpha) * p as f64)
        .round()
        .clamp(0.0, 255.0) as u8
}

fn payload_mask(d: &Detection, w: usize, h: usize) -> Result<BitMask> {
    match &d.payload {
        Payload::Polygon(p) => Ok(rasterize(p, w, h)),
        Payload::BBox(b) => Ok(rasterize(&Polygon::from_bbox(b), w, h)),
        Payload::Mask(m) if m.width() == w && m.height() == h => Ok(m.clone()),
        Payload::Mask(m) => Err(Error::DimensionMismatch(format!(
            "mask {}x{} on a {w}x{h} image",
            m.width(),
            m.height()
        ))),
        Payload::MaskFile(p) => Err(Error::InvalidArgument(format!(
            "mask {} was not loaded",
            p.display()
        ))),
    }
}

struct Canvas {
    img: RgbImage,
}

impl Canvas {
    fn put(&mut self, x: usize, y: usize, c: [u8; 3]) {
        if x < self.img.width() as usize && y < self.img.height() as usize {
            self.img.put_pixel(x as u32, y as u32, Rgb(c));
        }
    }

    fn fill(&mut self, m: &BitMask, color: [u8; 3], alpha: f64) {
        if alpha <= 0.0 {
            return;
        }
        let Some(b) = m.bbox() else { return };
        for y in b.y1 as usize..b.y2 as usize {
            for x in b.x1 as usize..b.x2 as usize {
                if m.get(x, y) {
                    let Rgb(p) = *self.img.get_pixel(x as u32, y as u32);
                    self.put(x, y, [0, 1, 2].map(|k| blend(p[k], color[k], alpha)));
                }
            }
        }
    }

    /// Mask pixels within `width` (Chebyshev) of an unset or off-canvas pixel.
    fn outline(&mut self, m: &BitMask, color: [u8; 3], width: usize) {
        if width == 0 {
            return;
        }
        let Some(b) = m.bbox() else { return };
        let (w, h) = (m.width() as i64, m.height() as i64);
        let r = width as i64;
        for y in b.y1 as i64..b.y2 as i64 {
            for x in b.x1 as i64..b.x2 as i64 {
                if !m.get(x as usize, y as usize) {
                    continue;
                }
                let edge = (y - r..=y + r).any(|yy| {
                    (x - r..=x + r).any(|xx| {
                        xx < 0 || yy < 0 || xx >= w || yy >= h || !m.get(xx as usize, yy as usize)
                    })
                });
                if edge {
                    self.put(x as usize, y as usize, color);
                }
            }
        }
    }

    /// Caption box anchored at `(x, y)`, shifted to stay on the canvas.
    fn caption(&mut self, text: &str, x: f64, y: f64, scale: usize) {
        let (tw, th) = font::text_size(text, scale);
        let (bw, bh) = (tw + 2, th + 2);
        let (cw, ch) = (self.img.width() as usize, self.img.height() as usize);
        let x0 = (x.max(0.0).floor() as usize).min(cw.saturating_sub(bw));
        let y0 = (y.max(0.0).floor() as usize).min(ch.saturating_sub(bh));
        for yy in y0..y0 + bh {
            for xx in x0..x0 + bw {
                self.put(xx, yy, CAPTION_BG);
            }
        }
        font::for_each_pixel(text, scale, |dx, dy| {
            self.put(x0 + 1 + dx, y0 + 1 + dy, CAPTION_FG)
        });
    }
}

/// Draws annotations and predictions onto a copy of `pixels`. Inputs are
/// left untouched. With captions disabled, pixels outside every instance are
/// unchanged.
pub fn render_overlay(
    pixels: &RgbImage,
    record: &ImageRecord,
    preds: &[OverlayItem<'_>],
    spec: &OverlaySpec,
) -> Result<RgbImage> {
    if !(0.0..=1.0).contains(&spec.fill_alpha) {
        return Err(Error::InvalidArgument(format!(
            "fill alpha {} outside [0, 1]",
            spec.fill_alpha
        )));
    }
    if record.is_resolved() && (pixels.width() != record.width || pixels.height() != record.height)
    {
        return Err(Error::DimensionMismatch(format!(
            "image is {}x{}, annotations are for {}x{}",
            pixels.width(),
            pixels.height(),
            record.width,
            record.height
        )));
    }
    let (w, h) = (pixels.width() as usize, pixels.height() as usize);
    let mut canvas = Canvas {
        img: pixels.clone(),
    };
    let scale = spec.caption_scale.max(1) as usize;
    let outline = spec.outline_width as usize;

    if spec.mode != OverlayMode::PredOnly {
        for r in &record.regions {
            let m = rasterize(&r.polygon, w, h);
            canvas.fill(&m, GT_COLOR, spec.fill_alpha);
            canvas.outline(&m, GT_COLOR, outline);
        }
    }
    let mut captions = Vec::new();
    if spec.mode == OverlayMode::GtOnly && spec.caption != Caption::None {
        for r in &record.regions {
            let b = crate::geometry::polygon_bbox(&r.polygon);
            captions.push((r.class_name().to_string(), b.x1, b.y1));
        }
    }
    if spec.mode != OverlayMode::GtOnly {
        for (i, item) in preds.iter().enumerate() {
            let color = match spec.mode {
                OverlayMode::PredOnly => instance_color(&record.filename, i),
                _ => PRED_COLOR,
            };
            let m = payload_mask(item.detection, w, h)?;
            canvas.fill(&m, color, spec.fill_alpha);
            canvas.outline(&m, color, outline);
            if let (Some(text), Some(b)) = (
                caption_text(spec.caption, item.detection, item.matched),
                m.bbox(),
            ) {
                captions.push((text, b.x1, b.y1));
            }
        }
    }
    // Captions last so fills never cover them.
    for (text, x, y) in captions {
        canvas.caption(&text, x, y, scale);
    }
    Ok(canvas.img)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageKind {
    Ppm,
    Png,
}

impl ImageKind {
    pub fn extension(&self) -> &'static str {
        match self {
            ImageKind::Ppm => "ppm",
            ImageKind::Png => "png",
        }
    }
}

/// `<stem>.<mode>.<ext>` for an annotated filename.
pub fn overlay_filename(filename: &str, mode: OverlayMode, kind: ImageKind) -> String {
    let stem = Path::new(filename)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| filename.to_string());
    format!("{stem}.{}.{}", mode.as_str(), kind.extension())
}

/// Binary PPM: `P6\n<w> <h>\n255\n` followed by RGB triples.
pub fn encode_ppm(pixels: &RgbImage) -> Result<Vec<u8>> {
    if pixels.width() == 0 || pixels.height() == 0 {
        return Err(Error::InvalidArgument(
            "cannot encode an empty image".into(),
        ));
    }
    let mut out = format!("P6\n{} {}\n255\n", pixels.width(), pixels.height()).into_bytes();
    out.extend_from_slice(pixels.as_raw());
    Ok(out)
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let bad = |m: &str| Error::InvalidArgument(format!("PPM: {m}"));
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if bytes.get(pos) == Some(&b'#') {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P6" || fields[3] != "255" {
        return Err(bad("only 8-bit P6 is supported"));
    }
    let w: u32 = fields[1].parse().map_err(|_| bad("bad width"))?;
    let h: u32 = fields[2].parse().map_err(|_| bad("bad height"))?;
    let n = w as usize * h as usize * 3;
    let data = bytes
        .get(pos + 1..pos + 1 + n)
        .ok_or_else(|| bad("truncated pixel data"))?;
    RgbImage::from_raw(w, h, data.to_vec()).ok_or_else(|| bad("size mismatch"))
}

pub fn write_image(pixels: &RgbImage, path: &Path, kind: ImageKind) -> Result<()> {
    if pixels.width() == 0 || pixels.height() == 0 {
        return Err(Error::InvalidArgument("cannot write an empty image".into()));
    }
    match kind {
        ImageKind::Ppm => std::fs::write(path, encode_ppm(pixels)?).map_err(|e| Error::io(path, e)),
        ImageKind::Png => pixels
            .save_with_format(path, ImageFormat::Png)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => Error::Image(other),
            }),
    }
}

/// Loads a PPM, PNG or JPEG as RGB.
pub fn read_image(path: &Path) -> Result<RgbImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P6") {
        return decode_ppm(&bytes);
    }
    Ok(image::load_from_memory(&bytes)?.to_rgb8())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::Region;
    use crate::geometry::BBox;

    fn record(w: u32, h: u32, boxes: &[BBox]) -> ImageRecord {
        let mut r = ImageRecord::new("img.jpg", 1);
        r.width = w;
        r.height = h;
        r.regions = boxes
            .iter()
            .map(|b| Region::new(Polygon::from_bbox(b)))
            .collect();
        r
    }

    fn gray(w: u32, h: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            Rgb([(x * 7 % 256) as u8, (y * 11 % 256) as u8, 90])
        })
    }

    #[test]
    fn nothing_to_draw() {
        let img = gray(20, 10);
        let out = render_overlay(&img, &record(20, 10, &[]), &[], &OverlaySpec::default()).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn opaque_gt_fill() {
        let img = gray(20, 20);
        let b = BBox::new(2.0, 3.0, 9.0, 8.0);
        let spec = OverlaySpec {
            fill_alpha: 1.0,
            caption: Caption::None,
            ..OverlaySpec::default()
        };
        let out = render_overlay(&img, &record(20, 20, &[b]), &[], &spec).unwrap();
        let m = rasterize(&Polygon::from_bbox(&b), 20, 20);
        for y in 0..20 {
            for x in 0..20 {
                let px = out.get_pixel(x, y).0;
                if m.get(x as usize, y as usize) {
                    assert_eq!(px, GT_COLOR);
                } else {
                    assert_eq!(px, img.get_pixel(x, y).0);
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        assert!(render_overlay(
            &gray(5, 5),
            &record(6, 5, &[]),
            &[],
            &OverlaySpec::default()
        )
        .is_err());
    }

    #[test]
    fn ppm_bytes() {
        let img = RgbImage::from_pixel(1, 1, Rgb([255, 0, 0]));
        let b = encode_ppm(&img).unwrap();
        assert_eq!(b, b"P6\n1 1\n255\n\xff\x00\x00");
        assert_eq!(decode_ppm(&b).unwrap(), img);
        assert!(encode_ppm(&RgbImage::new(0, 0)).is_err());
    }

    #[test]
    fn overlay_names() {
        assert_eq!(
            overlay_filename("dir/a.b.jpg", OverlayMode::Overlap, ImageKind::Png),
            "a.b.overlap.png"
        );
    }

    #[test]
    fn instance_colors_stable() {
        assert_eq!(instance_color("x.jpg", 3), instance_color("x.jpg", 3));
        assert_ne!(instance_color("x.jpg", 3), instance_color("x.jpg", 4));
    }
}
