//! Pixel dimensions. VIA stores file byte sizes only, so widths and heights
//! come from image headers or from a `filename,width,height` manifest.

use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;

use super::Dataset;
use crate::error::{Error, Result};
use crate::geometry::Point;

const PNG_MAGIC: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

/// Reads `(width, height)` from a PNG or JPEG header.
///
/// PNG: big-endian width/height at bytes 16..24 of the IHDR chunk.
/// JPEG: the first SOF0 (baseline) or SOF2 (progressive) segment.
pub fn sniff_dimensions(bytes: &[u8]) -> Result<(u32, u32)> {
    if bytes.starts_with(&PNG_MAGIC) {
        if bytes.len() < 24 {
            return Err(Error::TruncatedHeader("PNG shorter than its IHDR chunk"));
        }
        if &bytes[12..16] != b"IHDR" {
            return Err(Error::TruncatedHeader("PNG does not start with IHDR"));
        }
        let w = u32::from_be_bytes(bytes[16..20].try_into().unwrap());
        let h = u32::from_be_bytes(bytes[20..24].try_into().unwrap());
        return Ok((w, h));
    }
    if bytes.starts_with(&[0xff, 0xd8]) {
        return sniff_jpeg(bytes);
    }
    Err(Error::UnknownImageFormat(
        bytes.iter().take(8).copied().collect(),
    ))
}

fn sniff_jpeg(bytes: &[u8]) -> Result<(u32, u32)> {
    let mut pos = 2;
    loop {
        // Skip fill bytes before a marker.
        while pos < bytes.len() && bytes[pos] == 0xff && bytes.get(pos + 1) == Some(&0xff) {
            pos += 1;
        }
        if pos + 4 > bytes.len() {
            return Err(Error::TruncatedHeader(
                "JPEG ended before a SOF0/SOF2 segment",
            ));
        }
        if bytes[pos] != 0xff {
            return Err(Error::TruncatedHeader("JPEG marker stream is corrupt"));
        }
        let marker = bytes[pos + 1];
        // Standalone markers carry no length.
        if marker == 0x01 || (0xd0..=0xd7).contains(&marker) {
            pos += 2;
            continue;
        }
        if marker == 0xd9 || marker == 0xda {
            return Err(Error::TruncatedHeader(
                "JPEG has no SOF0/SOF2 segment before scan data",
            ));
        }
        let len = u16::from_be_bytes([bytes[pos + 2], bytes[pos + 3]]) as usize;
        if marker == 0xc0 || marker == 0xc2 {
            // length(2) precision(1) height(2) width(2)
            if pos + 9 > bytes.len() {
                return Err(Error::TruncatedHeader("JPEG SOF segment is cut short"));
            }
            let h = u16::from_be_bytes([bytes[pos + 5], bytes[pos + 6]]) as u32;
            let w = u16::from_be_bytes([bytes[pos + 7], bytes[pos + 8]]) as u32;
            return Ok((w, h));
        }
        if len < 2 {
            return Err(Error::TruncatedHeader("JPEG segment length below 2"));
        }
        pos += 2 + len;
    }
}

/// Vertices clamped onto the canvas while resolving or augmenting.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ClampReport {
    pub clamped_vertices: usize,
    /// `(filename, region index, clamped vertex count)` for every region touched.
    pub regions: Vec<(String, usize, usize)>,
}

impl ClampReport {
    pub fn merge(&mut self, other: ClampReport) {
        self.clamped_vertices += other.clamped_vertices;
        self.regions.extend(other.regions);
    }
}

/// Clamps every vertex into `[0, width] x [0, height]`, counting changes.
pub fn clamp_to_canvas(d: &mut Dataset) -> ClampReport {
    let mut report = ClampReport::default();
    for img in &mut d.images {
        if !img.is_resolved() {
            continue;
        }
        let (w, h) = (img.width as f64, img.height as f64);
        for (ri, r) in img.regions.iter_mut().enumerate() {
            let mut n = 0;
            r.polygon = r.polygon.map_points(|p| {
                let q = Point::new(p.x.clamp(0.0, w), p.y.clamp(0.0, h));
                n += (q != p) as usize;
                q
            });
            if n > 0 {
                report.clamped_vertices += n;
                report.regions.push((img.filename.clone(), ri, n));
            }
        }
    }
    report
}

/// Fills in pixel dimensions by sniffing each image under `image_dir`, then
/// clamps out-of-bounds vertices.
pub fn resolve_dimensions(d: &Dataset, image_dir: &Path) -> Result<(Dataset, ClampReport)> {
    let mut out = d.clone();
    for img in &mut out.images {
        let path = image_dir.join(&img.filename);
        if !path.is_file() {
            return Err(Error::MissingImage(path));
        }
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let (w, h) = sniff_dimensions(&bytes)?;
        if w == 0 || h == 0 {
            return Err(Error::TruncatedHeader(
                "image header declares a zero dimension",
            ));
        }
        img.width = w;
        img.height = h;
    }
    let report = clamp_to_canvas(&mut out);
    Ok((out, report))
}

/// Parses a `filename,width,height` CSV. A header row is optional.
pub fn read_dimension_manifest(text: &str) -> Result<HashMap<String, (u32, u32)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if i == 0 && rec.get(0) == Some("filename") {
            continue;
        }
        if rec.len() != 3 {
            return Err(Error::Manifest(format!(
                "row {} has {} fields, expected 3",
                i + 1,
                rec.len()
            )));
        }
        let dim = |k: usize| -> Result<u32> {
            match rec[k].parse::<u32>() {
                Ok(v) if v > 0 => Ok(v),
                _ => Err(Error::Manifest(format!(
                    "row {}: invalid dimension {:?}",
                    i + 1,
                    &rec[k]
                ))),
            }
        };
        out.insert(rec[0].to_string(), (dim(1)?, dim(2)?));
    }
    Ok(out)
}

pub fn resolve_dimensions_from_manifest(
    d: &Dataset,
    manifest: &HashMap<String, (u32, u32)>,
) -> Result<(Dataset, ClampReport)> {
    let mut out = d.clone();
    for img in &mut out.images {
        let &(w, h) = manifest
            .get(&img.filename)
            .ok_or_else(|| Error::Manifest(format!("no entry for {}", img.filename)))?;
        img.width = w;
        img.height = h;
    }
    let report = clamp_to_canvas(&mut out);
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// PNG signature followed by an IHDR chunk, padded to 64 bytes.
    pub(crate) fn png_header(w: u32, h: u32) -> Vec<u8> {
        let mut b = PNG_MAGIC.to_vec();
        b.extend_from_slice(&13u32.to_be_bytes());
        b.extend_from_slice(b"IHDR");
        b.extend_from_slice(&w.to_be_bytes());
        b.extend_from_slice(&h.to_be_bytes());
        b.extend_from_slice(&[8, 2, 0, 0, 0]);
        b.resize(64, 0);
        b
    }

    /// SOI, an APP0 segment, then SOF0 encoding the size.
    fn jpeg_header(w: u16, h: u16, sof: u8) -> Vec<u8> {
        let mut b = vec![0xff, 0xd8];
        b.extend_from_slice(&[0xff, 0xe0, 0x00, 0x10]);
        b.extend_from_slice(b"JFIF\0");
        b.extend_from_slice(&[1, 1, 0, 0, 1, 0, 1, 0, 0]);
        b.extend_from_slice(&[0xff, sof, 0x00, 0x11, 0x08]);
        b.extend_from_slice(&h.to_be_bytes());
        b.extend_from_slice(&w.to_be_bytes());
        b.extend_from_slice(&[3, 1, 0x22, 0, 2, 0x11, 1, 3, 0x11, 1]);
        b.resize(64, 0);
        b
    }

    #[test]
    fn png_dimensions() {
        assert_eq!(sniff_dimensions(&png_header(640, 480)).unwrap(), (640, 480));
    }

    #[test]
    fn jpeg_dimensions() {
        assert_eq!(
            sniff_dimensions(&jpeg_header(1024, 1024, 0xc0)).unwrap(),
            (1024, 1024)
        );
        assert_eq!(
            sniff_dimensions(&jpeg_header(300, 200, 0xc2)).unwrap(),
            (300, 200)
        );
    }

    #[test]
    fn unknown_and_truncated() {
        assert!(matches!(
            sniff_dimensions(&[0; 4]),
            Err(Error::UnknownImageFormat(_))
        ));
        assert!(matches!(
            sniff_dimensions(&png_header(1, 1)[..20]),
            Err(Error::TruncatedHeader(_))
        ));
        assert!(matches!(
            sniff_dimensions(&jpeg_header(5, 5, 0xc0)[..22]),
            Err(Error::TruncatedHeader(_))
        ));
    }

    #[test]
    fn manifest_parsing() {
        let m = read_dimension_manifest("filename,width,height\na.jpg,640,480\nb.png, 10 ,20\n")
            .unwrap();
        assert_eq!(m["a.jpg"], (640, 480));
        assert_eq!(m["b.png"], (10, 20));
        assert!(read_dimension_manifest("a.jpg,0,4\n").is_err());
        assert!(read_dimension_manifest("a.jpg,4\n").is_err());
    }
}
