//! Detection records and their JSONL form.
//!
//! One object per line with `image`, `class`, `score` and exactly one
//! payload: `polygon` (`[[x, y], ...]`), `bbox` (`[x1, y1, x2, y2]`) or
//! `mask_pgm_path` (a binary PGM, resolved relative to a base directory).

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{read_pgm, BBox, BitMask, Point, Polygon};

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Polygon(Polygon),
    BBox(BBox),
    Mask(BitMask),
    /// Not yet loaded; see [`resolve_mask_payloads`].
    MaskFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image: String,
    pub class: String,
    pub score: f64,
    pub payload: Payload,
}

const PAYLOAD_KEYS: [&str; 3] = ["polygon", "bbox", "mask_pgm_path"];

pub fn load_predictions(text: &str) -> Result<Vec<Detection>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(line).map_err(|message| Error::Prediction {
            line: i + 1,
            message,
        })?);
    }
    Ok(out)
}

fn parse_line(line: &str) -> std::result::Result<Detection, String> {
    let v: Value = serde_json::from_str(line).map_err(|e| format!("malformed JSON: {e}"))?;
    let obj = v.as_object().ok_or("not a JSON object")?;
    let string = |k: &str| -> std::result::Result<String, String> {
        obj.get(k)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| format!("missing string field {k:?}"))
    };
    let image = string("image")?;
    let class = string("class")?;
    let score = obj
        .get("score")
        .and_then(Value::as_f64)
        .ok_or("missing numeric field \"score\"")?;
    if !(0.0..=1.0).contains(&score) {
        return Err(format!("score {score} outside [0, 1]"));
    }
    if let Some(k) = obj.keys().find(|k| {
        !["image", "class", "score"].contains(&k.as_str()) && !PAYLOAD_KEYS.contains(&k.as_str())
    }) {
        return Err(format!("unknown key {k:?}"));
    }
    let present: Vec<&str> = PAYLOAD_KEYS
        .iter()
        .copied()
        .filter(|k| obj.contains_key(*k))
        .collect();
    if present.len() != 1 {
        return Err(format!(
            "expected exactly one payload of {PAYLOAD_KEYS:?}, found {present:?}"
        ));
    }
    let payload = match present[0] {
        "polygon" => {
            let pts = obj["polygon"]
                .as_array()
                .ok_or("polygon must be an array of [x, y] pairs")?
                .iter()
                .map(|p| match p.as_array().map(Vec::as_slice) {
                    Some([x, y]) => match (x.as_f64(), y.as_f64()) {
                        (Some(x), Some(y)) => Ok(Point::new(x, y)),
                        _ => Err("polygon vertex is not numeric".to_string()),
                    },
                    _ => Err("polygon vertex must be an [x, y] pair".to_string()),
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Payload::Polygon(Polygon::new(pts).map_err(|e| e.to_string())?)
        }
        "bbox" => {
            let b: Vec<f64> = obj["bbox"]
                .as_array()
                .and_then(|a| a.iter().map(Value::as_f64).collect())
                .ok_or("bbox must be four numbers")?;
            let [x1, y1, x2, y2] = b[..] else {
                return Err("bbox must be four numbers".into());
            };
            let b = BBox::new(x1, y1, x2, y2);
            if !(b.width() > 0.0 && b.height() > 0.0) {
                return Err("bbox is degenerate".into());
            }
            Payload::BBox(b)
        }
        _ => Payload::MaskFile(PathBuf::from(
            obj["mask_pgm_path"]
                .as_str()
                .ok_or("mask_pgm_path must be a string")?,
        )),
    };
    Ok(Detection {
        image,
        class,
        score,
        payload,
    })
}

/// Loads every `MaskFile` payload, resolving relative paths against `base`.
pub fn resolve_mask_payloads(dets: &mut [Detection], base: &Path) -> Result<()> {
    for d in dets {
        if let Payload::MaskFile(p) = &d.payload {
            let path = base.join(p);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            d.payload = Payload::Mask(read_pgm(&bytes)?);
        }
    }
    Ok(())
}

fn coord(v: f64) -> Value {
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

/// Serialises detections as JSONL. In-memory masks have no inline form and
/// are rejected.
pub fn write_predictions(dets: &[Detection]) -> Result<String> {
    let mut s = String::new();
    for d in dets {
        let mut obj = Map::new();
        obj.insert("image".into(), json!(d.image));
        obj.insert("class".into(), json!(d.class));
        obj.insert("score".into(), coord(d.score));
        match &d.payload {
            Payload::Polygon(p) => {
                let pts: Vec<Value> = p
                    .points()
                    .iter()
                    .map(|q| json!([coord(q.x), coord(q.y)]))
                    .collect();
                obj.insert("polygon".into(), Value::Array(pts));
            }
            Payload::BBox(b) => {
                obj.insert(
                    "bbox".into(),
                    json!([coord(b.x1), coord(b.y1), coord(b.x2), coord(b.y2)]),
                );
            }
            Payload::MaskFile(p) => {
                obj.insert("mask_pgm_path".into(), json!(p.to_string_lossy()));
            }
            Payload::Mask(_) => {
                return Err(Error::InvalidArgument(format!(
                    "detection on {} carries an in-memory mask; write it to PGM first",
                    d.image
                )))
            }
        }
        s.push_str(&Value::Object(obj).to_string());
        s.push('\n');
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE: &str = r#"{"image": "a.jpg", "class": "window", "score": 0.95, "polygon": [[0,0],[4,0],[4,4],[0,4]]}
{"image": "a.jpg", "class": "window", "score": 0.5, "bbox": [1, 1, 3, 3]}

{"image": "b.jpg", "class": "window", "score": 1, "mask_pgm_path": "masks/b0.pgm"}
"#;

    #[test]
    fn three_lines() {
        let d = load_predictions(THREE).unwrap();
        assert_eq!(d.len(), 3);
        assert!(matches!(d[0].payload, Payload::Polygon(ref p) if p.len() == 4));
        assert_eq!(d[1].payload, Payload::BBox(BBox::new(1.0, 1.0, 3.0, 3.0)));
        assert_eq!(d[2].payload, Payload::MaskFile("masks/b0.pgm".into()));
    }

    #[test]
    fn empty_file() {
        assert!(load_predictions("").unwrap().is_empty());
    }

    #[test]
    fn errors_name_the_line() {
        let bad = "{\"image\":\"a\",\"class\":\"w\",\"score\":0.5,\"bbox\":[0,0,1,1]}\n{\"image\":\"a\",\"class\":\"w\",\"score\":1.5,\"bbox\":[0,0,1,1]}";
        match load_predictions(bad) {
            Err(Error::Prediction { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("1.5"));
            }
            other => panic!("{other:?}"),
        }
        for line in [
            r#"{"class":"w","score":0.5,"bbox":[0,0,1,1]}"#,
            r#"{"image":"a","class":"w","score":0.5}"#,
            r#"{"image":"a","class":"w","score":0.5,"bbox":[0,0,1,1],"polygon":[[0,0],[1,0],[1,1]]}"#,
            r#"{"image":"a","class":"w","score":0.5,"rle":"xyz"}"#,
        ] {
            assert!(load_predictions(line).is_err(), "{line}");
        }
    }

    #[test]
    fn round_trip_without_masks() {
        let d = load_predictions(THREE).unwrap();
        assert_eq!(
            load_predictions(&write_predictions(&d).unwrap()).unwrap(),
            d
        );
    }

    #[test]
    fn mask_files_resolve() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("masks")).unwrap();
        let m = BitMask::from_fn(6, 4, |x, y| x < 3 && y < 2);
        m.write_pgm(&dir.path().join("masks/b0.pgm")).unwrap();
        let mut d = load_predictions(THREE).unwrap();
        resolve_mask_payloads(&mut d, dir.path()).unwrap();
        assert_eq!(d[2].payload, Payload::Mask(m));
    }
}
