//! VGG Image Annotator JSON.
//!
//! Both layouts seen in the wild are accepted: VIA 1.x stores `regions` as an
//! object keyed by index, VIA 2.x as an array. A full VIA 2.x project file
//! (with `_via_img_metadata`) is unwrapped. Output is always the VIA 2.x
//! export form keyed by `filename + size`.

use std::collections::BTreeMap;

use serde_json::{Map, Number, Value};

use super::{Dataset, ImageRecord, Region};
use crate::error::{Error, Result};
use crate::geometry::Polygon;

const PROJECT_KEY: &str = "_via_img_metadata";

pub fn parse_via(text: &str) -> Result<Dataset> {
    let root: Value = serde_json::from_str(text)?;
    let root = match root {
        Value::Object(mut m) if m.contains_key(PROJECT_KEY) => {
            m.remove(PROJECT_KEY).unwrap_or_default()
        }
        other => other,
    };
    let Value::Object(entries) = root else {
        return Err(Error::InvalidAnnotations(vec![
            "top level is not a JSON object".into(),
        ]));
    };

    let mut problems = Vec::new();
    let mut images = Vec::with_capacity(entries.len());
    for (key, entry) in &entries {
        match parse_entry(key, entry, &mut problems) {
            Some(img) => images.push(img),
            None => continue,
        }
    }
    if problems.is_empty() {
        Ok(Dataset::new(images))
    } else {
        Err(Error::InvalidAnnotations(problems))
    }
}

fn parse_entry(key: &str, entry: &Value, problems: &mut Vec<String>) -> Option<ImageRecord> {
    let Some(obj) = entry.as_object() else {
        problems.push(format!("{key}: entry is not an object"));
        return None;
    };
    let filename = match obj.get("filename").and_then(Value::as_str) {
        Some(f) => f.to_string(),
        None => {
            problems.push(format!("{key}: missing filename"));
            return None;
        }
    };
    let file_size = match obj.get("size") {
        None | Some(Value::Null) => 0,
        Some(Value::Number(n)) => n.as_u64().unwrap_or(0),
        Some(Value::String(s)) => s.trim().parse().unwrap_or(0),
        Some(_) => {
            problems.push(format!("{key}: size is not a number"));
            0
        }
    };
    let mut img = ImageRecord::new(filename, file_size);
    if let Some(attrs) = obj.get("file_attributes") {
        img.file_attributes = string_map(attrs);
    }

    let regions: Vec<(String, &Value)> = match obj.get("regions") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(a)) => a
            .iter()
            .enumerate()
            .map(|(i, r)| (i.to_string(), r))
            .collect(),
        Some(Value::Object(m)) => m.iter().map(|(k, r)| (k.clone(), r)).collect(),
        Some(_) => {
            problems.push(format!("{key}: regions is neither an array nor an object"));
            Vec::new()
        }
    };
    for (rk, r) in regions {
        let at = format!("{key} region {rk}");
        match parse_region(r) {
            Ok(region) => img.regions.push(region),
            Err(msg) => problems.push(format!("{at}: {msg}")),
        }
    }
    Some(img)
}

fn parse_region(r: &Value) -> std::result::Result<Region, String> {
    let shape = r
        .get("shape_attributes")
        .and_then(Value::as_object)
        .ok_or("missing shape_attributes")?;
    let name = shape.get("name").and_then(Value::as_str).unwrap_or("");
    if name != "polygon" && name != "polyline" {
        return Err(format!("unsupported shape type {name:?}"));
    }
    let coords = |k: &str| -> std::result::Result<Vec<f64>, String> {
        shape
            .get(k)
            .and_then(Value::as_array)
            .ok_or_else(|| format!("missing {k}"))?
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| format!("{k} has a non-numeric entry"))
            })
            .collect()
    };
    let (xs, ys) = (coords("all_points_x")?, coords("all_points_y")?);
    if xs.len() != ys.len() {
        return Err(format!(
            "all_points_x has {} entries but all_points_y has {}",
            xs.len(),
            ys.len()
        ));
    }
    let polygon = Polygon::from_xy(&xs, &ys).map_err(|e| e.to_string())?;
    let attributes = r
        .get("region_attributes")
        .map(string_map)
        .unwrap_or_default();
    Ok(Region {
        polygon,
        attributes,
    })
}

/// Flattens a JSON object to strings. Non-string scalars keep their JSON
/// text; nested values are stored as compact JSON.
fn string_map(v: &Value) -> BTreeMap<String, String> {
    v.as_object()
        .map(|m| {
            m.iter()
                .map(|(k, v)| {
                    let s = match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    (k.clone(), s)
                })
                .collect()
        })
        .unwrap_or_default()
}

fn number(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Value::Number(Number::from(v as i64))
    } else {
        Number::from_f64(v)
            .map(Value::Number)
            .unwrap_or(Value::Null)
    }
}

fn attr_object(m: &BTreeMap<String, String>) -> Value {
    Value::Object(
        m.iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect(),
    )
}

/// Serialises to the VIA 2.x export layout, preserving image order.
pub fn write_via(d: &Dataset) -> String {
    if d.images.is_empty() {
        return "{}".to_string();
    }
    let mut root = Map::new();
    for img in &d.images {
        let regions: Vec<Value> = img
            .regions
            .iter()
            .map(|r| {
                let mut shape = Map::new();
                shape.insert("name".into(), Value::String("polygon".into()));
                shape.insert(
                    "all_points_x".into(),
                    Value::Array(r.polygon.points().iter().map(|p| number(p.x)).collect()),
                );
                shape.insert(
                    "all_points_y".into(),
                    Value::Array(r.polygon.points().iter().map(|p| number(p.y)).collect()),
                );
                let mut region = Map::new();
                region.insert("shape_attributes".into(), Value::Object(shape));
                region.insert("region_attributes".into(), attr_object(&r.attributes));
                Value::Object(region)
            })
            .collect();
        let mut entry = Map::new();
        entry.insert("filename".into(), Value::String(img.filename.clone()));
        entry.insert("size".into(), Value::Number(img.file_size.into()));
        entry.insert("regions".into(), Value::Array(regions));
        entry.insert("file_attributes".into(), attr_object(&img.file_attributes));
        root.insert(
            format!("{}{}", img.filename, img.file_size),
            Value::Object(entry),
        );
    }
    serde_json::to_string_pretty(&Value::Object(root)).expect("JSON values always serialise")
}
