use std::collections::BTreeMap;

use facet_core::annotation::{
    parse_via, read_dimension_manifest, resolve_dimensions, resolve_dimensions_from_manifest,
    split, stats, write_via, Dataset, ImageRecord, Region,
};
use facet_core::geometry::{Point, Polygon};
use facet_core::testkit::{dimension_manifest, reference_dataset};
use facet_core::Error;
use proptest::prelude::*;

fn polygon_strategy() -> impl Strategy<Value = Polygon> {
    // Half-pixel steps survive a JSON round trip exactly.
    prop::collection::vec((0i32..4000, 0i32..4000), 3..9).prop_map(|v| {
        Polygon::new(
            v.into_iter()
                .map(|(x, y)| Point::new(x as f64 / 2.0, y as f64 / 2.0))
                .collect(),
        )
        .unwrap()
    })
}

fn region_strategy() -> impl Strategy<Value = Region> {
    (polygon_strategy(), prop::option::of("[a-z]{1,8}")).prop_map(|(polygon, class)| {
        let mut attributes = BTreeMap::new();
        if let Some(c) = class {
            attributes.insert("class".to_string(), c);
        }
        Region {
            polygon,
            attributes,
        }
    })
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    prop::collection::vec(
        (
            0u64..1_000_000,
            prop::collection::vec(region_strategy(), 0..5),
        ),
        0..6,
    )
    .prop_map(|imgs| {
        Dataset::new(
            imgs.into_iter()
                .enumerate()
                .map(|(i, (size, regions))| {
                    let mut r = ImageRecord::new(format!("img_{i}.jpg"), size);
                    r.regions = regions;
                    r
                })
                .collect(),
        )
    })
}

proptest! {
    #[test]
    fn via_write_then_parse_is_identity(d in dataset_strategy()) {
        let text = write_via(&d);
        prop_assert_eq!(parse_via(&text).unwrap(), d);
    }
}

fn write_png(dir: &std::path::Path, name: &str, w: u32, h: u32) {
    image::RgbImage::new(w, h).save(dir.join(name)).unwrap();
}

const TWO_IMAGES: &str = r#"{
  "a.png10": {"filename": "a.png", "size": 10, "file_attributes": {}, "regions": [
    {"shape_attributes": {"name": "polygon", "all_points_x": [1, 23, 20], "all_points_y": [1, 2, 9]}, "region_attributes": {}}]},
  "b.png11": {"filename": "b.png", "size": 11, "file_attributes": {}, "regions": [
    {"shape_attributes": {"name": "polygon", "all_points_x": [0, 5, 5], "all_points_y": [0, 0, 5]}, "region_attributes": {}}]}
}"#;

#[test]
fn resolves_from_files_and_clamps_overhang() {
    let dir = tempfile::tempdir().unwrap();
    write_png(dir.path(), "a.png", 20, 12);
    write_png(dir.path(), "b.png", 8, 8);
    let d = parse_via(TWO_IMAGES).unwrap();
    let (r, report) = resolve_dimensions(&d, dir.path()).unwrap();
    assert_eq!((r.images[0].width, r.images[0].height), (20, 12));
    assert_eq!((r.images[1].width, r.images[1].height), (8, 8));
    // Only x = 23 lies outside a 20-pixel-wide canvas.
    assert_eq!(report.clamped_vertices, 1);
    assert_eq!(report.regions, vec![("a.png".to_string(), 0, 1)]);
    assert_eq!(
        r.images[0].regions[0].polygon.points()[1],
        Point::new(20.0, 2.0)
    );
}

#[test]
fn missing_image_is_named() {
    let dir = tempfile::tempdir().unwrap();
    write_png(dir.path(), "a.png", 20, 12);
    let err = resolve_dimensions(&parse_via(TWO_IMAGES).unwrap(), dir.path()).unwrap_err();
    assert!(matches!(err, Error::MissingImage(_)));
    assert!(err.to_string().contains("b.png"), "{err}");
}

#[test]
fn manifest_matches_file_sniffing() {
    let dir = tempfile::tempdir().unwrap();
    write_png(dir.path(), "a.png", 20, 12);
    write_png(dir.path(), "b.png", 8, 8);
    let d = parse_via(TWO_IMAGES).unwrap();
    let from_files = resolve_dimensions(&d, dir.path()).unwrap();
    let manifest = read_dimension_manifest("a.png,20,12\nb.png,8,8\n").unwrap();
    assert_eq!(
        resolve_dimensions_from_manifest(&d, &manifest).unwrap(),
        from_files
    );
}

#[test]
fn reference_dataset_statistics_and_split() {
    let d = reference_dataset();
    let s = stats(&d);
    assert_eq!((s.n_images, s.n_instances), (100, 1540));
    assert!((s.mean_instances_per_image - 15.4).abs() < 1e-12);

    let manifest = read_dimension_manifest(&dimension_manifest(&d)).unwrap();
    let reparsed = parse_via(&write_via(&d)).unwrap();
    assert_eq!(
        resolve_dimensions_from_manifest(&reparsed, &manifest)
            .unwrap()
            .0,
        d
    );

    let (train, val) = split(&d, 0.8, 1234).unwrap();
    assert_eq!((train.len(), val.len()), (80, 20));
    let mut names: Vec<&str> = train
        .images
        .iter()
        .chain(&val.images)
        .map(|i| i.filename.as_str())
        .collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), 100);
}
