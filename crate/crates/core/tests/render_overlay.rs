use facet_core::annotation::{ImageRecord, Region};
use facet_core::eval::{Detection, Payload};
use facet_core::geometry::{BBox, Polygon};
use facet_core::render::{
    decode_ppm, font, read_image, render_overlay, write_image, Caption, ImageKind, OverlayItem,
    OverlayMode, OverlaySpec, CAPTION_FG, PRED_COLOR,
};
use image::{Rgb, RgbImage};

fn record(boxes: &[BBox]) -> ImageRecord {
    let mut r = ImageRecord::new("f.jpg", 1);
    r.width = 64;
    r.height = 48;
    r.regions = boxes
        .iter()
        .map(|b| Region::new(Polygon::from_bbox(b)))
        .collect();
    r
}

fn background() -> RgbImage {
    RgbImage::from_fn(64, 48, |x, y| Rgb([x as u8 * 3, y as u8 * 5, 17]))
}

#[test]
fn score_caption_glyphs_land_top_left() {
    let det = Detection {
        image: "f.jpg".into(),
        class: "window".into(),
        score: 0.5,
        payload: Payload::BBox(BBox::new(10.0, 12.0, 40.0, 40.0)),
    };
    let spec = OverlaySpec {
        mode: OverlayMode::PredOnly,
        caption: Caption::Score,
        fill_alpha: 0.0,
        outline_width: 0,
        caption_scale: 1,
    };
    let out = render_overlay(
        &background(),
        &record(&[]),
        &[OverlayItem {
            detection: &det,
            matched: None,
        }],
        &spec,
    )
    .unwrap();
    let mut want = Vec::new();
    font::for_each_pixel("0.50", 1, |dx, dy| {
        want.push((11 + dx as u32, 13 + dy as u32))
    });
    assert!(!want.is_empty());
    let (tw, th) = font::text_size("0.50", 1);
    for y in 12..12 + th as u32 + 2 {
        for x in 10..10 + tw as u32 + 2 {
            let fg = out.get_pixel(x, y).0 == CAPTION_FG;
            assert_eq!(fg, want.contains(&(x, y)), "({x}, {y})");
        }
    }
}

#[test]
fn overlap_mode_paints_predictions_red() {
    let det = Detection {
        image: "f.jpg".into(),
        class: "window".into(),
        score: 0.99,
        payload: Payload::BBox(BBox::new(30.0, 5.0, 50.0, 25.0)),
    };
    let spec = OverlaySpec {
        fill_alpha: 1.0,
        caption: Caption::None,
        ..OverlaySpec::default()
    };
    let out = render_overlay(
        &background(),
        &record(&[BBox::new(2.0, 2.0, 12.0, 12.0)]),
        &[OverlayItem {
            detection: &det,
            matched: None,
        }],
        &spec,
    )
    .unwrap();
    assert_eq!(out.get_pixel(40, 15).0, PRED_COLOR);
    assert_eq!(out.get_pixel(5, 5).0, [0, 255, 0]);
    assert_eq!(out.get_pixel(60, 40), background().get_pixel(60, 40));
}

#[test]
fn ppm_and_png_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let img = background();
    for kind in [ImageKind::Ppm, ImageKind::Png] {
        let path = dir.path().join(format!("x.{}", kind.extension()));
        write_image(&img, &path, kind).unwrap();
        assert_eq!(read_image(&path).unwrap(), img);
    }
    let bytes = std::fs::read(dir.path().join("x.ppm")).unwrap();
    assert!(bytes.starts_with(b"P6\n64 48\n255\n"));
    assert_eq!(decode_ppm(&bytes).unwrap(), img);
}

#[test]
fn unwritable_destination_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("x.ppm");
    assert!(write_image(&background(), &path, ImageKind::Ppm).is_err());
}
