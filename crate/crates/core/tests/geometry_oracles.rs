use facet_core::geometry::{
    bbox_iou, decode_delta, encode_delta, mask_iou, rasterize, BBox, Point, Polygon,
};
use facet_core::rng::SplitMix64;

/// Classic crossing-number test, written out independently of the library.
fn pnpoly(xs: &[f64], ys: &[f64], x: f64, y: f64) -> bool {
    let n = xs.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        if (ys[i] > y) != (ys[j] > y) && x < (xs[j] - xs[i]) * (y - ys[i]) / (ys[j] - ys[i]) + xs[i]
        {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn random_polygon(rng: &mut SplitMix64, w: f64, h: f64) -> Polygon {
    let n = 3 + rng.below(8) as usize;
    let pts = (0..n)
        .map(|_| Point::new(rng.uniform(-4.0, w + 4.0), rng.uniform(-4.0, h + 4.0)))
        .collect();
    Polygon::new(pts).unwrap()
}

#[test]
fn rasterize_matches_brute_force_crossing_test() {
    let mut rng = SplitMix64::new(20240611);
    for case in 0..200 {
        let w = 1 + rng.below(64) as usize;
        let h = 1 + rng.below(64) as usize;
        let poly = random_polygon(&mut rng, w as f64, h as f64);
        let m = rasterize(&poly, w, h);
        let (xs, ys) = (poly.xs(), poly.ys());
        for y in 0..h {
            for x in 0..w {
                let want = pnpoly(&xs, &ys, x as f64 + 0.5, y as f64 + 0.5);
                assert_eq!(m.get(x, y), want, "case {case} pixel ({x}, {y}) of {w}x{h}");
            }
        }
    }
}

#[test]
fn box_iou_one_seventh() {
    let a = BBox::new(0.0, 0.0, 2.0, 2.0);
    let b = BBox::new(1.0, 1.0, 3.0, 3.0);
    assert!((bbox_iou(&a, &b) - 1.0 / 7.0).abs() <= 1e-12);
}

#[test]
fn half_overlapping_masks() {
    let a = rasterize(
        &Polygon::from_bbox(&BBox::new(0.0, 0.0, 20.0, 10.0)),
        40,
        40,
    );
    let b = rasterize(
        &Polygon::from_bbox(&BBox::new(10.0, 0.0, 30.0, 10.0)),
        40,
        40,
    );
    // 100 shared pixels over a 300-pixel union.
    assert!((mask_iou(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn delta_round_trip_ten_thousand_pairs() {
    let mut rng = SplitMix64::new(99);
    for _ in 0..10_000 {
        let anchor = BBox::from_center(
            rng.uniform(0.0, 1024.0),
            rng.uniform(0.0, 1024.0),
            rng.uniform(4.0, 512.0),
            rng.uniform(4.0, 512.0),
        );
        let target = BBox::from_center(
            rng.uniform(0.0, 1024.0),
            rng.uniform(0.0, 1024.0),
            rng.uniform(4.0, 512.0),
            rng.uniform(4.0, 512.0),
        );
        let back = decode_delta(&anchor, &encode_delta(&anchor, &target).unwrap()).unwrap();
        for (g, w) in [
            (back.x1, target.x1),
            (back.y1, target.y1),
            (back.x2, target.x2),
            (back.y2, target.y2),
        ] {
            assert!((g - w).abs() <= 1e-9, "{back:?} vs {target:?}");
        }
    }
}
