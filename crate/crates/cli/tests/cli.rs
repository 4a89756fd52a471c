mod common;

use common::*;
use facet_core::annotation::Dataset;

fn synth_then_eval(
    fx: &Fixture,
    d: &Dataset,
    extra_synth: &[&str],
) -> (std::path::PathBuf, std::path::PathBuf) {
    let (via, dims) = fx.dataset("data", d);
    let out = fx.path("synth");
    let mut args = vec![
        "synth",
        "--dataset",
        p(&via),
        "--dims-manifest",
        p(&dims),
        "--out-dir",
        p(&out),
    ];
    args.extend_from_slice(extra_synth);
    ok(&facet(&args));
    (via, dims)
}

#[test]
fn stats_prints_counts() {
    let fx = Fixture::new();
    let (via, _) = fx.dataset("ref", &reference());
    let out = ok(&facet([
        "stats",
        "--dataset",
        p(&via),
        "--out-dir",
        p(&fx.path("o")),
    ]));
    assert!(out.contains("images: 100\n"), "{out}");
    assert!(out.contains("instances: 1540\n"));
    assert!(out.contains("mean instances per image: 15.4\n"));
    assert_eq!(json(&fx.path("o/stats.json"))["n_instances"], 1540);
}

#[test]
fn every_run_writes_a_manifest_with_flags_over_config() {
    let fx = Fixture::new();
    let (via, dims) = fx.dataset("d", &twenty_images());
    let cfg = fx.write(
        "cfg.json",
        r#"{"score_threshold": 0.3, "iou_threshold": 0.6, "seed": 9}"#,
    );
    ok(&facet([
        "synth",
        "--dataset",
        p(&via),
        "--out-dir",
        p(&fx.path("s")),
    ]));
    let preds = fx.path("s/predictions.jsonl");
    ok(&facet([
        "eval",
        "--config",
        p(&cfg),
        "--dataset",
        p(&via),
        "--dims-manifest",
        p(&dims),
        "--predictions",
        p(&preds),
        "--score-threshold",
        "0.7",
        "--out-dir",
        p(&fx.path("e")),
    ]));
    let m = json(&fx.path("e/run-manifest.json"));
    assert_eq!(m["tool"], "facet");
    assert_eq!(m["subcommand"], "eval");
    assert_eq!(m["config"]["score_threshold"], 0.7);
    assert_eq!(m["config"]["iou_threshold"], 0.6);
    assert_eq!(m["config"]["seed"], 9);
    assert_eq!(m["config"]["ap_mode"], "per_image_mean");
    assert!(m["version"].is_string());
}

#[test]
fn usage_errors_exit_two() {
    let fx = Fixture::new();
    assert_eq!(facet(["stats", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(facet(["frobnicate"]).status.code(), Some(2));
    let bad = fx.write("bad.json", r#"{"score_threshold": "high"}"#);
    let out = facet(["stats", "--config", p(&bad), "--dataset", "x.json"]);
    assert_eq!(out.status.code(), Some(2));
    let unknown = fx.write("unknown.json", r#"{"scor_threshold": 0.5}"#);
    assert_eq!(
        facet(["stats", "--config", p(&unknown)]).status.code(),
        Some(2)
    );
    assert_eq!(
        facet([
            "eval",
            "--iou-threshold",
            "1.5",
            "--out-dir",
            p(&fx.path("o"))
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        facet(["stats", "--out-dir", p(&fx.path("o"))])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn validate_lists_every_problem() {
    let fx = Fixture::new();
    let bad = fx.write(
        "bad.json",
        r#"{
          "a.jpg1": {"filename": "a.jpg", "size": 1, "file_attributes": {}, "regions": [
            {"shape_attributes": {"name": "polygon", "all_points_x": [0, 1], "all_points_y": [0, 1]}, "region_attributes": {}},
            {"shape_attributes": {"name": "rect", "x": 0, "y": 0, "width": 4, "height": 4}, "region_attributes": {}}]}
        }"#,
    );
    let out = facet([
        "validate",
        "--dataset",
        p(&bad),
        "--out-dir",
        p(&fx.path("o")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let listed = String::from_utf8_lossy(&out.stdout);
    assert!(listed.contains("region 0"), "{listed}");
    assert!(listed.contains("region 1"), "{listed}");

    let (good, _) = fx.dataset("good", &twenty_images());
    ok(&facet([
        "validate",
        "--dataset",
        p(&good),
        "--out-dir",
        p(&fx.path("o")),
    ]));
}

#[test]
fn validate_reports_missing_images() {
    let fx = Fixture::new();
    let (via, _) = fx.dataset("d", &twenty_images());
    std::fs::create_dir(fx.path("imgs")).unwrap();
    let out = facet([
        "validate",
        "--dataset",
        p(&via),
        "--image-dir",
        p(&fx.path("imgs")),
        "--out-dir",
        p(&fx.path("o")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("facade_000.jpg"));
}

#[test]
fn eval_fails_on_unknown_images() {
    let fx = Fixture::new();
    let (via, dims) = fx.dataset("d", &twenty_images());
    let preds = fx.write("p.jsonl", "{\"image\": \"ghost.jpg\", \"class\": \"window\", \"score\": 0.95, \"bbox\": [0, 0, 4, 4]}\n");
    let out = facet([
        "eval",
        "--dataset",
        p(&via),
        "--dims-manifest",
        p(&dims),
        "--predictions",
        p(&preds),
        "--out-dir",
        p(&fx.path("o")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ghost.jpg"));
    assert!(!String::from_utf8_lossy(&out.stderr).contains('\x1b'));
}

#[test]
fn sweep_recall_does_not_rise_with_threshold() {
    let fx = Fixture::new();
    let d = twenty_images();
    let (via, dims) = synth_then_eval(
        &fx,
        &d,
        &[
            "--score-noise",
            "0.8",
            "--spurious-rate",
            "0.3",
            "--drop-rate",
            "0.1",
        ],
    );
    ok(&facet([
        "sweep",
        "--dataset",
        p(&via),
        "--dims-manifest",
        p(&dims),
        "--predictions",
        p(&fx.path("synth/predictions.jsonl")),
        "--thresholds",
        "0.5,0.7,0.9",
        "--out-dir",
        p(&fx.path("sw")),
    ]));
    let csv = std::fs::read_to_string(fx.path("sw/sweep.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(
        rows.iter().map(|r| r[0]).collect::<Vec<_>>(),
        vec![0.5, 0.7, 0.9]
    );
    assert!(
        rows[0][2] >= rows[1][2] && rows[1][2] >= rows[2][2],
        "{csv}"
    );
    assert!(rows[0][2] > rows[2][2], "{csv}");
}

#[test]
fn split_and_kfold_partition_the_images() {
    let fx = Fixture::new();
    let (via, _) = fx.dataset("ref", &reference());
    let out = ok(&facet([
        "split",
        "--dataset",
        p(&via),
        "--out-dir",
        p(&fx.path("s")),
    ]));
    assert!(out.contains("train: 80 images, val: 20 images"), "{out}");
    let listing = json(&fx.path("s/split.json"));
    assert_eq!(listing["train"].as_array().unwrap().len(), 80);

    ok(&facet([
        "kfold",
        "--dataset",
        p(&via),
        "-k",
        "3",
        "--out-dir",
        p(&fx.path("k")),
    ]));
    let folds = json(&fx.path("k/folds.json"));
    let sizes: Vec<usize> = folds["folds"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["val"].as_array().unwrap().len())
        .collect();
    assert_eq!(sizes, vec![34, 33, 33]);
    assert!(fx.path("k/fold_2_val.json").is_file());
}

#[test]
fn seeds_change_splits_reproducibly() {
    let fx = Fixture::new();
    let (via, _) = fx.dataset("ref", &reference());
    let run = |seed: &str, dir: &str| {
        ok(&facet([
            "split",
            "--dataset",
            p(&via),
            "--seed",
            seed,
            "--out-dir",
            p(&fx.path(dir)),
        ]));
        std::fs::read(fx.path(&format!("{dir}/split.json"))).unwrap()
    };
    assert_eq!(run("3", "a"), run("3", "b"));
    assert_ne!(run("3", "a"), run("4", "c"));
}

#[test]
fn augment_writes_annotations_and_sidecar() {
    let fx = Fixture::new();
    let (via, dims) = fx.dataset("d", &twenty_images());
    ok(&facet([
        "augment",
        "--dataset",
        p(&via),
        "--dims-manifest",
        p(&dims),
        "--copies",
        "2",
        "--out-dir",
        p(&fx.path("a")),
    ]));
    let t = json(&fx.path("a/transforms.json"));
    let t = t.as_array().unwrap();
    assert_eq!(t.len(), 40);
    assert_eq!(t[0]["matrix"].as_array().unwrap().len(), 3);
    let aug = facet_core::annotation::parse_via(
        &std::fs::read_to_string(fx.path("a/augmented.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(aug.len(), 40);
    assert!(aug.images[0].filename.starts_with("facade_000.aug0_"));
}

#[test]
fn augment_needs_dimensions() {
    let fx = Fixture::new();
    let (via, _) = fx.dataset("d", &twenty_images());
    let out = facet([
        "augment",
        "--dataset",
        p(&via),
        "--out-dir",
        p(&fx.path("a")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn anchors_csv_labelled_against_an_image() {
    let fx = Fixture::new();
    let (via, dims) = fx.dataset("d", &twenty_images());
    ok(&facet([
        "anchors",
        "--fmap-width",
        "16",
        "--fmap-height",
        "16",
        "--dataset",
        p(&via),
        "--dims-manifest",
        p(&dims),
        "--image",
        "facade_003.jpg",
        "--out-dir",
        p(&fx.path("a")),
    ]));
    let csv = std::fs::read_to_string(fx.path("a/anchors.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x1,y1,x2,y2,score,label"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 16 * 16 * 9);
    assert!(rows.iter().any(|r| r.ends_with(",foreground")));
    assert!(rows.iter().any(|r| r.ends_with(",background")));
}

#[test]
fn render_writes_named_overlays() {
    let fx = Fixture::new();
    let d = facet_core::testkit::facade_dataset(2, |_| 4, 96, 64, 3);
    let (via, _) = fx.dataset("d", &d);
    std::fs::create_dir(fx.path("imgs")).unwrap();
    for img in &d.images {
        image::RgbImage::from_pixel(96, 64, image::Rgb([40, 40, 40]))
            .save_with_format(
                fx.path("imgs").join(&img.filename),
                image::ImageFormat::Jpeg,
            )
            .unwrap();
    }
    ok(&facet([
        "synth",
        "--dataset",
        p(&via),
        "--out-dir",
        p(&fx.path("s")),
    ]));
    ok(&facet([
        "render",
        "--dataset",
        p(&via),
        "--image-dir",
        p(&fx.path("imgs")),
        "--predictions",
        p(&fx.path("s/predictions.jsonl")),
        "--format",
        "ppm",
        "--mode",
        "overlap",
        "--out-dir",
        p(&fx.path("r")),
    ]));
    let ppm = std::fs::read(fx.path("r/overlays/facade_001.overlap.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n96 64\n255\n"));
    let img = facet_core::render::decode_ppm(&ppm).unwrap();
    assert!(img.pixels().any(|px| px.0 == [255, 0, 0]));

    ok(&facet([
        "render",
        "--dataset",
        p(&via),
        "--image-dir",
        p(&fx.path("imgs")),
        "--mode",
        "gt_only",
        "--out-dir",
        p(&fx.path("g")),
    ]));
    assert!(fx.path("g/overlays/facade_000.gt_only.png").is_file());
}
