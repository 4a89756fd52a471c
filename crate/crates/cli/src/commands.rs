//! One function per subcommand. Each loads its inputs, calls into
//! `facet_core` and writes artifacts under the output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use facet_core::anchors::{anchors_csv, assign_anchors, generate_anchors};
use facet_core::annotation::{
    kfold, parse_via, read_dimension_manifest, resolve_dimensions,
    resolve_dimensions_from_manifest, split, stats, write_via, ClampReport, Dataset,
};
use facet_core::augment::{apply_plan, plan_augmentation};
use facet_core::eval::{
    load_predictions, resolve_mask_payloads, sweep_confidence, synth_predictions,
    write_predictions, Detection, DetectionMatch, PreparedEval,
};
use facet_core::geometry::polygon_bbox;
use facet_core::render::{
    overlay_filename, read_image, render_overlay, write_image, OverlayItem, OverlayMode,
};
use facet_core::rng::derive_seed;
use facet_core::Error;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::{style, Command, UsageError};

pub fn run(name: &str, cmd: &Command, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    write_manifest(name, cfg)?;
    let seed = derive_seed(cfg.seed, name);
    match cmd {
        Command::Validate { .. } => validate(cfg),
        Command::Stats { .. } => run_stats(cfg),
        Command::Split { .. } => run_split(cfg, seed),
        Command::Kfold { .. } => run_kfold(cfg, seed),
        Command::Augment { .. } => augment(cfg, seed),
        Command::Anchors { image, .. } => anchors(cfg, image.as_deref()),
        Command::Synth { .. } => synth(cfg, seed),
        Command::Eval { .. } => eval(cfg),
        Command::Sweep { .. } => sweep(cfg),
        Command::Render { .. } => render(cfg),
    }
}

fn write_manifest(name: &str, cfg: &RunConfig) -> Result<()> {
    let manifest = json!({
        "tool": "facet",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": name,
        "config": cfg,
    });
    write_text(&cfg.out_dir.join("run-manifest.json"), &pretty(&manifest)?)
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn dataset_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.dataset.as_deref().ok_or_else(|| {
        UsageError("no dataset given (--dataset or \"dataset\" in the config)".into()).into()
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Parsed annotations with dimensions from the manifest or image headers,
/// when either is configured.
fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let path = dataset_path(cfg)?;
    let d = parse_via(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let (d, clamp) = if let Some(m) = &cfg.dims_manifest {
        let manifest = read_dimension_manifest(&read(m)?)?;
        resolve_dimensions_from_manifest(&d, &manifest)?
    } else if let Some(dir) = &cfg.image_dir {
        resolve_dimensions(&d, dir)?
    } else {
        (d, ClampReport::default())
    };
    report_clamps(&clamp);
    Ok(d)
}

fn report_clamps(c: &ClampReport) {
    if c.clamped_vertices > 0 {
        eprintln!(
            "{} clamped {} vertices in {} regions onto the image canvas",
            style::warning_label(),
            c.clamped_vertices,
            c.regions.len()
        );
    }
}

fn load_detections(cfg: &RunConfig) -> Result<Vec<Detection>> {
    let path = cfg
        .predictions
        .as_deref()
        .ok_or_else(|| UsageError("no predictions given (--predictions)".into()))?;
    let mut dets =
        load_predictions(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve_mask_payloads(&mut dets, base)?;
    Ok(dets)
}

fn validate(cfg: &RunConfig) -> Result<()> {
    let path = dataset_path(cfg)?;
    let mut problems = match parse_via(&read(path)?) {
        Ok(d) => {
            let mut p = d.violations();
            if p.is_empty() && (cfg.dims_manifest.is_some() || cfg.image_dir.is_some()) {
                if let Err(e) = load_dataset(cfg) {
                    p.push(format!("{e:#}"));
                }
            }
            if p.is_empty() {
                println!(
                    "{}: {} images, {} instances, no problems",
                    path.display(),
                    d.len(),
                    d.n_instances()
                );
                return Ok(());
            }
            p
        }
        Err(Error::InvalidAnnotations(list)) => list,
        Err(e) => vec![e.to_string()],
    };
    problems.sort();
    for p in &problems {
        println!("{p}");
    }
    bail!("{}: {} problem(s)", path.display(), problems.len())
}

fn run_stats(cfg: &RunConfig) -> Result<()> {
    let s = stats(&load_dataset(cfg)?);
    println!("images: {}", s.n_images);
    println!("instances: {}", s.n_instances);
    println!("mean instances per image: {}", s.mean_instances_per_image);
    for (count, images) in &s.histogram {
        println!("  {count:>4} instances: {images} images");
    }
    write_text(&cfg.out_dir.join("stats.json"), &pretty(&s)?)
}

fn names(d: &Dataset, idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| d.images[i].filename.clone()).collect()
}

fn run_split(cfg: &RunConfig, seed: u64) -> Result<()> {
    let d = load_dataset(cfg)?;
    let (train, val) = split(&d, cfg.split.train_fraction, seed)?;
    write_text(&cfg.out_dir.join("train.json"), &write_via(&train))?;
    write_text(&cfg.out_dir.join("val.json"), &write_via(&val))?;
    let listing = json!({
        "seed": seed,
        "train": train.images.iter().map(|i| &i.filename).collect::<Vec<_>>(),
        "val": val.images.iter().map(|i| &i.filename).collect::<Vec<_>>(),
    });
    write_text(&cfg.out_dir.join("split.json"), &pretty(&listing)?)?;
    println!("train: {} images, val: {} images", train.len(), val.len());
    Ok(())
}

fn run_kfold(cfg: &RunConfig, seed: u64) -> Result<()> {
    let d = load_dataset(cfg)?;
    let folds = kfold(&d, cfg.split.folds, seed)?;
    let mut listing = Vec::new();
    for (i, f) in folds.folds.iter().enumerate() {
        write_text(
            &cfg.out_dir.join(format!("fold_{i}_train.json")),
            &write_via(&d.select(&f.train)),
        )?;
        write_text(
            &cfg.out_dir.join(format!("fold_{i}_val.json")),
            &write_via(&d.select(&f.val)),
        )?;
        listing.push(json!({"fold": i, "train": names(&d, &f.train), "val": names(&d, &f.val)}));
        println!("fold {i}: train {} / val {}", f.train.len(), f.val.len());
    }
    let out = json!({"seed": seed, "k": folds.k, "folds": listing});
    write_text(&cfg.out_dir.join("folds.json"), &pretty(&out)?)
}

fn augment(cfg: &RunConfig, seed: u64) -> Result<()> {
    let d = load_dataset(cfg)?;
    let plan = plan_augmentation(&d, seed, cfg.augment.copies, &cfg.augment.ranges())?;
    let out = apply_plan(&d, &plan)?;
    report_clamps(&out.clamp);
    for (file, region) in &out.dropped_regions {
        eprintln!(
            "{} {file}: region {region} left the canvas and was dropped",
            style::warning_label()
        );
    }
    write_text(
        &cfg.out_dir.join("augmented.json"),
        &write_via(&out.dataset),
    )?;
    write_text(
        &cfg.out_dir.join("transforms.json"),
        &pretty(&out.transforms)?,
    )?;
    println!(
        "{} augmented images, {} instances",
        out.dataset.len(),
        out.dataset.n_instances()
    );
    Ok(())
}

fn anchors(cfg: &RunConfig, image: Option<&str>) -> Result<()> {
    let a = &cfg.anchors;
    let grid = generate_anchors(&a.anchor_config(), a.fmap_width, a.fmap_height)?;
    let csv = match image {
        Some(name) => {
            let d = load_dataset(cfg)?;
            let img = d
                .find(name)
                .ok_or_else(|| anyhow!("{name} is not in the dataset"))?;
            let gts: Vec<_> = img
                .regions
                .iter()
                .map(|r| polygon_bbox(&r.polygon))
                .collect();
            let (labels, best) = assign_anchors(&grid, &gts, a.pos_iou, a.neg_iou)?;
            anchors_csv(&grid, &best, Some(&labels))
        }
        None => anchors_csv(&grid, &[], None),
    };
    write_text(&cfg.out_dir.join("anchors.csv"), &csv)?;
    println!(
        "{} anchors ({} x {} cells, {} per cell)",
        grid.len(),
        a.fmap_width,
        a.fmap_height,
        a.anchor_config().k()
    );
    Ok(())
}

fn synth(cfg: &RunConfig, seed: u64) -> Result<()> {
    let d = load_dataset(cfg)?;
    let preds = synth_predictions(&d, &cfg.synth.spec(seed))?;
    write_text(
        &cfg.out_dir.join("predictions.jsonl"),
        &write_predictions(&preds)?,
    )?;
    println!("{} predictions for {} images", preds.len(), d.len());
    Ok(())
}

fn eval(cfg: &RunConfig) -> Result<()> {
    let d = load_dataset(cfg)?;
    let dets = load_detections(cfg)?;
    let ec = cfg.eval();
    let report = PreparedEval::new(&dets, &d, ec.iou_kind)?.report(&ec)?;
    write_text(&cfg.out_dir.join("report.json"), &pretty(&report)?)?;
    write_text(&cfg.out_dir.join("report.csv"), &report.per_image_csv())?;
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
    println!(
        "images {}  gt {}  predictions {}  tp {}  fp {}  fn {}",
        report.n_images,
        report.n_gt,
        report.n_predictions,
        report.counts.tp,
        report.counts.fp,
        report.counts.fn_
    );
    println!(
        "precision {:.4}  recall {:.4}  f1 {:.4}  mAP {:.4}  pixel accuracy {}",
        report.precision,
        report.recall,
        report.f1,
        report.map,
        opt(report.pixel_accuracy.micro)
    );
    Ok(())
}

fn sweep(cfg: &RunConfig) -> Result<()> {
    let d = load_dataset(cfg)?;
    let dets = load_detections(cfg)?;
    let rows = sweep_confidence(&dets, &d, &cfg.eval(), &cfg.thresholds)?;
    let mut csv = String::from("threshold,precision,recall,f1,map,n_predictions\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.threshold, r.precision, r.recall, r.f1, r.map, r.n_predictions
        ));
        println!(
            "t={:<5} precision {:.4}  recall {:.4}  f1 {:.4}  mAP {:.4}",
            r.threshold, r.precision, r.recall, r.f1, r.map
        );
    }
    write_text(&cfg.out_dir.join("sweep.csv"), &csv)
}

fn render(cfg: &RunConfig) -> Result<()> {
    let dir = cfg
        .image_dir
        .as_deref()
        .ok_or_else(|| UsageError("render needs --image-dir".into()))?;
    let mut d = load_dataset(cfg)?;
    let spec = cfg.render.overlay();
    let dets = if spec.mode == OverlayMode::GtOnly && cfg.predictions.is_none() {
        Vec::new()
    } else {
        load_detections(cfg)?
    };
    let images: Vec<_> = d
        .images
        .iter()
        .map(|img| read_image(&dir.join(&img.filename)).map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;
    for (rec, px) in d.images.iter_mut().zip(&images) {
        if !rec.is_resolved() {
            rec.width = px.width();
            rec.height = px.height();
        }
    }
    let report = PreparedEval::new(&dets, &d, cfg.iou_kind)?.report(&cfg.eval())?;
    let mut by_image: BTreeMap<&str, Vec<&DetectionMatch>> = BTreeMap::new();
    for m in &report.detections {
        by_image.entry(m.image.as_str()).or_default().push(m);
    }
    let out_dir: PathBuf = cfg.out_dir.join("overlays");
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for (rec, px) in d.images.iter().zip(&images) {
        let items: Vec<OverlayItem> = by_image
            .get(rec.filename.as_str())
            .map(|ms| {
                ms.iter()
                    .map(|m| OverlayItem {
                        detection: &dets[m.detection],
                        matched: Some(*m),
                    })
                    .collect()
            })
            .unwrap_or_default();
        let out = render_overlay(px, rec, &items, &spec)?;
        let name = overlay_filename(&rec.filename, spec.mode, cfg.render.format);
        write_image(&out, &out_dir.join(name), cfg.render.format)?;
    }
    println!("{} overlays written to {}", d.len(), out_dir.display());
    Ok(())
}
