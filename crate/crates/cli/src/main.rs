//! `facet`: dataset preparation and evaluation for facade window
//! segmentation.

mod commands;
mod config;
mod style;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use facet_core::eval::{ApMode, IouKind};
use facet_core::render::{Caption, ImageKind, OverlayMode};
use serde::de::DeserializeOwned;

use config::RunConfig;

/// Bad invocation or configuration; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(
    name = "facet",
    version,
    about = "Window instance segmentation: dataset tooling and evaluation"
)]
struct Cli {
    /// JSON run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; each subcommand derives its own stream from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for data-parallel steps (results do not depend on it).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Directory for artifacts and run-manifest.json.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct DataArgs {
    /// VIA annotation JSON.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Directory holding the annotated images.
    #[arg(long)]
    image_dir: Option<PathBuf>,
    /// `filename,width,height` CSV used instead of reading image headers.
    #[arg(long)]
    dims_manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct EvalArgs {
    /// Predictions as JSON lines.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long)]
    iou_threshold: Option<f64>,
    #[arg(long)]
    score_threshold: Option<f64>,
    /// mask or box.
    #[arg(long, value_parser = parse_enum::<IouKind>)]
    iou_kind: Option<IouKind>,
    /// per_image_mean or dataset_wide.
    #[arg(long, value_parser = parse_enum::<ApMode>)]
    ap_mode: Option<ApMode>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse annotations and list every problem found.
    Validate {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Image and instance counts.
    Stats {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Seeded train/validation split.
    Split {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        train_fraction: Option<f64>,
    },
    /// Seeded k-fold partition.
    Kfold {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, short = 'k')]
        folds: Option<usize>,
    },
    /// Flip and rotate/shear annotations.
    Augment {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        copies: Option<usize>,
        #[arg(long)]
        max_rotation_deg: Option<f64>,
        #[arg(long)]
        max_shear_deg: Option<f64>,
        #[arg(long)]
        flip_probability: Option<f64>,
    },
    /// Dump the anchor grid, optionally labelled against one image.
    Anchors {
        #[command(flatten)]
        data: DataArgs,
        /// Image whose regions label the anchors.
        #[arg(long)]
        image: Option<String>,
        #[arg(long)]
        fmap_width: Option<usize>,
        #[arg(long)]
        fmap_height: Option<usize>,
        #[arg(long)]
        stride: Option<u32>,
        #[arg(long, value_delimiter = ',')]
        scales: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
    },
    /// Synthetic predictions derived from the ground truth.
    Synth {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        drop_rate: Option<f64>,
        #[arg(long)]
        spurious_rate: Option<f64>,
        #[arg(long)]
        jitter_px: Option<f64>,
        #[arg(long)]
        score_noise: Option<f64>,
    },
    /// Match predictions and write the metric report.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Metrics over a list of score thresholds.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
    },
    /// Draw ground truth and predictions over the images.
    Render {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        eval: EvalArgs,
        /// gt_only, pred_only or overlap.
        #[arg(long, value_parser = parse_enum::<OverlayMode>)]
        mode: Option<OverlayMode>,
        /// none, class, score or score_iou.
        #[arg(long, value_parser = parse_enum::<Caption>)]
        caption: Option<Caption>,
        #[arg(long)]
        fill_alpha: Option<f64>,
        #[arg(long)]
        outline_width: Option<u32>,
        #[arg(long)]
        caption_scale: Option<u32>,
        /// ppm or png.
        #[arg(long, value_parser = parse_enum::<ImageKind>)]
        format: Option<ImageKind>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Stats { .. } => "stats",
            Command::Split { .. } => "split",
            Command::Kfold { .. } => "kfold",
            Command::Augment { .. } => "augment",
            Command::Anchors { .. } => "anchors",
            Command::Synth { .. } => "synth",
            Command::Eval { .. } => "eval",
            Command::Sweep { .. } => "sweep",
            Command::Render { .. } => "render",
        }
    }
}

/// Parses a snake_case enum value the same way the config file does.
fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_data(c: &mut RunConfig, d: DataArgs) {
    if d.dataset.is_some() {
        c.dataset = d.dataset;
    }
    if d.image_dir.is_some() {
        c.image_dir = d.image_dir;
    }
    if d.dims_manifest.is_some() {
        c.dims_manifest = d.dims_manifest;
    }
}

fn apply_eval(c: &mut RunConfig, e: EvalArgs) {
    if e.predictions.is_some() {
        c.predictions = e.predictions;
    }
    set(&mut c.iou_threshold, e.iou_threshold);
    set(&mut c.score_threshold, e.score_threshold);
    set(&mut c.iou_kind, e.iou_kind);
    set(&mut c.ap_mode, e.ap_mode);
}

/// Defaults, then the config file, then flags.
fn resolve(cli: &mut Cli) -> Result<RunConfig, UsageError> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut c.seed, cli.seed);
    set(&mut c.out_dir, cli.out_dir.take());
    match &mut cli.command {
        Command::Validate { data } | Command::Stats { data } => {
            apply_data(&mut c, std::mem::take(data))
        }
        Command::Split {
            data,
            train_fraction,
        } => {
            apply_data(&mut c, std::mem::take(data));
            set(&mut c.split.train_fraction, *train_fraction);
        }
        Command::Kfold { data, folds } => {
            apply_data(&mut c, std::mem::take(data));
            set(&mut c.split.folds, *folds);
        }
        Command::Augment {
            data,
            copies,
            max_rotation_deg,
            max_shear_deg,
            flip_probability,
        } => {
            apply_data(&mut c, std::mem::take(data));
            set(&mut c.augment.copies, *copies);
            set(&mut c.augment.max_rotation_deg, *max_rotation_deg);
            set(&mut c.augment.max_shear_deg, *max_shear_deg);
            set(&mut c.augment.flip_probability, *flip_probability);
        }
        Command::Anchors {
            data,
            fmap_width,
            fmap_height,
            stride,
            scales,
            ratios,
            ..
        } => {
            apply_data(&mut c, std::mem::take(data));
            set(&mut c.anchors.fmap_width, *fmap_width);
            set(&mut c.anchors.fmap_height, *fmap_height);
            set(&mut c.anchors.stride, *stride);
            set(&mut c.anchors.scales, scales.take());
            set(&mut c.anchors.ratios, ratios.take());
        }
        Command::Synth {
            data,
            drop_rate,
            spurious_rate,
            jitter_px,
            score_noise,
        } => {
            apply_data(&mut c, std::mem::take(data));
            set(&mut c.synth.drop_rate, *drop_rate);
            set(&mut c.synth.spurious_rate, *spurious_rate);
            set(&mut c.synth.jitter_px, *jitter_px);
            set(&mut c.synth.score_noise, *score_noise);
        }
        Command::Eval { data, eval } => {
            apply_data(&mut c, std::mem::take(data));
            apply_eval(&mut c, std::mem::take(eval));
        }
        Command::Sweep {
            data,
            eval,
            thresholds,
        } => {
            apply_data(&mut c, std::mem::take(data));
            apply_eval(&mut c, std::mem::take(eval));
            set(&mut c.thresholds, thresholds.take());
        }
        Command::Render {
            data,
            eval,
            mode,
            caption,
            fill_alpha,
            outline_width,
            caption_scale,
            format,
        } => {
            apply_data(&mut c, std::mem::take(data));
            apply_eval(&mut c, std::mem::take(eval));
            set(&mut c.render.mode, *mode);
            set(&mut c.render.caption, *caption);
            set(&mut c.render.fill_alpha, *fill_alpha);
            set(&mut c.render.outline_width, *outline_width);
            set(&mut c.render.caption_scale, *caption_scale);
            set(&mut c.render.format, *format);
        }
    }
    c.validate()?;
    Ok(c)
}

fn main() -> ExitCode {
    let mut cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let cfg = match resolve(&mut cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{} {e}", style::error_label());
            return ExitCode::from(2);
        }
    };
    if cli.jobs == Some(0) {
        eprintln!("{} --jobs must be at least 1", style::error_label());
        return ExitCode::from(2);
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{} cannot start worker pool: {e}", style::error_label());
            return ExitCode::from(1);
        }
    };
    let name = cli.command.name();
    match pool.install(|| commands::run(name, &cli.command, &cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{} {e:#}", style::error_label());
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
