use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use rdk_core::io::{KITTI_DIVISOR, NYU_DIVISOR};
use rdk_core::metrics::{aggregate, aggregate_pooled, report_from_view};
use rdk_core::{align_pair, EvalOptions, MetricReport, Track, ValidPairView};
use serde::Serialize;

use crate::corpus::{list_by_stem, load_map, MapKind};
use crate::{pool, write_output, Common, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Mean of per-image metrics
    Mean,
    /// Metrics over all pixels of the corpus at once
    Pooled,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Directory of predictions (`.png` depth or `.rdk`)
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth depth (`.png` or `.rdk`)
    #[arg(long)]
    pub gt: PathBuf,
    /// 1 = self-supervised (Abs Rel), 2 = supervised (δ1)
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub track: u8,
    /// How `.rdk` predictions are interpreted
    #[arg(long, value_enum, default_value_t = MapKind::Depth)]
    pub pred_kind: MapKind,
    /// Raw-to-meter divisor for 16-bit PNGs (default 256 on track 1, 1000 on track 2)
    #[arg(long)]
    pub divisor: Option<f64>,
    #[arg(long)]
    pub min_depth: Option<f64>,
    #[arg(long)]
    pub max_depth: Option<f64>,
    /// Rescale predictions by median(gt)/median(pred) per image
    #[arg(long)]
    pub median_scale: Option<bool>,
    #[arg(long, value_enum, default_value_t = Aggregation::Mean)]
    pub aggregation: Aggregation,
    #[command(flatten)]
    pub common: Common,
    /// Report path (stdout when absent)
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct ScoreOptions {
    pub min_depth: f64,
    pub max_depth: f64,
    pub median_scale: bool,
    pub divisor: f64,
    pub pred_kind: &'static str,
}

#[derive(Debug, Serialize)]
pub struct ImageResult {
    pub name: String,
    pub metrics: MetricReport,
}

#[derive(Debug, Serialize)]
pub struct ImageFailure {
    pub name: String,
    pub error: &'static str,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct ScoreReport {
    pub tool_version: &'static str,
    pub track: u8,
    pub aggregation: Aggregation,
    pub options: ScoreOptions,
    pub assumptions: Vec<String>,
    pub images: Vec<ImageResult>,
    pub aggregate: MetricReport,
    pub missing_predictions: Vec<String>,
    pub missing_ground_truth: Vec<String>,
    pub failed: Vec<ImageFailure>,
}

fn resolve(args: &ScoreArgs, track: Track) -> Result<(EvalOptions, f64, Vec<String>)> {
    let defaults = track.default_options();
    let mut assumptions = Vec::new();
    let opts = EvalOptions {
        min_depth: args.min_depth.unwrap_or(defaults.min_depth),
        max_depth: args.max_depth.unwrap_or(defaults.max_depth),
        median_scale: args.median_scale.unwrap_or(defaults.median_scale),
    };
    opts.validate()?;
    if args.median_scale.is_none() {
        assumptions.push(format!("median_scale={} is the assumed default for track {}", opts.median_scale, args.track));
    }
    if args.min_depth.is_none() || args.max_depth.is_none() {
        assumptions.push(format!(
            "depth range [{}, {}] m is the assumed default for track {}",
            opts.min_depth, opts.max_depth, args.track
        ));
    }
    let divisor = match args.divisor {
        Some(d) if d > 0.0 && d.is_finite() => d,
        Some(d) => return Err(Failure::new("invalid_config", format!("divisor {d} must be positive")).into()),
        None => {
            let d = if track == Track::SelfSupervised { KITTI_DIVISOR } else { NYU_DIVISOR };
            assumptions.push(format!("16-bit png divisor {d} is the assumed default for track {}", args.track));
            d
        }
    };
    Ok((opts, divisor, assumptions))
}

pub fn score(args: &ScoreArgs) -> Result<ScoreReport> {
    let track = Track::try_from(args.track)?;
    let (opts, divisor, assumptions) = resolve(args, track)?;
    let gts = list_by_stem(&args.gt, &["png", "rdk"])?;
    let preds = list_by_stem(&args.pred, &["png", "rdk"])?;
    let missing_predictions: Vec<String> = gts.keys().filter(|k| !preds.contains_key(*k)).cloned().collect();
    let missing_ground_truth: Vec<String> = preds.keys().filter(|k| !gts.contains_key(*k)).cloned().collect();
    if args.common.strict && !(missing_predictions.is_empty() && missing_ground_truth.is_empty()) {
        return Err(Failure::new(
            "missing_file",
            format!("unmatched files: predictions missing for {missing_predictions:?}, ground truth missing for {missing_ground_truth:?}"),
        )
        .into());
    }
    let names: Vec<&String> = gts.keys().filter(|k| preds.contains_key(*k)).collect();

    let eval = |name: &String| -> Result<(ValidPairView, MetricReport)> {
        let gt = load_map(&gts[name], MapKind::Depth, divisor, opts.min_depth, opts.max_depth)?;
        let pred = load_map(&preds[name], args.pred_kind, divisor, opts.min_depth, opts.max_depth)?;
        let view = align_pair(&gt, &pred, &opts)?;
        let report = report_from_view(&view)?;
        Ok((view, report))
    };
    let results: Vec<Result<(ValidPairView, MetricReport)>> =
        pool(args.common.jobs)?.install(|| names.par_iter().map(|n| eval(n)).collect());

    let mut images = Vec::new();
    let mut views = Vec::new();
    let mut failed = Vec::new();
    for (name, res) in names.iter().zip(results) {
        match res {
            Ok((view, metrics)) => {
                images.push(ImageResult { name: (*name).clone(), metrics });
                views.push(view);
            }
            Err(e) if args.common.strict => return Err(e.context(format!("scoring `{name}`"))),
            Err(e) => failed.push(ImageFailure {
                name: (*name).clone(),
                error: crate::error_kind(&e),
                message: format!("{e:#}"),
            }),
        }
    }
    let reports: Vec<MetricReport> = images.iter().map(|i| i.metrics).collect();
    let aggregate = match args.aggregation {
        Aggregation::Mean => aggregate(&reports)?,
        Aggregation::Pooled => aggregate_pooled(&views)?,
    };
    Ok(ScoreReport {
        tool_version: env!("CARGO_PKG_VERSION"),
        track: args.track,
        aggregation: args.aggregation,
        options: ScoreOptions {
            min_depth: opts.min_depth,
            max_depth: opts.max_depth,
            median_scale: opts.median_scale,
            divisor,
            pred_kind: match args.pred_kind {
                MapKind::Depth => "depth",
                MapKind::Disparity => "disparity",
            },
        },
        assumptions,
        images,
        aggregate,
        missing_predictions,
        missing_ground_truth,
        failed,
    })
}

pub fn run(args: &ScoreArgs) -> Result<()> {
    let report = score(args)?;
    let mut text = serde_json::to_string_pretty(&report).context("serializing report")?;
    text.push('\n');
    write_output(args.out.as_ref(), &text)
}
