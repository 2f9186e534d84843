use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use rdk_core::ensemble::{gated_fuse, median_fuse, routed_fuse, weighted_fuse, GatedParams, RoutingTable};
use rdk_core::DepthMap;
use serde::Serialize;

use crate::corpus::{list_by_stem, load_map, save_depth, MapKind};
use crate::{pool, Common, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Harmonic blend of two maps where their inverse depths agree
    Gated,
    /// Mean of median-normalized maps
    Median,
    /// Fixed convex weights
    Weighted,
    /// Per-image weights looked up by class label
    Routed,
}

#[derive(Args, Debug)]
pub struct FuseArgs {
    #[arg(long, value_enum)]
    pub strategy: Strategy,
    /// Input directories, one per ensemble member (files matched by stem)
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Output directory; each file keeps the format of the first input's file
    #[arg(long)]
    pub output: PathBuf,
    /// Gated parameters JSON (`alpha`, `beta`, `eta`, `mode`)
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Comma-separated weights for `weighted`
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<f64>,
    /// Routing table JSON mapping class label to weights
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Two-column CSV (filename, class) for `routed`
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Raw-to-meter divisor for 16-bit PNGs
    #[arg(long, default_value_t = 256.0)]
    pub divisor: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Serialize)]
pub struct FuseSummary {
    pub strategy: Strategy,
    pub fused: Vec<String>,
    pub missing: Vec<String>,
    pub failed: Vec<String>,
}

fn read_labels(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let (Some(file), Some(class)) = (record.get(0), record.get(1)) else {
            return Err(Failure::new("format", "label rows need filename and class").into());
        };
        let stem = Path::new(file).file_stem().and_then(|s| s.to_str()).unwrap_or(file);
        out.insert(stem.to_string(), class.to_string());
    }
    Ok(out)
}

enum Fuser {
    Gated(GatedParams),
    Median,
    Weighted(Vec<f64>),
    Routed(RoutingTable, BTreeMap<String, String>),
}

impl Fuser {
    fn from_args(args: &FuseArgs) -> Result<Self> {
        let missing = |what: &str| Failure::new("invalid_config", format!("{what} is required for this strategy"));
        Ok(match args.strategy {
            Strategy::Gated => {
                if args.inputs.len() != 2 {
                    return Err(Failure::new("invalid_config", "gated fusion takes exactly two inputs").into());
                }
                let params = match &args.params {
                    Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)
                        .with_context(|| format!("parsing {}", p.display()))?,
                    None => GatedParams::default(),
                };
                Fuser::Gated(params)
            }
            Strategy::Median => Fuser::Median,
            Strategy::Weighted => {
                if args.weights.is_empty() {
                    return Err(missing("--weights").into());
                }
                Fuser::Weighted(args.weights.clone())
            }
            Strategy::Routed => {
                let table_path = args.table.as_ref().ok_or_else(|| missing("--table"))?;
                let table: RoutingTable = serde_json::from_str(&std::fs::read_to_string(table_path)?)
                    .with_context(|| format!("parsing {}", table_path.display()))?;
                let labels = read_labels(args.labels.as_ref().ok_or_else(|| missing("--labels"))?)?;
                Fuser::Routed(table, labels)
            }
        })
    }

    fn fuse(&self, name: &str, maps: &[DepthMap]) -> Result<DepthMap> {
        Ok(match self {
            Fuser::Gated(p) => gated_fuse(&maps[0], &maps[1], p)?,
            Fuser::Median => median_fuse(maps)?,
            Fuser::Weighted(w) => weighted_fuse(maps, w)?,
            Fuser::Routed(table, labels) => {
                let label = labels
                    .get(name)
                    .ok_or_else(|| Failure::new("unknown_label", format!("no class label for `{name}`")))?;
                routed_fuse(maps, label, table)?
            }
        })
    }
}

pub fn fuse(args: &FuseArgs) -> Result<FuseSummary> {
    if !(args.divisor > 0.0 && args.divisor.is_finite()) {
        return Err(Failure::new("invalid_config", "divisor must be positive").into());
    }
    let fuser = Fuser::from_args(args)?;
    let listings =
        args.inputs.iter().map(|d| list_by_stem(d, &["png", "rdk"])).collect::<Result<Vec<_>>>()?;
    let mut all: Vec<&String> = listings.iter().flat_map(|l| l.keys()).collect();
    all.sort();
    all.dedup();
    let (names, missing): (Vec<&String>, Vec<&String>) =
        all.into_iter().partition(|n| listings.iter().all(|l| l.contains_key(*n)));
    let missing: Vec<String> = missing.into_iter().cloned().collect();
    if args.common.strict && !missing.is_empty() {
        return Err(Failure::new("missing_file", format!("not present in every input: {missing:?}")).into());
    }
    std::fs::create_dir_all(&args.output)?;

    let process = |name: &&String| -> Result<()> {
        let maps = listings
            .iter()
            .map(|l| load_map(&l[*name], MapKind::Depth, args.divisor, 0.0, 0.0))
            .collect::<Result<Vec<_>>>()?;
        let fused = fuser.fuse(name, &maps)?;
        let first = &listings[0][*name];
        save_depth(&fused, &args.output.join(first.file_name().expect("listed files have names")), args.divisor)
    };
    let results: Vec<Result<()>> = pool(args.common.jobs)?.install(|| names.par_iter().map(process).collect());

    let mut fused = Vec::new();
    let mut failed = Vec::new();
    for (name, res) in names.iter().zip(results) {
        match res {
            Ok(()) => fused.push((*name).clone()),
            Err(e) if args.common.strict => return Err(e.context(format!("fusing `{name}`"))),
            Err(_) => failed.push((*name).clone()),
        }
    }
    if fused.is_empty() {
        return Err(rdk_core::Error::EmptyCorpus.into());
    }
    Ok(FuseSummary { strategy: args.strategy, fused, missing, failed })
}

pub fn run(args: &FuseArgs) -> Result<()> {
    let summary = fuse(args)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
