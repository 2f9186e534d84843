use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use rdk_core::metrics::{rank_track, RankedEntry};
use rdk_core::{LeaderboardEntry, MetricReport, Track};

use crate::{write_output, Failure};

#[derive(Args, Debug)]
pub struct RankArgs {
    /// 1 ranks by Abs Rel ascending, 2 by δ1 descending
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub track: u8,
    /// CSV with a `name` column and metric columns
    #[arg(long, conflicts_with = "reports")]
    pub csv: Option<PathBuf>,
    /// Score report JSON files; each is named after its file stem
    pub reports: Vec<PathBuf>,
    /// Leaderboard CSV path (stdout when absent)
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// Reads a score table. Metric columns that are absent are left as NaN; the
/// track's key column must be present.
pub fn read_score_csv(path: &Path, track: Track) -> Result<Vec<LeaderboardEntry>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let name_col = col("name").ok_or_else(|| Failure::new("format", "score table needs a `name` column"))?;
    let metric_cols: Vec<Option<usize>> = MetricReport::FIELD_NAMES.iter().map(|f| col(f)).collect();
    if col(track.key_name()).is_none() {
        return Err(Failure::new("format", format!("score table lacks the `{}` column", track.key_name())).into());
    }
    let mut entries = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let mut v = [f64::NAN; 7];
        for (slot, c) in v.iter_mut().zip(&metric_cols) {
            if let Some(c) = c {
                let cell = record.get(*c).unwrap_or_default();
                *slot = cell
                    .parse()
                    .map_err(|_| Failure::new("format", format!("row {}: `{cell}` is not a number", line + 2)))?;
            }
        }
        let report = MetricReport {
            abs_rel: v[0],
            sq_rel: v[1],
            rmse: v[2],
            log_rmse: v[3],
            delta1: v[4],
            delta2: v[5],
            delta3: v[6],
            n_pixels: 0,
        };
        entries.push(LeaderboardEntry::new(record.get(name_col).unwrap_or_default(), report)?);
    }
    Ok(entries)
}

fn read_report(path: &Path) -> Result<LeaderboardEntry> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let agg = value.get("aggregate").cloned().ok_or_else(|| {
        Failure::new("format", format!("{} has no `aggregate` record", path.display()))
    })?;
    let report: MetricReport = serde_json::from_value(agg)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    Ok(LeaderboardEntry::new(name, report)?)
}

pub fn leaderboard_csv(ranked: &[RankedEntry], track: Track) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "name", track.key_name(), "tie_group"])?;
    for r in ranked {
        let group = r.tie_group.map(|g| g.to_string()).unwrap_or_default();
        w.write_record([r.rank.to_string(), r.entry.name.clone(), r.key.to_string(), group])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn run(args: &RankArgs) -> Result<()> {
    let track = Track::try_from(args.track)?;
    let entries = match &args.csv {
        Some(p) => read_score_csv(p, track)?,
        None => args.reports.iter().map(|p| read_report(p)).collect::<Result<Vec<_>>>()?,
    };
    let ranked = rank_track(&entries, track)?;
    write_output(args.out.as_ref(), &leaderboard_csv(&ranked, track)?)
}
