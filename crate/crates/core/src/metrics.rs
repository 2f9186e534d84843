//! The seven depth-evaluation metrics, corpus aggregation and leaderboard
//! ranking.
//!
//! All sums run over the co-valid pixel set of a [`ValidPairView`] and use
//! pairwise summation. Logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::depth::{align_pair, EvalOptions};
use crate::error::{Error, Result};
use crate::image::{DepthMap, ValidPairView};
use crate::stats::pairwise_sum;

/// Per-image or corpus-level metric values. δ values are fractions in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub log_rmse: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub n_pixels: usize,
}

impl MetricReport {
    /// Field values in serialization order, `n_pixels` excluded.
    pub fn values(&self) -> [f64; 7] {
        [
            self.abs_rel,
            self.sq_rel,
            self.rmse,
            self.log_rmse,
            self.delta1,
            self.delta2,
            self.delta3,
        ]
    }

    pub const FIELD_NAMES: [&'static str; 7] =
        ["abs_rel", "sq_rel", "rmse", "log_rmse", "delta1", "delta2", "delta3"];
}

fn mean_of(pair: &ValidPairView, term: impl Fn(f64, f64) -> f64) -> Result<f64> {
    if pair.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let terms: Vec<f64> = pair.iter().map(|(g, p)| term(g, p)).collect();
    Ok(pairwise_sum(&terms) / terms.len() as f64)
}

/// Mean of `|gt − pred| / gt`.
pub fn abs_rel(pair: &ValidPairView) -> Result<f64> {
    mean_of(pair, |g, p| (g - p).abs() / g)
}

/// Mean of `(gt − pred)² / gt`.
pub fn sq_rel(pair: &ValidPairView) -> Result<f64> {
    mean_of(pair, |g, p| (g - p) * (g - p) / g)
}

/// Root mean squared error in meters.
pub fn rmse(pair: &ValidPairView) -> Result<f64> {
    mean_of(pair, |g, p| (g - p) * (g - p)).map(f64::sqrt)
}

/// Root mean squared error of natural logs.
pub fn log_rmse(pair: &ValidPairView) -> Result<f64> {
    mean_of(pair, |g, p| {
        let d = g.ln() - p.ln();
        d * d
    })
    .map(f64::sqrt)
}

/// Fraction of pixels with `max(gt/pred, pred/gt) < 1.25^t`, `t ∈ {1, 2, 3}`.
pub fn delta_accuracy(pair: &ValidPairView, t: u32) -> Result<f64> {
    if !(1..=3).contains(&t) {
        return Err(Error::InvalidConfig(format!("delta exponent {t} not in 1..=3")));
    }
    let threshold = 1.25f64.powi(t as i32);
    mean_of(pair, |g, p| if (g / p).max(p / g) < threshold { 1.0 } else { 0.0 })
}

/// All seven metrics of one aligned view.
pub fn report_from_view(pair: &ValidPairView) -> Result<MetricReport> {
    Ok(MetricReport {
        abs_rel: abs_rel(pair)?,
        sq_rel: sq_rel(pair)?,
        rmse: rmse(pair)?,
        log_rmse: log_rmse(pair)?,
        delta1: delta_accuracy(pair, 1)?,
        delta2: delta_accuracy(pair, 2)?,
        delta3: delta_accuracy(pair, 3)?,
        n_pixels: pair.len(),
    })
}

/// Aligns a gt/pred pair and scores it.
pub fn score_pair(gt: &DepthMap, pred: &DepthMap, opts: &EvalOptions) -> Result<MetricReport> {
    report_from_view(&align_pair(gt, pred, opts)?)
}

/// Unweighted mean of per-image reports; `n_pixels` is summed.
pub fn aggregate(reports: &[MetricReport]) -> Result<MetricReport> {
    if reports.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let n = reports.len() as f64;
    let field = |i: usize| {
        let col: Vec<f64> = reports.iter().map(|r| r.values()[i]).collect();
        pairwise_sum(&col) / n
    };
    Ok(MetricReport {
        abs_rel: field(0),
        sq_rel: field(1),
        rmse: field(2),
        log_rmse: field(3),
        delta1: field(4),
        delta2: field(5),
        delta3: field(6),
        n_pixels: reports.iter().map(|r| r.n_pixels).sum(),
    })
}

/// Metrics over the union of all pixels of a corpus, rather than the mean of
/// per-image metrics.
pub fn aggregate_pooled(views: &[ValidPairView]) -> Result<MetricReport> {
    if views.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    report_from_view(&ValidPairView::pooled(views))
}

/// Challenge track; selects the ranking key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Track {
    /// Self-supervised; ranked by Abs Rel, lower first.
    SelfSupervised,
    /// Supervised; ranked by δ1, higher first.
    Supervised,
}

impl Track {
    pub fn key(&self, report: &MetricReport) -> f64 {
        match self {
            Track::SelfSupervised => report.abs_rel,
            Track::Supervised => report.delta1,
        }
    }

    pub fn key_name(&self) -> &'static str {
        match self {
            Track::SelfSupervised => "abs_rel",
            Track::Supervised => "delta1",
        }
    }

    pub fn default_options(&self) -> EvalOptions {
        match self {
            Track::SelfSupervised => EvalOptions::track1(),
            Track::Supervised => EvalOptions::track2(),
        }
    }
}

impl TryFrom<u8> for Track {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Track::SelfSupervised),
            2 => Ok(Track::Supervised),
            _ => Err(Error::InvalidConfig(format!("track must be 1 or 2, got {v}"))),
        }
    }
}

impl From<Track> for u8 {
    fn from(t: Track) -> u8 {
        match t {
            Track::SelfSupervised => 1,
            Track::Supervised => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub name: String,
    pub report: MetricReport,
}

impl LeaderboardEntry {
    pub fn new(name: impl Into<String>, report: MetricReport) -> Result<Self> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(Error::RejectedInput("leaderboard entry name is empty".into()));
        }
        Ok(LeaderboardEntry { name, report })
    }
}

/// One row of a ranked leaderboard. `rank` is the 1-based position; rows whose
/// key exactly equals a neighbour's share a `tie_group` and keep input order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedEntry {
    pub rank: usize,
    pub key: f64,
    pub tie_group: Option<usize>,
    pub entry: LeaderboardEntry,
}

/// Orders entries by the track's key: Abs Rel ascending (track 1) or δ1
/// descending (track 2). The sort is stable; exact ties are flagged, never
/// broken.
pub fn rank_track(entries: &[LeaderboardEntry], track: Track) -> Result<Vec<RankedEntry>> {
    if entries.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if let Some(e) = entries.iter().find(|e| !track.key(&e.report).is_finite()) {
        return Err(Error::RejectedInput(format!("entry `{}` has a non-finite key", e.name)));
    }
    let mut sorted: Vec<&LeaderboardEntry> = entries.iter().collect();
    sorted.sort_by(|a, b| {
        let (ka, kb) = (track.key(&a.report), track.key(&b.report));
        match track {
            Track::SelfSupervised => ka.total_cmp(&kb),
            Track::Supervised => kb.total_cmp(&ka),
        }
    });

    let keys: Vec<f64> = sorted.iter().map(|e| track.key(&e.report)).collect();
    let mut groups = vec![None; keys.len()];
    let mut next_group = 0;
    let mut i = 0;
    while i < keys.len() {
        let mut j = i + 1;
        while j < keys.len() && keys[j] == keys[i] {
            j += 1;
        }
        if j - i > 1 {
            next_group += 1;
            groups[i..j].fill(Some(next_group));
        }
        i = j;
    }

    Ok(sorted
        .into_iter()
        .zip(keys)
        .zip(groups)
        .enumerate()
        .map(|(i, ((entry, key), tie_group))| RankedEntry {
            rank: i + 1,
            key,
            tie_group,
            entry: entry.clone(),
        })
        .collect())
}
