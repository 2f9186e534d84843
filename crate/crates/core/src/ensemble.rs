//! Prediction fusion: gated harmonic blending, median-normalized averaging,
//! fixed-weight and label-routed averaging, and flip test-time merging.
//!
//! Fused maps are valid exactly where every input is valid; invalid pixels
//! carry the value 0.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{DepthMap, DisparityMap};
use crate::stats::median;

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Whether the gate is decided per pixel or once per image from the mean
/// relative gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    #[default]
    PerPixel,
    PerImage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GatedRecord", into = "GatedRecord")]
pub struct GatedParams {
    alpha: f64,
    beta: f64,
    eta: f64,
    mode: GateMode,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct GatedRecord {
    alpha: f64,
    beta: f64,
    eta: f64,
    mode: GateMode,
}

impl Default for GatedRecord {
    fn default() -> Self {
        GatedParams::default().into()
    }
}

impl TryFrom<GatedRecord> for GatedParams {
    type Error = Error;
    fn try_from(r: GatedRecord) -> Result<Self> {
        GatedParams::new(r.alpha, r.beta, r.eta).map(|p| p.with_mode(r.mode))
    }
}

impl From<GatedParams> for GatedRecord {
    fn from(p: GatedParams) -> Self {
        GatedRecord { alpha: p.alpha, beta: p.beta, eta: p.eta, mode: p.mode }
    }
}

impl Default for GatedParams {
    fn default() -> Self {
        GatedParams { alpha: 2.0 / 3.0, beta: 1.0 / 3.0, eta: 0.45, mode: GateMode::PerPixel }
    }
}

impl GatedParams {
    pub fn new(alpha: f64, beta: f64, eta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && beta >= 0.0) || (alpha + beta - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidConfig(format!("alpha {alpha} and beta {beta} must be convex")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidConfig(format!("eta {eta} must be positive")));
        }
        Ok(GatedParams { alpha, beta, eta, mode: GateMode::PerPixel })
    }

    pub fn with_mode(mut self, mode: GateMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn mode(&self) -> GateMode {
        self.mode
    }
}

fn joint_valid(maps: &[&DepthMap]) -> Vec<bool> {
    (0..maps[0].values().len()).map(|i| maps.iter().all(|m| m.valid()[i])).collect()
}

fn assemble(like: &DepthMap, valid: Vec<bool>, mut f: impl FnMut(usize) -> f64) -> Result<DepthMap> {
    let values = valid.iter().enumerate().map(|(i, ok)| if *ok { f(i) } else { 0.0 }).collect();
    DepthMap::new(like.width(), like.height(), values, valid)
}

/// `|1/d1 − 1/d2| / (1/d2)`.
#[inline]
pub fn relative_inverse_gap(d1: f64, d2: f64) -> f64 {
    (1.0 / d1 - 1.0 / d2).abs() * d2
}

/// Harmonic blend `1 / (α/D1 + β/D2)` where the relative inverse-depth gap
/// is below `η`, `D2` otherwise (a gap of exactly `η` takes `D2`).
pub fn gated_fuse(d1: &DepthMap, d2: &DepthMap, p: &GatedParams) -> Result<DepthMap> {
    d1.check_same_dims(d2)?;
    let valid = joint_valid(&[d1, d2]);
    let (a, b) = (d1.values(), d2.values());
    let blend = |i: usize| {
        if a[i] == b[i] {
            return b[i];
        }
        let h = 1.0 / (p.alpha / a[i] + p.beta / b[i]);
        h.clamp(a[i].min(b[i]), a[i].max(b[i]))
    };
    let image_gate = match p.mode {
        GateMode::PerPixel => None,
        GateMode::PerImage => {
            let gaps: Vec<f64> =
                (0..a.len()).filter(|&i| valid[i]).map(|i| relative_inverse_gap(a[i], b[i])).collect();
            if gaps.is_empty() {
                return Err(Error::EmptyOverlap);
            }
            Some(gaps.iter().sum::<f64>() / (gaps.len() as f64) < p.eta)
        }
    };
    assemble(d2, valid, |i| {
        let open = image_gate.unwrap_or_else(|| relative_inverse_gap(a[i], b[i]) < p.eta);
        if open {
            blend(i)
        } else {
            b[i]
        }
    })
}

fn check_stack(maps: &[DepthMap]) -> Result<()> {
    let first = maps.first().ok_or(Error::EmptyCorpus)?;
    maps.iter().try_for_each(|m| first.check_same_dims(m))
}

/// Each map divided by the median of its valid pixels, then averaged with
/// equal weights.
pub fn median_fuse(maps: &[DepthMap]) -> Result<DepthMap> {
    check_stack(maps)?;
    let medians = maps
        .iter()
        .map(|m| match median(&m.valid_values()) {
            Some(v) if v > 0.0 => Ok(v),
            _ => Err(Error::DegenerateInput("map has no valid pixels to take a median of".into())),
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&DepthMap> = maps.iter().collect();
    let n = maps.len() as f64;
    assemble(&maps[0], joint_valid(&refs), |i| {
        maps.iter().zip(&medians).map(|(m, med)| m.values()[i] / med).sum::<f64>() / n
    })
}

fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::InvalidConfig(format!("{} weights for {n} maps", weights.len())));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidConfig("weights must be nonnegative".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidConfig(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

/// Pixelwise `Σ wᵢ·Dᵢ`. The terms are summed in sorted order so the result
/// does not depend on the order of the maps.
pub fn weighted_fuse(maps: &[DepthMap], weights: &[f64]) -> Result<DepthMap> {
    check_stack(maps)?;
    check_weights(weights, maps.len())?;
    let refs: Vec<&DepthMap> = maps.iter().collect();
    let mut terms = Vec::with_capacity(maps.len());
    assemble(&maps[0], joint_valid(&refs), |i| {
        terms.clear();
        terms.extend(maps.iter().zip(weights).map(|(m, w)| w * m.values()[i]));
        terms.sort_by(f64::total_cmp);
        terms.iter().sum()
    })
}

/// Per-label convex weight vectors over the ensemble members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, Vec<f64>>", into = "BTreeMap<String, Vec<f64>>")]
pub struct RoutingTable(BTreeMap<String, Vec<f64>>);

impl TryFrom<BTreeMap<String, Vec<f64>>> for RoutingTable {
    type Error = Error;
    fn try_from(map: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        RoutingTable::new(map)
    }
}

impl From<RoutingTable> for BTreeMap<String, Vec<f64>> {
    fn from(t: RoutingTable) -> Self {
        t.0
    }
}

impl RoutingTable {
    pub fn new(map: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        if map.is_empty() {
            return Err(Error::InvalidConfig("routing table has no labels".into()));
        }
        for (label, w) in &map {
            check_weights(w, w.len()).map_err(|e| Error::InvalidConfig(format!("label `{label}`: {e}")))?;
        }
        Ok(RoutingTable(map))
    }

    pub fn weights(&self, label: &str) -> Result<&[f64]> {
        self.0.get(label).map(Vec::as_slice).ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}

/// [`weighted_fuse`] with the weight vector registered for `label`.
pub fn routed_fuse(maps: &[DepthMap], label: &str, table: &RoutingTable) -> Result<DepthMap> {
    weighted_fuse(maps, table.weights(label)?)
}

/// Averages a disparity map with the re-flipped prediction of the
/// horizontally mirrored input.
pub fn flip_merge(disp: &DisparityMap, disp_of_flipped_input: &DisparityMap) -> Result<DisparityMap> {
    if disp.dims() != disp_of_flipped_input.dims() {
        return Err(Error::DimensionMismatch { expected: disp.dims(), actual: disp_of_flipped_input.dims() });
    }
    let back = disp_of_flipped_input.flipped_horizontally();
    let values = disp.values().iter().zip(back.values()).map(|(a, b)| (a + b) / 2.0).collect();
    DisparityMap::new(disp.width(), disp.height(), values)
}
