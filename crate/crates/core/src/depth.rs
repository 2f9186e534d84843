//! Disparity/depth conversion and gt/pred alignment for scoring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{DepthMap, DisparityMap, ValidPairView};
use crate::stats::median;

/// Depth caps and scale alignment applied before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub min_depth: f64,
    pub max_depth: f64,
    pub median_scale: bool,
}

impl EvalOptions {
    /// Self-supervised (KITTI-style) defaults: 0.001–80 m with median scaling.
    pub const fn track1() -> Self {
        EvalOptions { min_depth: 1e-3, max_depth: 80.0, median_scale: true }
    }

    /// Supervised (NYU-style) defaults: 0.001–10 m, no scaling.
    pub const fn track2() -> Self {
        EvalOptions { min_depth: 1e-3, max_depth: 10.0, median_scale: false }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_depth > 0.0 && self.max_depth > self.min_depth && self.max_depth.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "depth range [{}, {}] must satisfy 0 < min < max",
                self.min_depth, self.max_depth
            )));
        }
        Ok(())
    }
}

/// Converts disparity to depth, clamping into `[min_depth, max_depth]`.
/// Zero disparity maps to `max_depth` and stays valid.
pub fn disparity_to_depth(disp: &DisparityMap, min_depth: f64, max_depth: f64) -> Result<DepthMap> {
    EvalOptions { min_depth, max_depth, median_scale: false }.validate()?;
    let mut values = Vec::with_capacity(disp.values().len());
    for &d in disp.values() {
        if !d.is_finite() {
            return Err(Error::RejectedInput(format!("non-finite disparity {d}")));
        }
        let depth = if d == 0.0 { max_depth } else { (1.0 / d).clamp(min_depth, max_depth) };
        values.push(depth);
    }
    DepthMap::dense(disp.width(), disp.height(), values)
}

/// Selects the pixels scored for one image.
///
/// Kept pixels are valid in both maps with `min_depth < gt < max_depth`.
/// With `median_scale`, predictions are multiplied by
/// `median(gt) / median(pred)` over the kept set. Predictions are then clamped
/// into `[min_depth, max_depth]`.
pub fn align_pair(gt: &DepthMap, pred: &DepthMap, opts: &EvalOptions) -> Result<ValidPairView> {
    opts.validate()?;
    gt.check_same_dims(pred)?;
    let mut g = Vec::new();
    let mut p = Vec::new();
    for i in 0..gt.values().len() {
        let gv = gt.values()[i];
        if gt.valid()[i] && pred.valid()[i] && gv > opts.min_depth && gv < opts.max_depth {
            g.push(gv);
            p.push(pred.values()[i]);
        }
    }
    if g.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    if opts.median_scale {
        let mg = median(&g).expect("nonempty");
        let mp = median(&p).expect("nonempty");
        if mp == 0.0 {
            return Err(Error::DegeneratePrediction);
        }
        let ratio = mg / mp;
        for v in &mut p {
            *v *= ratio;
        }
    }
    for v in &mut p {
        *v = v.clamp(opts.min_depth, opts.max_depth);
    }
    ValidPairView::new(g, p)
}
