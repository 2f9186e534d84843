//! Closed-form forward losses: SSIM, photometric error, minimum reprojection,
//! edge-aware smoothness, the depth triplet (Jensen–Shannon style) mixing loss,
//! multi-scale total loss, SILog and the amplitude-phase disparity loss.
//!
//! These are evaluators, not training code: nothing here produces gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{DepthMap, DisparityMap, RgbImage};
use crate::stats::pairwise_sum;

/// SSIM stabilizer for the mean term, `(0.01 · L)²` with `L = 1`.
pub const SSIM_C1: f64 = 0.01 * 0.01;
/// SSIM stabilizer for the variance term, `(0.03 · L)²`.
pub const SSIM_C2: f64 = 0.03 * 0.03;
/// SSIM/L1 blend used by the photometric error.
pub const DEFAULT_PE_ALPHA: f64 = 0.85;
/// Probability floor applied after sum-normalizing depth maps.
pub const KL_EPSILON: f64 = 1e-12;

/// A per-pixel scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl PixelMap {
    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.values) / self.values.len() as f64
    }
}

fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    r as usize
}

/// 3×3 box mean with reflection padding on one plane.
fn box3(plane: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for dy in -1..=1isize {
                let yy = reflect_index(y as isize + dy, h);
                for dx in -1..=1isize {
                    let xx = reflect_index(x as isize + dx, w);
                    s += plane[yy * w + xx];
                }
            }
            out[y * w + x] = s / 9.0;
        }
    }
    out
}

/// Per-channel SSIM plane with 3×3 windows and reflection padding.
fn ssim_channel(a: &[f64], b: &[f64], w: usize, h: usize) -> Vec<f64> {
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mu_a = box3(a, w, h);
    let mu_b = box3(b, w, h);
    let e_aa = box3(&aa, w, h);
    let e_bb = box3(&bb, w, h);
    let e_ab = box3(&ab, w, h);
    (0..w * h)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2);
            let den = (ma * ma + mb * mb + SSIM_C1) * (var_a + var_b + SSIM_C2);
            num / den
        })
        .collect()
}

/// Per-pixel SSIM averaged over the three channels. `.mean()` gives the
/// scalar form.
pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<PixelMap> {
    a.check_same_dims(b)?;
    let (w, h) = a.dims();
    let mut acc = vec![0.0; w * h];
    for c in 0..3 {
        let s = ssim_channel(&a.channel(c), &b.channel(c), w, h);
        for (o, v) in acc.iter_mut().zip(s) {
            *o += v;
        }
    }
    for v in &mut acc {
        *v /= 3.0;
    }
    Ok(PixelMap { width: w, height: h, values: acc })
}

/// Photometric error `α/2·(1 − SSIM) + (1 − α)·|a − b|`, with the L1 term
/// averaged over channels.
pub fn photometric_pe(a: &RgbImage, b: &RgbImage, alpha: f64) -> Result<PixelMap> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!("pe alpha {alpha} not in [0, 1]")));
    }
    let s = ssim(a, b)?;
    let values = s
        .values
        .iter()
        .enumerate()
        .map(|(i, sv)| {
            let l1 = (0..3).map(|c| (a.data()[i * 3 + c] - b.data()[i * 3 + c]).abs()).sum::<f64>() / 3.0;
            alpha / 2.0 * (1.0 - sv) + (1.0 - alpha) * l1
        })
        .collect();
    Ok(PixelMap { width: s.width, height: s.height, values })
}

/// Per-pixel minimum photometric error over candidate warped views, then the
/// mean over pixels.
pub fn min_reprojection(target: &RgbImage, warped: &[RgbImage], alpha: f64) -> Result<f64> {
    let (first, rest) = warped
        .split_first()
        .ok_or_else(|| Error::RejectedInput("no candidate views".into()))?;
    let mut best = photometric_pe(target, first, alpha)?;
    for cand in rest {
        let pe = photometric_pe(target, cand, alpha)?;
        for (b, v) in best.values.iter_mut().zip(pe.values) {
            *b = b.min(v);
        }
    }
    Ok(best.mean())
}

/// Edge-aware smoothness of mean-normalized disparity:
/// `mean|∂x d*|·e^{−|∂x I|} + mean|∂y d*|·e^{−|∂y I|}`, with `d* = d / mean(d)`,
/// forward differences, and image gradients averaged over channels. Each axis
/// term is averaged over its own valid difference positions.
pub fn smoothness(disp: &DisparityMap, image: &RgbImage) -> Result<f64> {
    if disp.dims() != image.dims() {
        return Err(Error::DimensionMismatch { expected: disp.dims(), actual: image.dims() });
    }
    if disp.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite disparity".into()));
    }
    let (w, h) = disp.dims();
    let mean = pairwise_sum(disp.values()) / (w * h) as f64;
    if !(mean > 0.0) {
        return Err(Error::DegenerateInput("disparity mean is zero".into()));
    }
    let d: Vec<f64> = disp.values().iter().map(|v| v / mean).collect();
    let img_grad = |x0: usize, y0: usize, x1: usize, y1: usize| {
        (0..3).map(|c| (image.get(x1, y1, c) - image.get(x0, y0, c)).abs()).sum::<f64>() / 3.0
    };

    let mut terms_x = Vec::with_capacity(h * w.saturating_sub(1));
    for y in 0..h {
        for x in 0..w.saturating_sub(1) {
            let dd = (d[y * w + x + 1] - d[y * w + x]).abs();
            terms_x.push(dd * (-img_grad(x, y, x + 1, y)).exp());
        }
    }
    let mut terms_y = Vec::with_capacity(w * h.saturating_sub(1));
    for y in 0..h.saturating_sub(1) {
        for x in 0..w {
            let dd = (d[(y + 1) * w + x] - d[y * w + x]).abs();
            terms_y.push(dd * (-img_grad(x, y, x, y + 1)).exp());
        }
    }
    let axis_mean = |t: &[f64]| if t.is_empty() { 0.0 } else { pairwise_sum(t) / t.len() as f64 };
    Ok(axis_mean(&terms_x) + axis_mean(&terms_y))
}

/// Pixelwise mean of three depth maps; valid where all three are valid.
pub fn mixed_depth_center(d: &DepthMap, aug1: &DepthMap, aug2: &DepthMap) -> Result<DepthMap> {
    d.check_same_dims(aug1)?;
    d.check_same_dims(aug2)?;
    let n = d.values().len();
    let mut values = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for i in 0..n {
        let ok = d.valid()[i] && aug1.valid()[i] && aug2.valid()[i];
        valid.push(ok);
        values.push(if ok { (d.values()[i] + aug1.values()[i] + aug2.values()[i]) / 3.0 } else { 0.0 });
    }
    DepthMap::new(d.width(), d.height(), values, valid)
}

fn normalized_distribution(map: &DepthMap) -> Result<Vec<f64>> {
    if map.values().iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Domain("triplet loss needs strictly positive depths".into()));
    }
    let sum = pairwise_sum(map.values());
    Ok(map.values().iter().map(|v| (v / sum).max(KL_EPSILON)).collect())
}

/// `KL(p‖q) = Σ p ln(p/q)`; tiny negative rounding results are clamped to 0.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let terms: Vec<f64> = p.iter().zip(q).map(|(a, b)| a * (a / b).ln()).collect();
    pairwise_sum(&terms).max(0.0)
}

/// Mean KL divergence of the three sum-normalized depth maps from their mixture.
pub fn js_triplet_loss(d: &DepthMap, aug1: &DepthMap, aug2: &DepthMap) -> Result<f64> {
    d.check_same_dims(aug1)?;
    d.check_same_dims(aug2)?;
    let p = normalized_distribution(d)?;
    let q = normalized_distribution(aug1)?;
    let r = normalized_distribution(aug2)?;
    let mix: Vec<f64> = (0..p.len()).map(|i| (p[i] + q[i] + r[i]) / 3.0).collect();
    Ok((kl_divergence(&p, &mix) + kl_divergence(&q, &mix) + kl_divergence(&r, &mix)) / 3.0)
}

/// Weights of the photometric, smoothness and mixing terms and the output
/// scales they are summed over. These `alpha`/`beta` are loss weights and
/// are unrelated to the SSIM blend of [`photometric_pe`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LossWeightsRecord")]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub scales: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LossWeightsRecord {
    alpha: f64,
    beta: f64,
    gamma: f64,
    scales: Vec<f64>,
}

impl TryFrom<LossWeightsRecord> for LossWeights {
    type Error = Error;
    fn try_from(r: LossWeightsRecord) -> Result<Self> {
        LossWeights::new(r.alpha, r.beta, r.gamma, r.scales)
    }
}

pub const ALLOWED_SCALES: [f64; 4] = [1.0, 0.5, 0.25, 0.125];

impl LossWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64, scales: Vec<f64>) -> Result<Self> {
        if [alpha, beta, gamma].iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidConfig("loss weights must be nonnegative".into()));
        }
        if scales.is_empty() {
            return Err(Error::InvalidConfig("scale set is empty".into()));
        }
        for (i, s) in scales.iter().enumerate() {
            if !ALLOWED_SCALES.contains(s) {
                return Err(Error::InvalidConfig(format!("scale {s} not in {{1, 1/2, 1/4, 1/8}}")));
            }
            if scales[..i].contains(s) {
                return Err(Error::InvalidConfig(format!("scale {s} listed twice")));
            }
        }
        Ok(LossWeights { alpha, beta, gamma, scales })
    }
}

/// Loss terms evaluated at one output scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleTerms {
    pub photometric: f64,
    pub smoothness: f64,
    pub mixing: f64,
}

/// Mean over scales of `α·L_p + β·L_s + γ·L_mix`; one entry of `terms` per
/// scale of `w`.
pub fn total_loss(terms: &[ScaleTerms], w: &LossWeights) -> Result<f64> {
    if terms.is_empty() {
        return Err(Error::RejectedInput("no scales".into()));
    }
    if terms.len() != w.scales.len() {
        return Err(Error::RejectedInput(format!(
            "{} scale terms for {} scales",
            terms.len(),
            w.scales.len()
        )));
    }
    let per: Vec<f64> = terms
        .iter()
        .map(|t| w.alpha * t.photometric + w.beta * t.smoothness + w.gamma * t.mixing)
        .collect();
    Ok(pairwise_sum(&per) / per.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SilogParams {
    pub lambda: f64,
}

impl SilogParams {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidConfig(format!("silog lambda {lambda} not in [0, 1]")));
        }
        Ok(SilogParams { lambda })
    }
}

impl Default for SilogParams {
    fn default() -> Self {
        SilogParams { lambda: 0.5 }
    }
}

/// Scale-invariant log loss over co-valid pixels:
/// `sqrt(mean(Δ²) − λ·mean(Δ)²)` with `Δ = ln pred − ln gt`.
pub fn silog(gt: &DepthMap, pred: &DepthMap, p: SilogParams) -> Result<f64> {
    SilogParams::new(p.lambda)?;
    gt.check_same_dims(pred)?;
    let diffs: Vec<f64> = (0..gt.values().len())
        .filter(|&i| gt.valid()[i] && pred.valid()[i])
        .map(|i| pred.values()[i].ln() - gt.values()[i].ln())
        .collect();
    if diffs.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let k = diffs.len() as f64;
    let sq: Vec<f64> = diffs.iter().map(|d| d * d).collect();
    let mean_sq = pairwise_sum(&sq) / k;
    let mean = pairwise_sum(&diffs) / k;
    Ok((mean_sq - p.lambda * mean * mean).max(0.0).sqrt())
}

/// Mean absolute difference of inverse depths over co-valid pixels.
pub fn apr_loss(d: &DepthMap, d_apr: &DepthMap) -> Result<f64> {
    d.check_same_dims(d_apr)?;
    let terms: Vec<f64> = (0..d.values().len())
        .filter(|&i| d.valid()[i] && d_apr.valid()[i])
        .map(|i| (1.0 / d.values()[i] - 1.0 / d_apr.values()[i]).abs())
        .collect();
    if terms.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    Ok(pairwise_sum(&terms) / terms.len() as f64)
}
