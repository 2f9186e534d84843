//! Spatial-domain augmentations: AugMix-style chains, CutFlip, image mixing,
//! masked-reconstruction mixing, square patch masking (SDA) and L2-ball
//! perturbations, plus the clean/adversarial batch schedule.
//!
//! Every stochastic op takes an explicit [`Rng`]; identical input, config and
//! seed give bit-identical output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotate, warp_affine, Fill};
use crate::image::RgbImage;
use crate::rng::Rng;

/// Ops removed from the augmentation pool because they overlap the
/// benchmark corruptions.
pub const EXCLUDED_OPS: [&str; 5] = ["contrast", "color", "brightness", "sharpness", "cutout"];

/// Geometric ops usable inside an AugMix chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugOp {
    Identity,
    /// ±30°
    Rotate,
    /// ±0.3
    ShearX,
    ShearY,
    /// ±⅓ of the width
    TranslateX,
    /// ±⅓ of the height
    TranslateY,
}

impl AugOp {
    pub const ALL: [AugOp; 6] = [
        AugOp::Identity,
        AugOp::Rotate,
        AugOp::ShearX,
        AugOp::ShearY,
        AugOp::TranslateX,
        AugOp::TranslateY,
    ];

    /// Geometric pool used when no op set is configured.
    pub const DEFAULT_SET: [AugOp; 5] =
        [AugOp::Rotate, AugOp::ShearX, AugOp::ShearY, AugOp::TranslateX, AugOp::TranslateY];

    pub fn name(&self) -> &'static str {
        match self {
            AugOp::Identity => "identity",
            AugOp::Rotate => "rotate",
            AugOp::ShearX => "shear_x",
            AugOp::ShearY => "shear_y",
            AugOp::TranslateX => "translate_x",
            AugOp::TranslateY => "translate_y",
        }
    }

    /// Resolves an op name, rejecting the excluded photometric ops and any
    /// noising or blurring op.
    pub fn from_name(name: &str) -> Result<Self> {
        let lower = name.to_ascii_lowercase();
        if EXCLUDED_OPS.contains(&lower.as_str()) || lower.contains("noise") || lower.contains("blur") {
            return Err(Error::InvalidConfig(format!(
                "op `{name}` overlaps the evaluation corruptions and is not allowed"
            )));
        }
        AugOp::ALL
            .iter()
            .copied()
            .find(|op| op.name() == lower)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown augmentation op `{name}`")))
    }

    fn max_magnitude(&self, w: usize, h: usize) -> f64 {
        match self {
            AugOp::Identity => 0.0,
            AugOp::Rotate => 30.0,
            AugOp::ShearX | AugOp::ShearY => 0.3,
            AugOp::TranslateX => w as f64 / 3.0,
            AugOp::TranslateY => h as f64 / 3.0,
        }
    }
}

/// One sampled op with its signed magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpDraw {
    pub op: AugOp,
    pub magnitude: f64,
}

pub fn apply_op(image: &RgbImage, draw: OpDraw) -> RgbImage {
    let m = draw.magnitude;
    match draw.op {
        AugOp::Identity => image.clone(),
        AugOp::Rotate => rotate(image, m, Fill::Zero),
        AugOp::ShearX => warp_affine(image, [[1.0, m, 0.0], [0.0, 1.0, 0.0]], Fill::Zero).image,
        AugOp::ShearY => warp_affine(image, [[1.0, 0.0, 0.0], [m, 1.0, 0.0]], Fill::Zero).image,
        AugOp::TranslateX => warp_affine(image, [[1.0, 0.0, m], [0.0, 1.0, 0.0]], Fill::Zero).image,
        AugOp::TranslateY => warp_affine(image, [[1.0, 0.0, 0.0], [0.0, 1.0, m]], Fill::Zero).image,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainConfigRecord", into = "ChainConfigRecord")]
pub struct ChainConfig {
    pub k: usize,
    pub depth_range: (usize, usize),
    pub dirichlet_alpha: f64,
    pub beta_params: (f64, f64),
    pub op_set: Vec<AugOp>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ChainConfigRecord {
    k: usize,
    depth_range: [usize; 2],
    dirichlet_alpha: f64,
    beta_params: [f64; 2],
    op_set: Vec<String>,
}

impl Default for ChainConfigRecord {
    fn default() -> Self {
        ChainConfig::default().into()
    }
}

impl TryFrom<ChainConfigRecord> for ChainConfig {
    type Error = Error;
    fn try_from(r: ChainConfigRecord) -> Result<Self> {
        let op_set = r.op_set.iter().map(|n| AugOp::from_name(n)).collect::<Result<Vec<_>>>()?;
        let cfg = ChainConfig {
            k: r.k,
            depth_range: (r.depth_range[0], r.depth_range[1]),
            dirichlet_alpha: r.dirichlet_alpha,
            beta_params: (r.beta_params[0], r.beta_params[1]),
            op_set,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<ChainConfig> for ChainConfigRecord {
    fn from(c: ChainConfig) -> Self {
        ChainConfigRecord {
            k: c.k,
            depth_range: [c.depth_range.0, c.depth_range.1],
            dirichlet_alpha: c.dirichlet_alpha,
            beta_params: [c.beta_params.0, c.beta_params.1],
            op_set: c.op_set.iter().map(|o| o.name().to_string()).collect(),
        }
    }
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            k: 3,
            depth_range: (1, 3),
            dirichlet_alpha: 1.0,
            beta_params: (1.0, 1.0),
            op_set: AugOp::DEFAULT_SET.to_vec(),
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("augmix needs k >= 1 chains".into()));
        }
        let (lo, hi) = self.depth_range;
        if !(1 <= lo && lo <= hi && hi <= 3) {
            return Err(Error::InvalidConfig(format!("chain depth range [{lo}, {hi}] not within [1, 3]")));
        }
        if !(self.dirichlet_alpha > 0.0) || !(self.beta_params.0 > 0.0 && self.beta_params.1 > 0.0) {
            return Err(Error::InvalidConfig("dirichlet and beta parameters must be positive".into()));
        }
        if self.op_set.is_empty() {
            return Err(Error::InvalidConfig("empty op set".into()));
        }
        Ok(())
    }
}

/// All random choices of one AugMix application.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmixPlan {
    pub chains: Vec<Vec<OpDraw>>,
    /// Dirichlet weights over chains; sum to one.
    pub weights: Vec<f64>,
    /// Beta-distributed blend between the clean image and the chain mixture.
    pub mix: f64,
}

pub fn sample_augmix_plan(image: &RgbImage, cfg: &ChainConfig, rng: &mut Rng) -> Result<AugmixPlan> {
    cfg.validate()?;
    let (w, h) = image.dims();
    let (lo, hi) = cfg.depth_range;
    let mut chains = Vec::with_capacity(cfg.k);
    for _ in 0..cfg.k {
        let depth = lo + rng.below(hi - lo + 1);
        let chain = (0..depth)
            .map(|_| {
                let op = cfg.op_set[rng.below(cfg.op_set.len())];
                let max = op.max_magnitude(w, h);
                OpDraw { op, magnitude: rng.uniform_range(-max, max) }
            })
            .collect();
        chains.push(chain);
    }
    let weights = rng.dirichlet(cfg.dirichlet_alpha, cfg.k)?;
    let mix = rng.beta(cfg.beta_params.0, cfg.beta_params.1)?;
    Ok(AugmixPlan { chains, weights, mix })
}

/// `(1 − m)·image + m·Σ wᵢ·chainᵢ(image)`, clamped to `[0, 1]`.
pub fn apply_augmix_plan(image: &RgbImage, plan: &AugmixPlan) -> Result<RgbImage> {
    if plan.chains.len() != plan.weights.len() {
        return Err(Error::InvalidConfig("one weight per chain required".into()));
    }
    if !(0.0..=1.0).contains(&plan.mix) {
        return Err(Error::InvalidConfig(format!("mix {} not in [0, 1]", plan.mix)));
    }
    let mut mixture = vec![0.0; image.data().len()];
    for (chain, w) in plan.chains.iter().zip(&plan.weights) {
        let out = chain.iter().fold(image.clone(), |img, d| apply_op(&img, *d));
        for (m, v) in mixture.iter_mut().zip(out.data()) {
            *m += w * v;
        }
    }
    let m = plan.mix;
    let data = image.data().iter().zip(&mixture).map(|(x, y)| (1.0 - m) * x + m * y).collect();
    RgbImage::from_clamped(image.width(), image.height(), data)
}

pub fn augmix(image: &RgbImage, cfg: &ChainConfig, rng: &mut Rng) -> Result<RgbImage> {
    let plan = sample_augmix_plan(image, cfg, rng)?;
    apply_augmix_plan(image, &plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CutFlipConfig {
    pub probability: f64,
    pub split_row: Option<usize>,
}

impl Default for CutFlipConfig {
    fn default() -> Self {
        CutFlipConfig { probability: 0.5, split_row: None }
    }
}

/// Moves rows `split..H` above rows `0..split`.
pub fn swap_halves(image: &RgbImage, split_row: usize) -> Result<RgbImage> {
    let (w, h) = image.dims();
    if !(0 < split_row && split_row < h) {
        return Err(Error::InvalidConfig(format!("split row {split_row} not in (0, {h})")));
    }
    let row = w * 3;
    let mut data = Vec::with_capacity(image.data().len());
    data.extend_from_slice(&image.data()[split_row * row..]);
    data.extend_from_slice(&image.data()[..split_row * row]);
    Ok(RgbImage::from_raw_unchecked(w, h, data))
}

/// With the configured probability, cuts the image horizontally and swaps
/// the upper and lower parts. The split row is uniform in `(0, H)` unless
/// fixed.
pub fn cutflip(image: &RgbImage, cfg: &CutFlipConfig, rng: &mut Rng) -> Result<RgbImage> {
    let h = image.height();
    if !(0.0..=1.0).contains(&cfg.probability) {
        return Err(Error::InvalidConfig(format!("probability {} not in [0, 1]", cfg.probability)));
    }
    if let Some(s) = cfg.split_row {
        if !(0 < s && s < h) {
            return Err(Error::InvalidConfig(format!("split row {s} not in (0, {h})")));
        }
    }
    if !rng.bernoulli(cfg.probability) || h < 2 {
        return Ok(image.clone());
    }
    let split = match cfg.split_row {
        Some(s) => s,
        None => 1 + rng.below(h - 1),
    };
    swap_halves(image, split)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixConfig {
    pub alpha: f64,
}

impl Default for MixConfig {
    fn default() -> Self {
        MixConfig { alpha: 0.3 }
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidConfig(format!("{name} {v} not in [0, 1]")));
    }
    Ok(())
}

/// `(1 − α)·a + α·b`.
pub fn image_mix(a: &RgbImage, b: &RgbImage, alpha: f64) -> Result<RgbImage> {
    check_unit("mix alpha", alpha)?;
    a.check_same_dims(b)?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| (1.0 - alpha) * x + alpha * y).collect();
    RgbImage::from_clamped(a.width(), a.height(), data)
}

/// Square patch grid; the last row/column of patches is clipped at the border.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMask {
    pub width: usize,
    pub height: usize,
    pub patch: usize,
    pub cols: usize,
    pub rows: usize,
    /// One flag per patch, row-major.
    pub masked: Vec<bool>,
}

impl PatchMask {
    pub fn patch_count(&self) -> usize {
        self.cols * self.rows
    }

    pub fn masked_count(&self) -> usize {
        self.masked.iter().filter(|m| **m).count()
    }

    #[inline]
    pub fn covers(&self, x: usize, y: usize) -> bool {
        self.masked[(y / self.patch) * self.cols + x / self.patch]
    }

    /// Pixel bounds `(x0, y0, x1, y1)` (exclusive ends) of patch `i`.
    pub fn patch_bounds(&self, i: usize) -> (usize, usize, usize, usize) {
        let (px, py) = (i % self.cols, i / self.cols);
        let x0 = px * self.patch;
        let y0 = py * self.patch;
        (x0, y0, (x0 + self.patch).min(self.width), (y0 + self.patch).min(self.height))
    }
}

/// Masks `⌈ratio · n_patches⌉` patches chosen uniformly without replacement.
pub fn random_patch_mask(width: usize, height: usize, patch: usize, ratio: f64, rng: &mut Rng) -> Result<PatchMask> {
    if patch == 0 {
        return Err(Error::InvalidConfig("patch size must be positive".into()));
    }
    check_unit("mask ratio", ratio)?;
    let cols = width.div_ceil(patch);
    let rows = height.div_ceil(patch);
    let n = cols * rows;
    // tolerance keeps e.g. 0.3·10 = 3.0000000000000004 at 3
    let count = ((ratio * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n);
    let mut masked = vec![false; n];
    for i in rng.sample_indices(n, count) {
        masked[i] = true;
    }
    Ok(PatchMask { width, height, patch, cols, rows, masked })
}

/// Produces the reconstruction of a masked image.
pub trait Reconstructor {
    fn reconstruct(&self, masked: &RgbImage, mask: &PatchMask) -> Result<RgbImage>;
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityReconstructor;

impl Reconstructor for IdentityReconstructor {
    fn reconstruct(&self, masked: &RgbImage, _mask: &PatchMask) -> Result<RgbImage> {
        Ok(masked.clone())
    }
}

/// A reconstruction computed elsewhere, e.g. loaded from disk.
#[derive(Debug, Clone)]
pub struct PrecomputedReconstruction(pub RgbImage);

impl Reconstructor for PrecomputedReconstruction {
    fn reconstruct(&self, _masked: &RgbImage, _mask: &PatchMask) -> Result<RgbImage> {
        Ok(self.0.clone())
    }
}

/// Stand-in reconstruction: every masked patch is filled with the mean
/// colour of the visible pixels in its 8 neighbouring patches (falling back
/// to the global visible mean, then mid-grey), then the whole image gets two
/// passes of a 3×3 box blur.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanFillBlur;

impl MeanFillBlur {
    fn visible_mean(img: &RgbImage, mask: &PatchMask, patches: impl Iterator<Item = usize>) -> Option<[f64; 3]> {
        let mut sum = [0.0; 3];
        let mut n = 0usize;
        for p in patches {
            if mask.masked[p] {
                continue;
            }
            let (x0, y0, x1, y1) = mask.patch_bounds(p);
            for y in y0..y1 {
                for x in x0..x1 {
                    for (c, s) in sum.iter_mut().enumerate() {
                        *s += img.get(x, y, c);
                    }
                    n += 1;
                }
            }
        }
        (n > 0).then(|| sum.map(|s| s / n as f64))
    }
}

impl Reconstructor for MeanFillBlur {
    fn reconstruct(&self, masked: &RgbImage, mask: &PatchMask) -> Result<RgbImage> {
        let (w, h) = masked.dims();
        let global = Self::visible_mean(masked, mask, 0..mask.patch_count()).unwrap_or([0.5; 3]);
        let mut data = masked.data().to_vec();
        for p in (0..mask.patch_count()).filter(|p| mask.masked[*p]) {
            let (pc, pr) = ((p % mask.cols) as isize, (p / mask.cols) as isize);
            let neighbours = (-1..=1isize)
                .flat_map(|dy| (-1..=1isize).map(move |dx| (pc + dx, pr + dy)))
                .filter(|&(c, r)| {
                    (c, r) != (pc, pr) && c >= 0 && r >= 0 && (c as usize) < mask.cols && (r as usize) < mask.rows
                })
                .map(|(c, r)| r as usize * mask.cols + c as usize);
            let fill = Self::visible_mean(masked, mask, neighbours).unwrap_or(global);
            let (x0, y0, x1, y1) = mask.patch_bounds(p);
            for y in y0..y1 {
                for x in x0..x1 {
                    data[(y * w + x) * 3..(y * w + x) * 3 + 3].copy_from_slice(&fill);
                }
            }
        }
        let mut img = RgbImage::from_clamped(w, h, data)?;
        for _ in 0..2 {
            img = box_blur3(&img);
        }
        Ok(img)
    }
}

fn box_blur3(img: &RgbImage) -> RgbImage {
    let (w, h) = img.dims();
    let mut out = vec![0.0; img.data().len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut s = 0.0;
                let mut n = 0.0;
                for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        s += img.get(xx, yy, c);
                        n += 1.0;
                    }
                }
                out[(y * w + x) * 3 + c] = s / n;
            }
        }
    }
    RgbImage::from_raw_unchecked(w, h, out.into_iter().map(|v: f64| v.clamp(0.0, 1.0)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaeMixConfig {
    pub mask_ratio: f64,
    pub patch: usize,
    pub alpha: f64,
}

impl Default for MaeMixConfig {
    fn default() -> Self {
        MaeMixConfig { mask_ratio: 0.5, patch: 16, alpha: 0.3 }
    }
}

/// Masks random patches (set to 0), reconstructs, and returns
/// `(1 − α)·x + α·x̂`.
pub fn mae_mix(
    x: &RgbImage,
    reconstructor: &dyn Reconstructor,
    cfg: &MaeMixConfig,
    rng: &mut Rng,
) -> Result<RgbImage> {
    check_unit("mix alpha", cfg.alpha)?;
    let (w, h) = x.dims();
    let mask = random_patch_mask(w, h, cfg.patch, cfg.mask_ratio, rng)?;
    let mut data = x.data().to_vec();
    for y in 0..h {
        for xx in 0..w {
            if mask.covers(xx, y) {
                data[(y * w + xx) * 3..(y * w + xx) * 3 + 3].fill(0.0);
            }
        }
    }
    let masked = RgbImage::from_raw_unchecked(w, h, data);
    let recon = reconstructor.reconstruct(&masked, &mask)?;
    if recon.dims() != x.dims() {
        return Err(Error::DimensionMismatch { expected: x.dims(), actual: recon.dims() });
    }
    image_mix(x, &recon, cfg.alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SdaConfig {
    pub n_masks: usize,
    pub mask_len: usize,
}

impl Default for SdaConfig {
    fn default() -> Self {
        SdaConfig { n_masks: 12, mask_len: 120 }
    }
}

impl SdaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mask_len == 0 {
            return Err(Error::InvalidConfig("sda mask length must be >= 1".into()));
        }
        Ok(())
    }
}

/// Union of `N` squares whose top-left corners are uniform over the image;
/// squares are clipped at the border.
pub fn sda_union_mask(width: usize, height: usize, cfg: &SdaConfig, rng: &mut Rng) -> Result<Vec<bool>> {
    cfg.validate()?;
    let mut mask = vec![false; width * height];
    if width == 0 || height == 0 {
        return Ok(mask);
    }
    for _ in 0..cfg.n_masks {
        let x0 = rng.below(width);
        let y0 = rng.below(height);
        for y in y0..(y0 + cfg.mask_len).min(height) {
            mask[y * width + x0..y * width + (x0 + cfg.mask_len).min(width)].fill(true);
        }
    }
    Ok(mask)
}

/// Zeroes the SDA union mask; returns the masked image and the mask.
pub fn sda_mask(image: &RgbImage, cfg: &SdaConfig, rng: &mut Rng) -> Result<(RgbImage, Vec<bool>)> {
    let (w, h) = image.dims();
    let mask = sda_union_mask(w, h, cfg, rng)?;
    let mut data = image.data().to_vec();
    for (i, m) in mask.iter().enumerate() {
        if *m {
            data[i * 3..i * 3 + 3].fill(0.0);
        }
    }
    Ok((RgbImage::from_raw_unchecked(w, h, data), mask))
}

/// Rescales `delta` to L2 norm `epsilon`, adds it, and clamps to `[0, 1]`.
pub fn l2_perturb(x: &RgbImage, delta: &[f64], epsilon: f64) -> Result<RgbImage> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidConfig(format!("epsilon {epsilon} must be positive")));
    }
    if delta.len() != x.data().len() {
        return Err(Error::RejectedInput("perturbation shape does not match image".into()));
    }
    let norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::DegenerateInput("perturbation has zero norm".into()));
    }
    let scale = epsilon / norm;
    let data = x.data().iter().zip(delta).map(|(v, d)| v + d * scale).collect();
    RgbImage::from_clamped(x.width(), x.height(), data)
}

/// Additive i.i.d. Gaussian noise with standard deviation `sigma`, clamped.
/// A smoke-test corruption for exercising the scoring pipeline.
pub fn gaussian_noise(image: &RgbImage, sigma: f64, rng: &mut Rng) -> Result<RgbImage> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise sigma {sigma} must be >= 0")));
    }
    let data = image.data().iter().map(|v| v + sigma * rng.normal()).collect();
    RgbImage::from_clamped(image.width(), image.height(), data)
}

/// Origin of each sample in an adversarially augmented mini-batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchSource {
    Clean,
    CurrentGenerator,
    Replay,
}

/// `round(0.5·B)` clean, `round(0.3·B)` from the current generator and the
/// rest from replayed generator states, in shuffled order.
pub fn adversarial_batch_schedule(batch_size: usize, rng: &mut Rng) -> Result<Vec<BatchSource>> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be >= 1".into()));
    }
    let b = batch_size as f64;
    let clean = ((0.5 * b).round() as usize).min(batch_size);
    let current = ((0.3 * b).round() as usize).min(batch_size - clean);
    let replay = batch_size - clean - current;
    let mut labels = Vec::with_capacity(batch_size);
    labels.extend(std::iter::repeat_n(BatchSource::Clean, clean));
    labels.extend(std::iter::repeat_n(BatchSource::CurrentGenerator, current));
    labels.extend(std::iter::repeat_n(BatchSource::Replay, replay));
    rng.shuffle(&mut labels);
    Ok(labels)
}
