use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::Args;
use rayon::prelude::*;
use rdk_core::augment::{
    augmix, cutflip, gaussian_noise, image_mix, l2_perturb, mae_mix, sda_mask, ChainConfig, CutFlipConfig,
    MaeMixConfig, MeanFillBlur, PrecomputedReconstruction, SdaConfig,
};
use rdk_core::frequency::{apr_recombine, fda_augment, mrsf, FdaConfig, MrsfConfig};
use rdk_core::io::{read_rgb_png, write_rgb_png};
use rdk_core::rng::sub_seed;
use rdk_core::{RgbImage, Rng};
use serde::{Deserialize, Serialize};

use crate::canonical::{canonical_json, sha256_hex};
use crate::{pool, Common, Failure};

#[derive(Args, Debug)]
pub struct AugmentArgs {
    /// Directory of 8-bit RGB PNG images
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory (created if needed)
    #[arg(long)]
    pub output: PathBuf,
    /// Pipeline JSON
    #[arg(long)]
    pub pipeline: PathBuf,
    /// Overrides the pipeline's master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Manifest path (default: `<output>/manifest.json`)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartnerMix {
    #[serde(default = "default_mix_alpha")]
    pub alpha: f64,
    /// Directory holding a same-named partner image for every input.
    pub partner_dir: PathBuf,
}

fn default_mix_alpha() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AprStage {
    /// Directory of same-named images supplying the amplitude spectrum.
    pub partner_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaeMixStage {
    pub mask_ratio: f64,
    pub patch: usize,
    pub alpha: f64,
    /// Directory of precomputed reconstructions; mean-fill and blur otherwise.
    pub reconstructions: Option<PathBuf>,
}

impl Default for MaeMixStage {
    fn default() -> Self {
        let c = MaeMixConfig::default();
        MaeMixStage { mask_ratio: c.mask_ratio, patch: c.patch, alpha: c.alpha, reconstructions: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct L2Stage {
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseStage {
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum Stage {
    Augmix(ChainConfig),
    Cutflip(CutFlipConfig),
    ImageMix(PartnerMix),
    MaeMix(MaeMixStage),
    Sda(SdaConfig),
    Fda(FdaConfig),
    Mrsf(MrsfConfig),
    Apr(AprStage),
    L2Perturb(L2Stage),
    GaussianNoise(NoiseStage),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub master_seed: u64,
    #[serde(default)]
    pub stages: Vec<Stage>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: PipelineConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing pipeline {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for stage in &self.stages {
            match stage {
                Stage::Augmix(c) => c.validate()?,
                Stage::Sda(c) => c.validate()?,
                Stage::Fda(c) => c.validate()?,
                Stage::Mrsf(c) => c.validate()?,
                _ => {}
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of the parsed config, defaults filled in.
    pub fn hash(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        Ok(sha256_hex(canonical_json(&value).as_bytes()))
    }
}

fn partner(dir: &Path, base: &Path, name: &str) -> Result<RgbImage> {
    let path = base.join(dir).join(name);
    read_rgb_png(&path).with_context(|| format!("reading partner image {}", path.display()))
}

/// Applies one stage. Relative directories resolve against `base`.
pub fn apply_stage(stage: &Stage, img: &RgbImage, name: &str, base: &Path, rng: &mut Rng) -> Result<RgbImage> {
    let out = match stage {
        Stage::Augmix(c) => augmix(img, c, rng)?,
        Stage::Cutflip(c) => cutflip(img, c, rng)?,
        Stage::ImageMix(p) => image_mix(img, &partner(&p.partner_dir, base, name)?, p.alpha)?,
        Stage::MaeMix(m) => {
            let cfg = MaeMixConfig { mask_ratio: m.mask_ratio, patch: m.patch, alpha: m.alpha };
            match &m.reconstructions {
                Some(dir) => {
                    let recon = PrecomputedReconstruction(partner(dir, base, name)?);
                    mae_mix(img, &recon, &cfg, rng)?
                }
                None => mae_mix(img, &MeanFillBlur, &cfg, rng)?,
            }
        }
        Stage::Sda(c) => sda_mask(img, c, rng)?.0,
        Stage::Fda(c) => fda_augment(img, c, rng)?,
        Stage::Mrsf(c) => mrsf(img, c, rng)?,
        Stage::Apr(a) => apr_recombine(&partner(&a.partner_dir, base, name)?, img)?,
        Stage::L2Perturb(l) => {
            let delta: Vec<f64> = (0..img.data().len()).map(|_| rng.normal()).collect();
            l2_perturb(img, &delta, l.epsilon)?
        }
        Stage::GaussianNoise(n) => gaussian_noise(img, n.sigma, rng)?,
    };
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestFile {
    pub name: String,
    pub sub_seed: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestFailure {
    pub name: String,
    pub error: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub config_hash: String,
    pub master_seed: u64,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` when set.
    pub created_unix: u64,
    pub config: serde_json::Value,
    pub files: Vec<ManifestFile>,
    pub failed: Vec<ManifestFailure>,
    /// SHA-256 over the sorted `name:sha256` lines of all outputs.
    pub corpus_hash: String,
}

fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn list_pngs(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading directory {}", dir.display()))? {
        let path = entry?.path();
        let is_png = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if path.is_file() && is_png {
            names.push(path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string());
        }
    }
    names.sort();
    Ok(names)
}

pub fn augment(args: &AugmentArgs) -> Result<RunManifest> {
    let mut cfg = PipelineConfig::load(&args.pipeline)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if args.input.canonicalize()? == args.output.canonicalize().unwrap_or_default() {
        return Err(Failure::new("invalid_config", "output directory must differ from input").into());
    }
    std::fs::create_dir_all(&args.output)?;
    let base = args.pipeline.parent().map(Path::to_path_buf).unwrap_or_default();
    let names = list_pngs(&args.input)?;

    let process = |name: &String| -> Result<ManifestFile> {
        let seed = sub_seed(cfg.master_seed, name);
        let src = args.input.join(name);
        let dst = args.output.join(name);
        if cfg.stages.is_empty() {
            std::fs::copy(&src, &dst)?;
        } else {
            let mut rng = Rng::seeded(seed);
            let mut img = read_rgb_png(&src)?;
            for stage in &cfg.stages {
                img = apply_stage(stage, &img, name, &base, &mut rng)?;
            }
            write_rgb_png(&img, &dst)?;
        }
        let sha256 = sha256_hex(&std::fs::read(&dst)?);
        Ok(ManifestFile { name: name.clone(), sub_seed: seed, sha256 })
    };
    let results: Vec<Result<ManifestFile>> =
        pool(args.common.jobs)?.install(|| names.par_iter().map(process).collect());

    let mut files = Vec::new();
    let mut failed = Vec::new();
    for (name, res) in names.iter().zip(results) {
        match res {
            Ok(f) => files.push(f),
            Err(e) if args.common.strict => return Err(e.context(format!("augmenting `{name}`"))),
            Err(e) => failed.push(ManifestFailure {
                name: name.clone(),
                error: crate::error_kind(&e).to_string(),
                message: format!("{e:#}"),
            }),
        }
    }
    let listing: String = files.iter().map(|f| format!("{}:{}\n", f.name, f.sha256)).collect();
    Ok(RunManifest {
        tool: "rdk".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash()?,
        master_seed: cfg.master_seed,
        created_unix: timestamp(),
        config: serde_json::to_value(&cfg)?,
        files,
        failed,
        corpus_hash: sha256_hex(listing.as_bytes()),
    })
}

pub fn run(args: &AugmentArgs) -> Result<()> {
    let manifest = augment(args)?;
    let path = args.manifest.clone().unwrap_or_else(|| args.output.join("manifest.json"));
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
