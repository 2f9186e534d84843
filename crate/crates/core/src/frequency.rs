//! 2-D Fourier utilities and frequency-domain augmentations: amplitude-phase
//! recombination (APR), rotation-based frequency recombination (FDA) and the
//! FDA→SDA composition (MRSF).

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::augment::{sda_mask, SdaConfig};
use crate::error::{Error, Result};
use crate::geometry::{rotate, Fill};
use crate::image::RgbImage;
use crate::rng::Rng;

/// Row-major 2-D spectrum. With `centered` set, DC sits at
/// `(height / 2, width / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub width: usize,
    pub height: usize,
    pub values: Vec<Complex64>,
    pub centered: bool,
}

impl Spectrum {
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Complex64 {
        self.values[u * self.width + v]
    }

    fn roll(&self, dy: usize, dx: usize) -> Vec<Complex64> {
        let (w, h) = (self.width, self.height);
        let mut out = vec![Complex64::new(0.0, 0.0); w * h];
        for u in 0..h {
            for v in 0..w {
                out[((u + dy) % h) * w + (v + dx) % w] = self.values[u * w + v];
            }
        }
        out
    }

    /// fftshift; no-op when already centered.
    pub fn to_centered(&self) -> Spectrum {
        if self.centered {
            return self.clone();
        }
        let values = self.roll(self.height / 2, self.width / 2);
        Spectrum { values, centered: true, ..*self }
    }

    /// ifftshift; no-op when already uncentered.
    pub fn to_uncentered(&self) -> Spectrum {
        if !self.centered {
            return self.clone();
        }
        let values = self.roll(self.height - self.height / 2, self.width - self.width / 2);
        Spectrum { values, centered: false, ..*self }
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.norm()).collect()
    }
}

fn fft2_in_place(data: &mut [Complex64], width: usize, height: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height))
    } else {
        (planner.plan_fft_forward(width), planner.plan_fft_forward(height))
    };
    for row in data.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); height];
    for v in 0..width {
        for u in 0..height {
            col[u] = data[u * width + v];
        }
        col_fft.process(&mut col);
        for u in 0..height {
            data[u * width + v] = col[u];
        }
    }
    if inverse {
        let n = (width * height) as f64;
        data.iter_mut().for_each(|c| *c /= n);
    }
}

fn check_plane(len: usize, width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::RejectedInput("transform needs a non-empty plane".into()));
    }
    if len != width * height {
        return Err(Error::RejectedInput(format!("plane has {len} samples, expected {}", width * height)));
    }
    Ok(())
}

/// Unnormalized forward transform of a complex plane (uncentered).
pub fn fft2_complex(plane: &[Complex64], width: usize, height: usize) -> Result<Spectrum> {
    check_plane(plane.len(), width, height)?;
    let mut values = plane.to_vec();
    fft2_in_place(&mut values, width, height, false);
    Ok(Spectrum { width, height, values, centered: false })
}

/// Unnormalized forward transform of a real plane (uncentered).
pub fn fft2(plane: &[f64], width: usize, height: usize) -> Result<Spectrum> {
    let c: Vec<Complex64> = plane.iter().map(|x| Complex64::new(*x, 0.0)).collect();
    fft2_complex(&c, width, height)
}

/// Inverse transform with `1/(W·H)` normalization.
pub fn ifft2(spectrum: &Spectrum) -> Result<Vec<Complex64>> {
    check_plane(spectrum.values.len(), spectrum.width, spectrum.height)?;
    let mut values = spectrum.to_uncentered().values;
    fft2_in_place(&mut values, spectrum.width, spectrum.height, true);
    Ok(values)
}

/// Real part of [`ifft2`].
pub fn ifft2_real(spectrum: &Spectrum) -> Result<Vec<f64>> {
    Ok(ifft2(spectrum)?.into_iter().map(|c| c.re).collect())
}

/// Per-channel spectra of an RGB image.
pub fn fft2_rgb(image: &RgbImage) -> Result<[Spectrum; 3]> {
    let (w, h) = image.dims();
    Ok([fft2(&image.channel(0), w, h)?, fft2(&image.channel(1), w, h)?, fft2(&image.channel(2), w, h)?])
}

fn rgb_from_spectra(spectra: &[Spectrum; 3]) -> Result<RgbImage> {
    let (w, h) = (spectra[0].width, spectra[0].height);
    let planes = [ifft2_real(&spectra[0])?, ifft2_real(&spectra[1])?, ifft2_real(&spectra[2])?];
    RgbImage::from_planes(w, h, [&planes[0], &planes[1], &planes[2]])
}

/// Per channel `|F(amplitude_src)| · exp(i·arg F(phase_src))`, before the
/// inverse transform.
pub fn apr_spectra(amplitude_src: &RgbImage, phase_src: &RgbImage) -> Result<[Spectrum; 3]> {
    amplitude_src.check_same_dims(phase_src)?;
    let a = fft2_rgb(amplitude_src)?;
    let p = fft2_rgb(phase_src)?;
    let mix = |c: usize| {
        let values =
            a[c].values.iter().zip(&p[c].values).map(|(x, y)| Complex64::from_polar(x.norm(), y.arg())).collect();
        Spectrum { values, ..a[c].clone() }
    };
    Ok([mix(0), mix(1), mix(2)])
}

/// Amplitude spectrum of one image combined with the phase spectrum of
/// another; real part of the inverse, clamped to `[0, 1]`.
pub fn apr_recombine(amplitude_src: &RgbImage, phase_src: &RgbImage) -> Result<RgbImage> {
    rgb_from_spectra(&apr_spectra(amplitude_src, phase_src)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FdaConfig {
    /// Degrees, counter-clockwise.
    pub theta: f64,
    /// Side `S` of the centered low-frequency square, in bins.
    pub low_freq_size: usize,
    /// Fraction of high-frequency conjugate pairs to zero.
    pub highfreq_mask_ratio: f64,
}

impl Default for FdaConfig {
    fn default() -> Self {
        FdaConfig { theta: 24.0, low_freq_size: 50, highfreq_mask_ratio: 0.1 }
    }
}

impl FdaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..360.0).contains(&self.theta) {
            return Err(Error::InvalidConfig(format!("theta {} not in [0, 360)", self.theta)));
        }
        if self.low_freq_size == 0 {
            return Err(Error::InvalidConfig("low frequency size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.highfreq_mask_ratio) {
            return Err(Error::InvalidConfig(format!("mask ratio {} not in [0, 1]", self.highfreq_mask_ratio)));
        }
        Ok(())
    }

    fn validate_for(&self, width: usize, height: usize) -> Result<()> {
        self.validate()?;
        if self.low_freq_size > width.min(height) {
            return Err(Error::InvalidConfig(format!(
                "low frequency size {} exceeds image side {}",
                self.low_freq_size,
                width.min(height)
            )));
        }
        Ok(())
    }
}

/// Low-frequency region in uncentered indexing: the centered `S×S` square
/// together with its conjugate mirror, so the region is closed under
/// `k → −k`. For odd `S` the square already is.
pub fn low_frequency_region(width: usize, height: usize, s: usize) -> Vec<bool> {
    let in_square = |u: usize, v: usize| {
        let pu = (u + height / 2) % height;
        let pv = (v + width / 2) % width;
        let (u0, v0) = (height / 2 - s / 2, width / 2 - s / 2);
        (u0..u0 + s).contains(&pu) && (v0..v0 + s).contains(&pv)
    };
    let mut region = vec![false; width * height];
    for u in 0..height {
        for v in 0..width {
            region[u * width + v] = in_square(u, v) || in_square((height - u) % height, (width - v) % width);
        }
    }
    region
}

/// Conjugate classes `{k, −k}` of the bins outside `region`, each listed by
/// its members (one or two flat indices), in row-major order of the first
/// member.
fn conjugate_classes(width: usize, height: usize, region: &[bool]) -> Vec<Vec<usize>> {
    let mut classes = Vec::new();
    for u in 0..height {
        for v in 0..width {
            let i = u * width + v;
            let j = ((height - u) % height) * width + (width - v) % width;
            if region[i] || j < i {
                continue;
            }
            classes.push(if i == j { vec![i] } else { vec![i, j] });
        }
    }
    classes
}

/// Rotates by `θ` (bilinear, reflect fill), keeps the original's spectrum in
/// the low-frequency region and the rotated image's elsewhere, zeroes a
/// random fraction of high-frequency conjugate pairs, and transforms back.
pub fn fda_augment(image: &RgbImage, cfg: &FdaConfig, rng: &mut Rng) -> Result<RgbImage> {
    let (w, h) = image.dims();
    cfg.validate_for(w, h)?;
    let rotated = rotate(image, cfg.theta, Fill::Reflect);
    let orig = fft2_rgb(image)?;
    let rot = fft2_rgb(&rotated)?;
    let region = low_frequency_region(w, h, cfg.low_freq_size);
    let classes = conjugate_classes(w, h, &region);
    let n_zero = (cfg.highfreq_mask_ratio * classes.len() as f64).round() as usize;
    let mut zeroed = vec![false; w * h];
    for c in rng.sample_indices(classes.len(), n_zero) {
        for &i in &classes[c] {
            zeroed[i] = true;
        }
    }
    let splice = |c: usize| {
        let values = (0..w * h)
            .map(|i| {
                if region[i] {
                    orig[c].values[i]
                } else if zeroed[i] {
                    Complex64::new(0.0, 0.0)
                } else {
                    rot[c].values[i]
                }
            })
            .collect();
        Spectrum { width: w, height: h, values, centered: false }
    };
    rgb_from_spectra(&[splice(0), splice(1), splice(2)])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MrsfConfig {
    pub rho1: f64,
    pub rho2: f64,
    pub fda: FdaConfig,
    pub sda: SdaConfig,
}

impl Default for MrsfConfig {
    fn default() -> Self {
        MrsfConfig { rho1: 0.5, rho2: 0.5, fda: FdaConfig::default(), sda: SdaConfig::default() }
    }
}

impl MrsfConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("rho1", self.rho1), ("rho2", self.rho2)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} {p} not in [0, 1]")));
            }
        }
        self.fda.validate()?;
        self.sda.validate()
    }
}

/// Which stages an MRSF call applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MrsfOutcome {
    pub fda_applied: bool,
    pub sda_applied: bool,
}

/// Random stream layout of one MRSF call: both coin flips are drawn first,
/// then one child stream for FDA and one for SDA.
pub struct MrsfStreams {
    pub apply_fda: bool,
    pub apply_sda: bool,
    pub fda: Rng,
    pub sda: Rng,
}

impl MrsfStreams {
    pub fn draw(cfg: &MrsfConfig, rng: &mut Rng) -> Self {
        let apply_fda = rng.bernoulli(cfg.rho1);
        let apply_sda = rng.bernoulli(cfg.rho2);
        MrsfStreams { apply_fda, apply_sda, fda: rng.fork(), sda: rng.fork() }
    }
}

/// FDA with probability `rho1`, then SDA with probability `rho2`.
pub fn mrsf_traced(image: &RgbImage, cfg: &MrsfConfig, rng: &mut Rng) -> Result<(RgbImage, MrsfOutcome)> {
    cfg.validate()?;
    let mut s = MrsfStreams::draw(cfg, rng);
    let mut out = image.clone();
    if s.apply_fda {
        out = fda_augment(&out, &cfg.fda, &mut s.fda)?;
    }
    if s.apply_sda {
        out = sda_mask(&out, &cfg.sda, &mut s.sda)?.0;
    }
    Ok((out, MrsfOutcome { fda_applied: s.apply_fda, sda_applied: s.apply_sda }))
}

pub fn mrsf(image: &RgbImage, cfg: &MrsfConfig, rng: &mut Rng) -> Result<RgbImage> {
    Ok(mrsf_traced(image, cfg, rng)?.0)
}
