//! Feature-tensor statistics: channel-correlation adjacency and patch-median
//! normalization.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{read_rdkf, write_rdkf};
use crate::stats::median;

pub const MEDIAN_PATCH: usize = 4;
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Row-major `C×H×W` feature stack.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl FeatureTensor {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::RejectedInput("feature tensor dimensions must be >= 1".into()));
        }
        if values.len() != channels * height * width {
            return Err(Error::RejectedInput(format!(
                "{} values for a {channels}x{height}x{width} tensor",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::RejectedInput("feature values must be finite".into()));
        }
        Ok(FeatureTensor { channels, height, width, values })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.values[c * n..(c + 1) * n]
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let (c, h, w, values) = read_rdkf(path)?;
        FeatureTensor::new(c, h, w, values)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_rdkf(path, self.channels, self.height, self.width, &self.values)
    }
}

/// `C_e × C_f` matrix (row-major) of absolute cosines between flattened
/// channels.
pub fn channel_correlation(e: &FeatureTensor, f: &FeatureTensor) -> Result<Vec<Vec<f64>>> {
    let n = e.height * e.width;
    if n != f.height * f.width {
        return Err(Error::RejectedInput(format!(
            "channel lengths differ: {n} vs {}",
            f.height * f.width
        )));
    }
    let normalized = |t: &FeatureTensor| -> Result<Vec<Vec<f64>>> {
        (0..t.channels)
            .map(|c| {
                let ch = t.channel(c);
                let norm = ch.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::DegenerateInput(format!("channel {c} is all zero")));
                }
                Ok(ch.iter().map(|v| v / norm).collect())
            })
            .collect()
    };
    let en = normalized(e)?;
    let fn_ = normalized(f)?;
    Ok(en
        .iter()
        .map(|a| {
            fn_.iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().abs().min(1.0))
                .collect()
        })
        .collect())
}

/// Medians of the 4×4 tiles of one `height×width` plane, last tiles clipped.
pub fn patch_medians(plane: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut buf = Vec::with_capacity(MEDIAN_PATCH * MEDIAN_PATCH);
    for y0 in (0..height).step_by(MEDIAN_PATCH) {
        for x0 in (0..width).step_by(MEDIAN_PATCH) {
            buf.clear();
            for y in y0..(y0 + MEDIAN_PATCH).min(height) {
                buf.extend_from_slice(&plane[y * width + x0..y * width + (x0 + MEDIAN_PATCH).min(width)]);
            }
            out.push(median(&buf).expect("tiles are non-empty"));
        }
    }
    out
}

/// Per channel `(x − μ) / σ`, where `μ` and `σ` (population, floored at
/// 1e-6) are taken over the 4×4 patch medians.
pub fn median_normalize(f: &FeatureTensor) -> FeatureTensor {
    let mut values = Vec::with_capacity(f.values.len());
    for c in 0..f.channels {
        let ch = f.channel(c);
        let meds = patch_medians(ch, f.width, f.height);
        let n = meds.len() as f64;
        let mu = meds.iter().sum::<f64>() / n;
        let var = meds.iter().map(|m| (m - mu) * (m - mu)).sum::<f64>() / n;
        let sigma = var.sqrt().max(SIGMA_FLOOR);
        values.extend(ch.iter().map(|v| (v - mu) / sigma));
    }
    FeatureTensor { values, ..*f }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn random_tensor(c: usize, h: usize, w: usize, seed: u64) -> FeatureTensor {
        let mut r = Rng::seeded(seed);
        FeatureTensor::new(c, h, w, (0..c * h * w).map(|_| r.normal()).collect()).unwrap()
    }

    #[test]
    fn tensor_validation() {
        assert!(FeatureTensor::new(0, 1, 1, vec![]).is_err());
        assert!(FeatureTensor::new(1, 1, 2, vec![1.0]).is_err());
        assert!(FeatureTensor::new(1, 1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn self_correlation_unit_diagonal() {
        let e = random_tensor(4, 5, 3, 1);
        let a = channel_correlation(&e, &e).unwrap();
        for (i, row) in a.iter().enumerate() {
            assert!((row[i] - 1.0).abs() < 1e-12);
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, a[j][i]);
                assert!((0.0..=1.0).contains(v));
            }
        }
    }

    #[test]
    fn orthogonal_channels() {
        let e = FeatureTensor::new(2, 1, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let a = channel_correlation(&e, &e).unwrap();
        assert_eq!(a[0][1], 0.0);
        assert_eq!(a[1][0], 0.0);
    }

    #[test]
    fn correlation_errors() {
        let z = FeatureTensor::new(2, 1, 2, vec![1.0, 2.0, 0.0, 0.0]).unwrap();
        assert!(matches!(channel_correlation(&z, &z), Err(Error::DegenerateInput(_))));
        let a = random_tensor(1, 2, 3, 1);
        let b = random_tensor(1, 2, 2, 1);
        assert!(channel_correlation(&a, &b).is_err());
    }

    #[test]
    fn constant_channel_normalizes_to_zero() {
        let f = FeatureTensor::new(1, 5, 6, vec![3.5; 30]).unwrap();
        assert!(median_normalize(&f).values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn fixed_point() {
        // two 4×4 patches with medians −1 and +1: mean 0, variance 1
        let values: Vec<f64> = (0..32).map(|i| if i % 8 < 4 { -1.0 } else { 1.0 }).collect();
        let f = FeatureTensor::new(1, 4, 8, values).unwrap();
        let out = median_normalize(&f);
        for (a, b) in out.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn clipped_tiles() {
        let plane: Vec<f64> = (0..30).map(f64::from).collect();
        // 6×5 plane: tiles 4×4, 2×4, 4×1, 2×1
        let meds = patch_medians(&plane, 6, 5);
        assert_eq!(meds.len(), 4);
        assert_eq!(meds[3], 28.5);
    }

    #[test]
    fn rdkf_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.rdkf");
        let t = FeatureTensor::new(2, 2, 2, vec![0.5, 1.0, -2.0, 4.0, 0.0, 8.0, 0.25, -1.5]).unwrap();
        t.write(&p).unwrap();
        assert_eq!(FeatureTensor::read(&p).unwrap(), t);
    }

    proptest! {
        #[test]
        fn correlation_scale_invariant(seed in any::<u64>(), s in 0.01f64..100.0) {
            let e = random_tensor(3, 4, 4, seed);
            let f = random_tensor(2, 2, 8, seed ^ 1);
            let scaled = FeatureTensor::new(3, 4, 4, e.values().iter().map(|v| v * s).collect()).unwrap();
            let a = channel_correlation(&e, &f).unwrap();
            let b = channel_correlation(&scaled, &f).unwrap();
            for (ra, rb) in a.iter().zip(&b) {
                for (x, y) in ra.iter().zip(rb) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn normalize_shift_invariant(seed in any::<u64>(), k in -50.0f64..50.0) {
            let f = random_tensor(2, 9, 7, seed);
            let shifted = FeatureTensor::new(2, 9, 7, f.values().iter().map(|v| v + k).collect()).unwrap();
            let a = median_normalize(&f);
            let b = median_normalize(&shifted);
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn normalized_median_stats(seed in any::<u64>()) {
            let out = median_normalize(&random_tensor(1, 12, 16, seed));
            let meds = patch_medians(out.channel(0), 16, 12);
            let n = meds.len() as f64;
            let mu = meds.iter().sum::<f64>() / n;
            let var = meds.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / n;
            prop_assert!(mu.abs() < 1e-6);
            prop_assert!((var - 1.0).abs() < 1e-6);
        }
    }
}
