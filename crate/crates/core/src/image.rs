//! Image and depth containers shared by every module.
//!
//! All buffers are row-major. `RgbImage` interleaves its three channels per
//! pixel (`[r, g, b, r, g, b, ...]`).

use crate::error::{check_dims, Error, Result};

/// An H×W×3 image with samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::RejectedInput(format!(
                "rgb buffer has {} samples, expected {}",
                data.len(),
                width * height * 3
            )));
        }
        if let Some(s) = data.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::RejectedInput(format!("rgb sample {s} outside [0, 1]")));
        }
        Ok(RgbImage { width, height, data })
    }

    /// Builds an image from arbitrary reals, clamping each sample into `[0, 1]`.
    /// NaN samples become 0.
    pub fn from_clamped(width: usize, height: usize, mut data: Vec<f64>) -> Result<Self> {
        for s in &mut data {
            *s = if s.is_nan() { 0.0 } else { s.clamp(0.0, 1.0) };
        }
        Self::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height * 3])
    }

    /// Builds an image by evaluating `f(x, y, channel)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                for c in 0..3 {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, data)
    }

    pub(crate) fn from_raw_unchecked(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * 3);
        RgbImage { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * 3 + c]
    }

    /// One channel as a row-major plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(3).copied().collect()
    }

    /// Reassembles an image from three planes, clamping into `[0, 1]`.
    pub fn from_planes(width: usize, height: usize, planes: [&[f64]; 3]) -> Result<Self> {
        for p in &planes {
            if p.len() != width * height {
                return Err(Error::RejectedInput("plane length mismatch".into()));
            }
        }
        let mut data = Vec::with_capacity(width * height * 3);
        for i in 0..width * height {
            for p in &planes {
                data.push(p[i]);
            }
        }
        Self::from_clamped(width, height, data)
    }

    pub fn check_same_dims(&self, other: &RgbImage) -> Result<()> {
        check_dims(self.dims(), other.dims())
    }
}

/// Metric depth with a per-pixel validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        if values.len() != width * height || valid.len() != width * height {
            return Err(Error::RejectedInput(format!(
                "depth buffers have {}/{} entries, expected {}",
                values.len(),
                valid.len(),
                width * height
            )));
        }
        for (v, ok) in values.iter().zip(&valid) {
            if *ok && !(v.is_finite() && *v > 0.0) {
                return Err(Error::RejectedInput(format!("valid depth {v} is not positive")));
            }
        }
        Ok(DepthMap { width, height, values, valid })
    }

    /// Marks every finite positive value valid and everything else invalid.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        let valid = values.iter().map(|v| v.is_finite() && *v > 0.0).collect();
        Self::new(width, height, values, valid)
    }

    /// A fully valid map; every value must be finite and positive.
    pub fn dense(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        let valid = vec![true; values.len()];
        Self::new(width, height, values, valid)
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::dense(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Values of valid pixels in row-major order.
    pub fn valid_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.valid)
            .filter_map(|(v, ok)| ok.then_some(*v))
            .collect()
    }

    /// Multiplies every valid value by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .zip(&self.valid)
            .map(|(v, ok)| if *ok { v * factor } else { *v })
            .collect();
        Self::new(self.width, self.height, values, self.valid.clone())
    }

    pub fn check_same_dims(&self, other: &DepthMap) -> Result<()> {
        check_dims(self.dims(), other.dims())
    }
}

/// Inverse depth (up to scale). Values are nonnegative; `+inf` is allowed and
/// rejected only by conversions that need finite input.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DisparityMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::RejectedInput(format!(
                "disparity buffer has {} entries, expected {}",
                values.len(),
                width * height
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::RejectedInput(format!("disparity {v} is negative or NaN")));
        }
        Ok(DisparityMap { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Mirror left/right.
    pub fn flipped_horizontally(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for row in self.values.chunks_exact(self.width.max(1)) {
            values.extend(row.iter().rev());
        }
        DisparityMap { width: self.width, height: self.height, values }
    }
}

/// Co-valid ground-truth / prediction samples of one image after masking,
/// clamping and optional scaling. Every entry is strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidPairView {
    gt: Vec<f64>,
    pred: Vec<f64>,
}

impl ValidPairView {
    pub fn new(gt: Vec<f64>, pred: Vec<f64>) -> Result<Self> {
        if gt.len() != pred.len() {
            return Err(Error::RejectedInput(format!(
                "pair lengths differ: {} vs {}",
                gt.len(),
                pred.len()
            )));
        }
        if gt.iter().chain(&pred).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::RejectedInput("pair entries must be finite and positive".into()));
        }
        Ok(ValidPairView { gt, pred })
    }

    pub fn gt(&self) -> &[f64] {
        &self.gt
    }

    pub fn pred(&self) -> &[f64] {
        &self.pred
    }

    pub fn len(&self) -> usize {
        self.gt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gt.is_empty()
    }

    /// Concatenates several views into one pooled view.
    pub fn pooled<'a>(views: impl IntoIterator<Item = &'a ValidPairView>) -> Self {
        let mut gt = Vec::new();
        let mut pred = Vec::new();
        for v in views {
            gt.extend_from_slice(&v.gt);
            pred.extend_from_slice(&v.pred);
        }
        ValidPairView { gt, pred }
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.gt.iter().copied().zip(self.pred.iter().copied())
    }
}
