//! Pinhole reprojection and bilinear view synthesis.
//!
//! Integer pixel coordinates address pixel centers. View synthesis is a
//! backward warp: every target pixel is backprojected with the target depth,
//! moved by the target→source pose, projected into the source camera, and the
//! source image is sampled there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{DepthMap, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntrinsicsRecord")]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

#[derive(Deserialize)]
struct IntrinsicsRecord {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
}

impl TryFrom<IntrinsicsRecord> for Intrinsics {
    type Error = Error;
    fn try_from(r: IntrinsicsRecord) -> Result<Self> {
        Intrinsics::new(r.fx, r.fy, r.cx, r.cy)
    }
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::InvalidConfig(format!("focal lengths ({fx}, {fy}) must be positive")));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidConfig("principal point must be finite".into()));
        }
        Ok(Intrinsics { fx, fy, cx, cy })
    }
}

/// Rigid transform `x ↦ R·x + t`. Serialized as `{"rotation": [9 reals, row-major], "translation": [3 reals]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRecord", into = "PoseRecord")]
pub struct RigidPose {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct PoseRecord {
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl TryFrom<PoseRecord> for RigidPose {
    type Error = Error;
    fn try_from(r: PoseRecord) -> Result<Self> {
        let m = r.rotation;
        RigidPose::new([[m[0], m[1], m[2]], [m[3], m[4], m[5]], [m[6], m[7], m[8]]], r.translation)
    }
}

impl From<RigidPose> for PoseRecord {
    fn from(p: RigidPose) -> Self {
        let r = p.rotation;
        PoseRecord {
            rotation: [r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2]],
            translation: p.translation,
        }
    }
}

const ORTHO_TOL: f64 = 1e-9;

impl RigidPose {
    pub fn new(rotation: [[f64; 3]; 3], translation: [f64; 3]) -> Result<Self> {
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| rotation[k][i] * rotation[k][j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot - target).abs() > ORTHO_TOL {
                    return Err(Error::InvalidConfig("rotation is not orthonormal".into()));
                }
            }
        }
        if (det3(&rotation) - 1.0).abs() > ORTHO_TOL {
            return Err(Error::InvalidConfig("rotation determinant is not +1".into()));
        }
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("translation must be finite".into()));
        }
        Ok(RigidPose { rotation, translation })
    }

    pub fn identity() -> Self {
        RigidPose {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    pub fn translation_only(t: [f64; 3]) -> Result<Self> {
        Self::new(Self::identity().rotation, t)
    }

    /// Rotation about a unit axis by `angle` radians (Rodrigues), then translation.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64, t: [f64; 3]) -> Result<Self> {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n == 0.0 {
            return Err(Error::InvalidConfig("zero rotation axis".into()));
        }
        let [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
        let (s, c) = angle.sin_cos();
        let v = 1.0 - c;
        let r = [
            [c + x * x * v, x * y * v - z * s, x * z * v + y * s],
            [y * x * v + z * s, c + y * y * v, y * z * v - x * s],
            [z * x * v - y * s, z * y * v + x * s, c + z * z * v],
        ];
        Self::new(r, t)
    }

    pub fn rotation(&self) -> &[[f64; 3]; 3] {
        &self.rotation
    }

    pub fn translation(&self) -> &[f64; 3] {
        &self.translation
    }

    pub fn inverse(&self) -> Self {
        let r = &self.rotation;
        let rt = [
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        ];
        let t = &self.translation;
        let ti = [0, 1, 2].map(|i| -(rt[i][0] * t[0] + rt[i][1] * t[1] + rt[i][2] * t[2]));
        RigidPose { rotation: rt, translation: ti }
    }
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Continuous source coordinates per output pixel, with an in-bounds flag
/// (`0 ≤ u ≤ W−1`, `0 ≤ v ≤ H−1` of the source).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    width: usize,
    height: usize,
    coords: Vec<(f64, f64)>,
    in_bounds: Vec<bool>,
}

impl SampleGrid {
    /// `coords` of `None` are out of bounds regardless of position.
    pub fn new(
        width: usize,
        height: usize,
        coords: Vec<Option<(f64, f64)>>,
        source_dims: (usize, usize),
    ) -> Result<Self> {
        if coords.len() != width * height {
            return Err(Error::RejectedInput("grid length does not match dimensions".into()));
        }
        let (sw, sh) = (source_dims.0 as f64, source_dims.1 as f64);
        let in_bounds = coords
            .iter()
            .map(|c| match c {
                Some((u, v)) => (0.0..=sw - 1.0).contains(u) && (0.0..=sh - 1.0).contains(v),
                None => false,
            })
            .collect();
        let coords = coords.into_iter().map(|c| c.unwrap_or((f64::NAN, f64::NAN))).collect();
        Ok(SampleGrid { width, height, coords, in_bounds })
    }

    pub fn identity(width: usize, height: usize) -> Self {
        let coords = (0..height)
            .flat_map(|y| (0..width).map(move |x| Some((x as f64, y as f64))))
            .collect();
        Self::new(width, height, coords, (width, height)).expect("sizes agree")
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn coords(&self) -> &[(f64, f64)] {
        &self.coords
    }

    pub fn in_bounds(&self) -> &[bool] {
        &self.in_bounds
    }
}

/// Moves one pixel with depth `z` through `pose` and projects it again.
/// Returns `(u', v', z')`, or `None` when the transformed depth is not positive.
///
/// Written as `u' = u + fx·(a/b − xₙ)` with `a/b` the projected normalized
/// coordinate, so the identity pose maps every pixel onto itself exactly.
pub fn reproject_point(u: f64, v: f64, z: f64, pose: &RigidPose, k: &Intrinsics) -> Option<(f64, f64, f64)> {
    let xn = (u - k.cx) / k.fx;
    let yn = (v - k.cy) / k.fy;
    let r = &pose.rotation;
    let t = &pose.translation;
    let a = r[0][0] * xn + r[0][1] * yn + r[0][2] + t[0] / z;
    let b = r[1][0] * xn + r[1][1] * yn + r[1][2] + t[1] / z;
    let c = r[2][0] * xn + r[2][1] * yn + r[2][2] + t[2] / z;
    if !(c > 0.0) {
        return None;
    }
    Some((u + k.fx * (a / c - xn), v + k.fy * (b / c - yn), z * c))
}

/// Sampling grid for a backward warp of the source view into the target
/// view given target depth. Invalid depth pixels and points behind the source
/// camera are out of bounds.
pub fn reproject(depth: &DepthMap, pose: &RigidPose, k: &Intrinsics) -> SampleGrid {
    let (w, h) = depth.dims();
    let mut coords = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let c = if depth.is_valid(x, y) {
                reproject_point(x as f64, y as f64, depth.get(x, y), pose, k).map(|(u, v, _)| (u, v))
            } else {
                None
            };
            coords.push(c);
        }
    }
    SampleGrid::new(w, h, coords, (w, h)).expect("sizes agree")
}

/// Border handling for samplers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fill {
    /// Out-of-frame samples are 0 and reported as uncovered.
    Zero,
    /// Coordinates reflect about the border pixels (`-1 → 1`, `W → W−2`).
    Reflect,
}

/// Output of a warp: the image and a per-pixel coverage mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Warped {
    pub image: RgbImage,
    pub coverage: Vec<bool>,
}

fn reflect_coord(c: f64, n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let period = 2.0 * (n - 1) as f64;
    let mut m = c.abs() % period;
    if m > (n - 1) as f64 {
        m = period - m;
    }
    m
}

#[inline]
fn bilinear_at(src: &RgbImage, u: f64, v: f64, out: &mut [f64]) {
    let (w, h) = src.dims();
    let x0 = (u.floor() as usize).min(w.saturating_sub(2));
    let y0 = (v.floor() as usize).min(h.saturating_sub(2));
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = u - x0 as f64;
    let fy = v - y0 as f64;
    for (c, o) in out.iter_mut().enumerate() {
        let top = src.get(x0, y0, c) * (1.0 - fx) + src.get(x1, y0, c) * fx;
        let bottom = src.get(x0, y1, c) * (1.0 - fx) + src.get(x1, y1, c) * fx;
        *o = top * (1.0 - fy) + bottom * fy;
    }
}

/// Bilinear sampling of `src` at arbitrary coordinates with the given fill rule.
pub fn sample_coords(src: &RgbImage, width: usize, height: usize, coords: &[(f64, f64)], fill: Fill) -> Warped {
    let (sw, sh) = src.dims();
    let mut data = vec![0.0; width * height * 3];
    let mut coverage = vec![false; width * height];
    if sw == 0 || sh == 0 {
        return Warped { image: RgbImage::from_raw_unchecked(width, height, data), coverage };
    }
    for (i, &(u, v)) in coords.iter().enumerate() {
        let inside = (0.0..=(sw - 1) as f64).contains(&u) && (0.0..=(sh - 1) as f64).contains(&v);
        let (u, v) = match (inside, fill) {
            (true, _) => (u, v),
            (false, Fill::Zero) => continue,
            (false, Fill::Reflect) if u.is_finite() && v.is_finite() => {
                (reflect_coord(u, sw), reflect_coord(v, sh))
            }
            (false, Fill::Reflect) => continue,
        };
        bilinear_at(src, u, v, &mut data[i * 3..i * 3 + 3]);
        coverage[i] = true;
    }
    // convex combinations of [0, 1] samples stay in range up to rounding
    for s in &mut data {
        *s = s.clamp(0.0, 1.0);
    }
    Warped { image: RgbImage::from_raw_unchecked(width, height, data), coverage }
}

/// Samples `src` at the grid; out-of-bounds pixels are 0 and uncovered.
/// Grid entries built from `None` carry NaN coordinates and fall out here too.
pub fn sample_bilinear(src: &RgbImage, grid: &SampleGrid) -> Warped {
    let (w, h) = grid.dims();
    sample_coords(src, w, h, grid.coords(), Fill::Zero)
}

/// Synthesizes the target view from a source image, target depth and the
/// target→source pose.
pub fn synthesize_view(src: &RgbImage, depth: &DepthMap, pose: &RigidPose, k: &Intrinsics) -> Result<Warped> {
    if src.dims() != depth.dims() {
        return Err(Error::DimensionMismatch { expected: depth.dims(), actual: src.dims() });
    }
    Ok(sample_bilinear(src, &reproject(depth, pose, k)))
}

/// Applies an affine map given as the inverse transform (output → source
/// coordinates): `src = M · [x, y, 1]`.
pub fn warp_affine(src: &RgbImage, inverse: [[f64; 3]; 2], fill: Fill) -> Warped {
    let (w, h) = src.dims();
    let coords: Vec<(f64, f64)> = (0..h)
        .flat_map(|y| {
            (0..w).map(move |x| {
                let (xf, yf) = (x as f64, y as f64);
                (
                    inverse[0][0] * xf + inverse[0][1] * yf + inverse[0][2],
                    inverse[1][0] * xf + inverse[1][1] * yf + inverse[1][2],
                )
            })
        })
        .collect();
    sample_coords(src, w, h, &coords, fill)
}

/// Rotates counter-clockwise by `degrees` about the image center.
pub fn rotate(src: &RgbImage, degrees: f64, fill: Fill) -> RgbImage {
    if degrees == 0.0 {
        return src.clone();
    }
    let (w, h) = src.dims();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (s, c) = degrees.to_radians().sin_cos();
    // inverse rotation: source = R(-θ)·(p − center) + center, y axis pointing down
    let inv = [[c, -s, cx - c * cx + s * cy], [s, c, cy - s * cx - c * cy]];
    warp_affine(src, inv, fill).image
}
