//! Input builders shared by the benchmarks.

use rdk_core::{DepthMap, RgbImage, Rng};

pub fn random_rgb(width: usize, height: usize, seed: u64) -> RgbImage {
    let mut rng = Rng::seeded(seed);
    RgbImage::from_fn(width, height, |_, _, _| rng.uniform()).expect("samples are in [0, 1]")
}

pub fn random_depth(width: usize, height: usize, seed: u64) -> DepthMap {
    let mut rng = Rng::seeded(seed);
    let values = (0..width * height).map(|_| rng.uniform_range(0.5, 80.0)).collect();
    DepthMap::dense(width, height, values).expect("positive depths")
}
