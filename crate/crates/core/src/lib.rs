//! Depth-robustness toolkit.
//!
//! Closed-form implementations of monocular-depth evaluation metrics,
//! self-supervised losses, spatial and frequency-domain augmentations,
//! feature statistics and prediction ensembles. No neural-network code.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod depth;
pub mod ensemble;
pub mod error;
pub mod featstats;
pub mod frequency;
pub mod geometry;
pub mod image;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod rng;
pub mod stats;

pub use depth::{align_pair, disparity_to_depth, EvalOptions};
pub use error::{Error, Result};
pub use featstats::FeatureTensor;
pub use frequency::Spectrum;
pub use image::{DepthMap, DisparityMap, RgbImage, ValidPairView};
pub use metrics::{LeaderboardEntry, MetricReport, Track};
pub use rng::Rng;
