//! Core algorithms for rank-learned, no-reference quality assessment of
//! enhanced underwater images.
//!
//! The crate is `no_std` (it needs `alloc`) and holds everything that is pure
//! computation:
//!
//! * [`image`]: the normalized RGB raster plus CIELab, HSV and luminance views.
//! * [`metrics`]: the UIQM and UCIQE baselines and their components.
//! * [`mixing`]: twice-mixing of a high/low quality pair into ranked virtual
//!   pairs, and the fixed-ratio synthetic test set.
//! * [`ranker`]: the Siamese scorer (conv stack, global average pooling,
//!   three dense layers), margin-ranking loss, backprop and Adam.
//! * [`eval`]: Kendall and Spearman rank correlation and grouped reports.
//!
//! File formats, manifests and the command line live in the `twicemix` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod eval;
pub mod image;
mod math;
pub mod metrics;
pub mod mixing;
pub mod ranker;
pub mod rng;

pub use eval::{evaluate_groups, krcc, srcc, Ranking, RankingReport};
pub use image::{HsvImage, ImageError, ImageRGB, LabImage, Plane};
pub use metrics::{MetricBreakdown, UciqeWeights, UiqmWeights};
pub use mixing::{MixRatioPair, RankLabel, RankedPair, RatioSampler, SyntheticGrade};
pub use ranker::{AdamState, Gradients, QualityScore, RankerConfig, RankerModel};
