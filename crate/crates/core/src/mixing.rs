//! Twice mixing: two convex blends of one high/low quality pair whose
//! relative quality is known from the blend ratios alone.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::image::{ImageError, ImageRGB};
use crate::rng::{self, SeededRng};

/// Minimum separation between the two ratios of a pair.
pub const MIN_RATIO_GAP: f64 = 0.1;

/// Rejection-sampling attempts before the random source is declared broken.
pub const MAX_SAMPLE_ATTEMPTS: usize = 1000;

/// Fixed ratios of the synthetic test set.
pub const SYNTHETIC_KS: [f64; 5] = [0.0, 0.2, 0.4, 0.6, 0.8];

#[derive(Debug, Clone, PartialEq)]
pub enum MixError {
    RatioOutOfRange(f64),
    RatiosTooClose { k1: f64, k2: f64 },
    InvalidLabel(i64),
    SamplerExhausted,
    EmptyRatios,
    UnsortedRatios,
    Image(ImageError),
}

impl fmt::Display for MixError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MixError::RatioOutOfRange(k) => write!(f, "mixing ratio {k} is outside [0, 1]"),
            MixError::RatiosTooClose { k1, k2 } => {
                write!(f, "ratios {k1} and {k2} are closer than {MIN_RATIO_GAP}")
            }
            MixError::InvalidLabel(v) => write!(f, "ranking label must be -1 or +1, got {v}"),
            MixError::SamplerExhausted => write!(
                f,
                "no valid ratio pair after {MAX_SAMPLE_ATTEMPTS} draws; random source is broken"
            ),
            MixError::EmptyRatios => write!(f, "ratio list is empty"),
            MixError::UnsortedRatios => write!(f, "ratio list must be strictly increasing"),
            MixError::Image(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for MixError {}

impl From<ImageError> for MixError {
    fn from(e: ImageError) -> Self {
        MixError::Image(e)
    }
}

/// Which image of a pair ranks higher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum RankLabel {
    /// The second image is better (`γ = +1`).
    SecondBetter,
    /// The first image is better (`γ = −1`).
    FirstBetter,
}

impl RankLabel {
    /// Label for ratios `k1`, `k2`: a larger ratio means more of the high
    /// quality endpoint, hence higher quality.
    pub fn from_ratios(k1: f64, k2: f64) -> Self {
        if k1 < k2 {
            RankLabel::SecondBetter
        } else {
            RankLabel::FirstBetter
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            RankLabel::SecondBetter => 1.0,
            RankLabel::FirstBetter => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            RankLabel::SecondBetter => RankLabel::FirstBetter,
            RankLabel::FirstBetter => RankLabel::SecondBetter,
        }
    }
}

impl TryFrom<i64> for RankLabel {
    type Error = MixError;

    fn try_from(v: i64) -> Result<Self, MixError> {
        match v {
            1 => Ok(RankLabel::SecondBetter),
            -1 => Ok(RankLabel::FirstBetter),
            other => Err(MixError::InvalidLabel(other)),
        }
    }
}

impl TryFrom<i8> for RankLabel {
    type Error = MixError;

    fn try_from(v: i8) -> Result<Self, MixError> {
        RankLabel::try_from(v as i64)
    }
}

impl From<RankLabel> for i8 {
    fn from(l: RankLabel) -> i8 {
        match l {
            RankLabel::SecondBetter => 1,
            RankLabel::FirstBetter => -1,
        }
    }
}

/// Two mixing ratios at least [`MIN_RATIO_GAP`] apart, with their label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixRatioPair {
    k1: f64,
    k2: f64,
    gamma: RankLabel,
}

impl MixRatioPair {
    pub fn new(k1: f64, k2: f64) -> Result<Self, MixError> {
        for k in [k1, k2] {
            if !(0.0..=1.0).contains(&k) {
                return Err(MixError::RatioOutOfRange(k));
            }
        }
        if (k1 - k2).abs() < MIN_RATIO_GAP {
            return Err(MixError::RatiosTooClose { k1, k2 });
        }
        Ok(Self {
            k1,
            k2,
            gamma: RankLabel::from_ratios(k1, k2),
        })
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn k2(&self) -> f64 {
        self.k2
    }

    pub fn gamma(&self) -> RankLabel {
        self.gamma
    }

    pub fn swapped(&self) -> Self {
        Self {
            k1: self.k2,
            k2: self.k1,
            gamma: self.gamma.flipped(),
        }
    }
}

/// Draws `k1, k2` i.i.d. uniform on `[0, 1)` until they are far enough apart.
pub fn sample_ratio_pair<R: RngCore + ?Sized>(rng: &mut R) -> Result<MixRatioPair, MixError> {
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let k1 = rng::unit_f64(rng);
        let k2 = rng::unit_f64(rng);
        if let Ok(pair) = MixRatioPair::new(k1, k2) {
            return Ok(pair);
        }
    }
    Err(MixError::SamplerExhausted)
}

/// Owns the random state of one training loop.
#[derive(Debug, Clone)]
pub struct RatioSampler {
    rng: SeededRng,
}

impl RatioSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: rng::seeded(seed, RATIO_STREAM),
        }
    }

    pub fn sample(&mut self) -> Result<MixRatioPair, MixError> {
        sample_ratio_pair(&mut self.rng)
    }
}

const RATIO_STREAM: u64 = 2;

/// `k·high + (1 − k)·low` per channel.
///
/// Endpoints are exact: `k = 1` returns `high` and `k = 0` returns `low` bit
/// for bit. Results are clamped to the interval spanned by the two inputs.
pub fn mix(high: &ImageRGB, low: &ImageRGB, k: f64) -> Result<ImageRGB, MixError> {
    if !(0.0..=1.0).contains(&k) {
        return Err(MixError::RatioOutOfRange(k));
    }
    high.check_same_dims(low)?;
    let data = high
        .data()
        .iter()
        .zip(low.data())
        .map(|(&a, &b)| (k * a + (1.0 - k) * b).clamp(a.min(b), a.max(b)))
        .collect();
    Ok(ImageRGB::new(high.width(), high.height(), data)?)
}

/// Two blends of one source pair and the label saying which is better.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPair {
    pub x1: ImageRGB,
    pub x2: ImageRGB,
    pub gamma: RankLabel,
}

impl RankedPair {
    pub fn swapped(&self) -> Self {
        Self {
            x1: self.x2.clone(),
            x2: self.x1.clone(),
            gamma: self.gamma.flipped(),
        }
    }
}

pub fn make_ranked_pair(
    high: &ImageRGB,
    low: &ImageRGB,
    ratios: &MixRatioPair,
) -> Result<RankedPair, MixError> {
    Ok(RankedPair {
        x1: mix(high, low, ratios.k1)?,
        x2: mix(high, low, ratios.k2)?,
        gamma: ratios.gamma,
    })
}

/// One graded image of the synthetic test set. `gt_rank` is 1-based and
/// grows with `k` (higher rank, higher quality).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticGrade {
    pub source_id: String,
    pub k: f64,
    pub image: ImageRGB,
    pub gt_rank: usize,
}

/// Endpoints of one synthetic source.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSource {
    pub id: String,
    pub high: ImageRGB,
    pub low: ImageRGB,
}

pub fn validate_ratio_list(ks: &[f64]) -> Result<(), MixError> {
    if ks.is_empty() {
        return Err(MixError::EmptyRatios);
    }
    if let Some(&k) = ks.iter().find(|k| !(0.0..=1.0).contains(*k)) {
        return Err(MixError::RatioOutOfRange(k));
    }
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MixError::UnsortedRatios);
    }
    Ok(())
}

/// One grade per `(source, k)`, sources in input order, grades in `ks` order.
pub fn build_synthetic_testset(
    sources: &[SyntheticSource],
    ks: &[f64],
) -> Result<Vec<SyntheticGrade>, MixError> {
    validate_ratio_list(ks)?;
    let mut out = Vec::with_capacity(sources.len() * ks.len());
    for src in sources {
        for (i, &k) in ks.iter().enumerate() {
            out.push(SyntheticGrade {
                source_id: src.id.clone(),
                k,
                image: mix(&src.high, &src.low, k)?,
                gt_rank: i + 1,
            });
        }
    }
    Ok(out)
}
