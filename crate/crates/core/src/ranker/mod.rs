//! The trainable quality scorer and its Siamese training.
//!
//! Architecture: a stack of 3x3 convolution blocks (stride 1, zero "same"
//! padding, ReLU, 2x2 max pooling between blocks), channel-wise global
//! average pooling, then three dense layers (ReLU, ReLU, linear) ending in
//! one scalar. Global pooling makes the scorer accept any image size above
//! [`RankerModel::min_input_side`].
//!
//! Parameters are kept as an ordered list of named tensors:
//! `conv{i}.weight [out, in, k, k]`, `conv{i}.bias [out]` for each block,
//! then `fc{j}.weight [out, in]`, `fc{j}.bias [out]` for `j = 0, 1, 2`.
//! Gradients and Adam moments use the same order.

mod layers;
mod train;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::image::{ImageRGB, MIN_SIDE};
use crate::mixing::MixError;
use crate::rng;
use layers::FeatureMap;

pub use train::{
    adam_step, backward, loss_and_gradients, margin_rank_loss, train, AdamState, TrainLog,
};

/// Version of the parameter layout written to model files.
pub const MODEL_VERSION: u32 = 1;

const INIT_STREAM: u64 = 0;

#[derive(Debug, Clone, PartialEq)]
pub enum RankerError {
    InvalidConfig(String),
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    ShapeMismatch(String),
    NonFiniteWeight(String),
    EmptyDataset,
    Mix(MixError),
}

impl fmt::Display for RankerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankerError::InvalidConfig(m) => write!(f, "invalid ranker config: {m}"),
            RankerError::ImageTooSmall { width, height, min } => {
                write!(f, "image {width}x{height} is below the scorer minimum {min}x{min}")
            }
            RankerError::ShapeMismatch(m) => write!(f, "shape mismatch: {m}"),
            RankerError::NonFiniteWeight(name) => write!(f, "non-finite value in {name}"),
            RankerError::EmptyDataset => write!(f, "training set is empty"),
            RankerError::Mix(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for RankerError {}

impl From<MixError> for RankerError {
    fn from(e: MixError) -> Self {
        RankerError::Mix(e)
    }
}

/// Architecture and optimization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerConfig {
    pub conv_channels: Vec<usize>,
    pub kernel_size: usize,
    /// Widths of the two hidden dense layers; a scalar output layer follows.
    pub fc_widths: Vec<usize>,
    /// Margin of the ranking hinge.
    pub epsilon: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Training images are area-downscaled so their longer side is at most
    /// this many pixels.
    pub max_side: usize,
}

impl Default for RankerConfig {
    fn default() -> Self {
        Self {
            conv_channels: vec![8, 16, 32],
            kernel_size: 3,
            fc_widths: vec![32, 16],
            epsilon: 0.5,
            learning_rate: 1e-6,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 20,
            seed: 0,
            max_side: 128,
        }
    }
}

impl RankerConfig {
    pub fn validate(&self) -> Result<(), RankerError> {
        let bad = |m: &str| Err(RankerError::InvalidConfig(m.into()));
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return bad("conv_channels must be a non-empty list of positive integers");
        }
        if self.conv_channels.len() > 16 {
            return bad("at most 16 conv blocks are supported");
        }
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return bad("kernel_size must be odd");
        }
        if self.fc_widths.len() != 2 || self.fc_widths.contains(&0) {
            return bad("fc_widths must hold exactly two positive widths");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam eps must be positive");
        }
        if self.max_side < MIN_SIDE {
            return bad("max_side must be at least 8");
        }
        Ok(())
    }

    /// `(name, shape)` of every parameter tensor in storage order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let k = self.kernel_size;
        let mut out = Vec::new();
        let mut c_in = 3;
        for (i, &c) in self.conv_channels.iter().enumerate() {
            out.push((format!("conv{i}.weight"), vec![c, c_in, k, k]));
            out.push((format!("conv{i}.bias"), vec![c]));
            c_in = c;
        }
        let widths = [self.fc_widths[0], self.fc_widths[1], 1];
        for (j, &width) in widths.iter().enumerate() {
            out.push((format!("fc{j}.weight"), vec![width, c_in]));
            out.push((format!("fc{j}.bias"), vec![width]));
            c_in = width;
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }
}

/// One named parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Output of the scorer. Larger means better quality.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct QualityScore(pub f64);

impl QualityScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Weights and architecture of the scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct RankerModel {
    config: RankerConfig,
    params: Vec<Param>,
}

/// Per-parameter gradient tensors, in model storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &RankerModel) -> Self {
        Self {
            tensors: model.params.iter().map(|p| vec![0.0; p.values.len()]).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.tensors.iter().flatten().all(|&g| g == 0.0)
    }

    pub fn scale(&mut self, s: f64) {
        self.tensors.iter_mut().flatten().for_each(|g| *g *= s);
    }
}

/// Intermediate values of one forward pass, kept for backprop.
pub(crate) struct ForwardTrace {
    conv_inputs: Vec<FeatureMap>,
    conv_pre: Vec<Vec<f64>>,
    pool_argmax: Vec<Vec<usize>>,
    last_shape: (usize, usize, usize),
    dense_inputs: Vec<Vec<f64>>,
    dense_pre: Vec<Vec<f64>>,
    score: f64,
}

impl RankerModel {
    /// Fan-in scaled uniform initialization, `U(−√(6/fan_in), √(6/fan_in))`
    /// for weights and zero biases, drawn from `config.seed`.
    pub fn init(config: RankerConfig) -> Result<Self, RankerError> {
        config.validate()?;
        let mut rng = rng::seeded(config.seed, INIT_STREAM);
        let params = config
            .param_shapes()
            .into_iter()
            .map(|(name, shape)| {
                let len = shape.iter().product();
                let values = if name.ends_with(".bias") {
                    vec![0.0; len]
                } else {
                    let fan_in: usize = shape[1..].iter().product();
                    let limit = crate::math::sqrt(6.0 / fan_in as f64);
                    (0..len).map(|_| rng::uniform(&mut rng, -limit, limit)).collect()
                };
                Param {
                    name,
                    shape,
                    values,
                }
            })
            .collect();
        Ok(Self { config, params })
    }

    /// Rebuilds a model from stored tensors, checking names, shapes and
    /// finiteness against the configuration.
    pub fn from_params(config: RankerConfig, params: Vec<Param>) -> Result<Self, RankerError> {
        config.validate()?;
        let expected = config.param_shapes();
        if expected.len() != params.len() {
            return Err(RankerError::ShapeMismatch(format!(
                "expected {} tensors, found {}",
                expected.len(),
                params.len()
            )));
        }
        for ((name, shape), p) in expected.iter().zip(&params) {
            let len: usize = shape.iter().product();
            if &p.name != name || &p.shape != shape || p.values.len() != len {
                return Err(RankerError::ShapeMismatch(format!(
                    "tensor {} {:?} with {} values does not match {} {:?}",
                    p.name,
                    p.shape,
                    p.values.len(),
                    name,
                    shape
                )));
            }
            if p.values.iter().any(|v| !v.is_finite()) {
                return Err(RankerError::NonFiniteWeight(p.name.clone()));
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &RankerConfig {
        &self.config
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.values.len()).sum()
    }

    /// Smallest width and height the scorer accepts.
    pub fn min_input_side(&self) -> usize {
        MIN_SIDE.max(1 << (self.config.conv_channels.len() - 1))
    }

    fn n_conv(&self) -> usize {
        self.config.conv_channels.len()
    }

    pub fn forward(&self, img: &ImageRGB) -> Result<QualityScore, RankerError> {
        Ok(QualityScore(self.trace(img)?.score))
    }

    pub(crate) fn trace(&self, img: &ImageRGB) -> Result<ForwardTrace, RankerError> {
        let min = self.min_input_side();
        if img.width() < min || img.height() < min {
            return Err(RankerError::ImageTooSmall {
                width: img.width(),
                height: img.height(),
                min,
            });
        }
        let (w, h) = img.dims();
        let mut x = FeatureMap::zeros(3, h, w);
        for (p, px) in img.pixels().enumerate() {
            for c in 0..3 {
                x.data[c * h * w + p] = px[c];
            }
        }
        let k = self.config.kernel_size;
        let n_conv = self.n_conv();
        let mut conv_inputs = Vec::with_capacity(n_conv);
        let mut conv_pre = Vec::with_capacity(n_conv);
        let mut pool_argmax = Vec::with_capacity(n_conv);
        for b in 0..n_conv {
            let weight = &self.params[2 * b].values;
            let bias = &self.params[2 * b + 1].values;
            let mut y = layers::conv_forward(&x, weight, bias, bias.len(), k);
            conv_pre.push(y.data.clone());
            layers::relu_inplace(&mut y);
            conv_inputs.push(x);
            x = if b + 1 < n_conv {
                let (pooled, arg) = layers::maxpool_forward(&y);
                pool_argmax.push(arg);
                pooled
            } else {
                y
            };
        }
        let last_shape = (x.channels, x.height, x.width);
        let mut v = layers::global_average_pool(&x);
        let mut dense_inputs = Vec::with_capacity(3);
        let mut dense_pre = Vec::with_capacity(3);
        for j in 0..3 {
            let weight = &self.params[2 * n_conv + 2 * j].values;
            let bias = &self.params[2 * n_conv + 2 * j + 1].values;
            let mut y = layers::dense_forward(&v, weight, bias);
            dense_pre.push(y.clone());
            if j < 2 {
                y.iter_mut().for_each(|a| *a = a.max(0.0));
            }
            dense_inputs.push(v);
            v = y;
        }
        Ok(ForwardTrace {
            conv_inputs,
            conv_pre,
            pool_argmax,
            last_shape,
            dense_inputs,
            dense_pre,
            score: v[0],
        })
    }

    /// Adds `d_score · ∂score/∂θ` for the traced input into `grads`.
    pub(crate) fn accumulate_gradients(
        &self,
        trace: &ForwardTrace,
        d_score: f64,
        grads: &mut Gradients,
    ) {
        let n_conv = self.n_conv();
        let mut g = vec![d_score];
        for j in (0..3).rev() {
            if j < 2 {
                layers::relu_backward(&trace.dense_pre[j], &mut g);
            }
            let wi = 2 * n_conv + 2 * j;
            let (gw, gb) = split_pair(&mut grads.tensors, wi);
            g = layers::dense_backward(
                &trace.dense_inputs[j],
                &self.params[wi].values,
                &g,
                gw,
                gb,
            );
        }
        let mut gmap = layers::global_average_pool_backward(&g, trace.last_shape);
        let k = self.config.kernel_size;
        for b in (0..n_conv).rev() {
            if b + 1 < n_conv {
                let pre = &trace.conv_pre[b];
                let input = &trace.conv_inputs[b];
                let c = self.config.conv_channels[b];
                gmap = layers::maxpool_backward(
                    &gmap,
                    &trace.pool_argmax[b],
                    (c, input.height, input.width),
                );
                layers::relu_backward(pre, &mut gmap.data);
            } else {
                layers::relu_backward(&trace.conv_pre[b], &mut gmap.data);
            }
            let input = &trace.conv_inputs[b];
            let (gw, gb) = split_pair(&mut grads.tensors, 2 * b);
            if b == 0 {
                layers::conv_backward(input, &self.params[0].values, &gmap, k, gw, gb, None);
            } else {
                let mut gin = FeatureMap::zeros(input.channels, input.height, input.width);
                layers::conv_backward(
                    input,
                    &self.params[2 * b].values,
                    &gmap,
                    k,
                    gw,
                    gb,
                    Some(&mut gin),
                );
                gmap = gin;
            }
        }
    }
}

fn split_pair(tensors: &mut [Vec<f64>], i: usize) -> (&mut [f64], &mut [f64]) {
    let (a, b) = tensors[i..].split_at_mut(1);
    (&mut a[0], &mut b[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> ImageRGB {
        ImageRGB::from_fn(w, h, |x, y| {
            let t = (x + 2 * y) as f64 / (w + 2 * h) as f64;
            [t, 1.0 - t, 0.5 * t]
        })
        .unwrap()
    }

    #[test]
    fn default_param_count_is_closed_form() {
        let cfg = RankerConfig::default();
        // conv: c_out·c_in·9 + c_out ; dense: out·in + out
        let convs = (8 * 3 * 9 + 8) + (16 * 8 * 9 + 16) + (32 * 16 * 9 + 32);
        let dense = (32 * 32 + 32) + (16 * 32 + 16) + (16 + 1);
        assert_eq!(convs + dense, 7633);
        assert_eq!(RankerModel::init(cfg).unwrap().param_count(), 7633);
    }

    #[test]
    fn init_is_seeded() {
        let a = RankerModel::init(RankerConfig::default()).unwrap();
        let b = RankerModel::init(RankerConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = RankerModel::init(RankerConfig {
            seed: 1,
            ..RankerConfig::default()
        })
        .unwrap();
        assert_ne!(a.params()[0].values, c.params()[0].values);
    }

    #[test]
    fn config_validation() {
        let bad = [
            RankerConfig {
                fc_widths: vec![4],
                ..RankerConfig::default()
            },
            RankerConfig {
                conv_channels: vec![],
                ..RankerConfig::default()
            },
            RankerConfig {
                epsilon: 0.0,
                ..RankerConfig::default()
            },
            RankerConfig {
                kernel_size: 4,
                ..RankerConfig::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(
                RankerModel::init(cfg),
                Err(RankerError::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn zero_network_scores_zero() {
        let mut m = RankerModel::init(RankerConfig::default()).unwrap();
        for p in m.params_mut() {
            p.values.fill(0.0);
        }
        assert_eq!(m.forward(&ramp(16, 12)).unwrap(), QualityScore(0.0));
        let last = m.params().len() - 1;
        m.params_mut()[last].values[0] = 0.75;
        assert_eq!(m.forward(&ramp(9, 30)).unwrap(), QualityScore(0.75));
    }

    #[test]
    fn accepts_any_size_above_minimum() {
        let m = RankerModel::init(RankerConfig::default()).unwrap();
        for (w, h) in [(8, 8), (9, 13), (31, 8), (64, 48)] {
            assert!(m.forward(&ramp(w, h)).unwrap().value().is_finite());
        }
        let deep = RankerModel::init(RankerConfig {
            conv_channels: vec![2, 2, 2, 2, 2],
            ..RankerConfig::default()
        })
        .unwrap();
        assert_eq!(deep.min_input_side(), 16);
        assert!(matches!(
            deep.forward(&ramp(8, 20)),
            Err(RankerError::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn forward_golden_value() {
        // Cross-checked against a separate numpy forward pass on the same weights.
        let m = RankerModel::init(RankerConfig {
            seed: 7,
            ..RankerConfig::default()
        })
        .unwrap();
        let s = m.forward(&ramp(16, 16)).unwrap().value();
        assert!((s - GOLDEN_SCORE).abs() < 1e-12, "{s:.17}");
    }

    const GOLDEN_SCORE: f64 = -0.177178843138705;

    #[test]
    fn from_params_checks_shapes() {
        let m = RankerModel::init(RankerConfig::default()).unwrap();
        let mut params = m.params().to_vec();
        assert!(RankerModel::from_params(m.config().clone(), params.clone()).is_ok());
        params[3].values.pop();
        assert!(matches!(
            RankerModel::from_params(m.config().clone(), params),
            Err(RankerError::ShapeMismatch(_))
        ));
        let mut params = m.params().to_vec();
        params[0].values[0] = f64::NAN;
        assert!(matches!(
            RankerModel::from_params(m.config().clone(), params),
            Err(RankerError::NonFiniteWeight(_))
        ));
    }
}
