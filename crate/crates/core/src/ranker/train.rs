// Margin-ranking loss, Siamese backprop, Adam and the training loop.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Gradients, QualityScore, RankerConfig, RankerError, RankerModel};
use crate::image::ImageRGB;
use crate::math;
use crate::mixing::{make_ranked_pair, RankLabel, RankedPair, RatioSampler};
use crate::rng;

const SHUFFLE_STREAM: u64 = 1;

/// `max(0, (s1 − s2)·γ + ε)`.
pub fn margin_rank_loss(s1: QualityScore, s2: QualityScore, gamma: RankLabel, epsilon: f64) -> f64 {
    let v = (s1.0 - s2.0) * gamma.sign() + epsilon;
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Loss of one ranked pair and its gradient with respect to every weight.
/// Both branches share weights, so their contributions add up. The hinge is
/// given a zero subgradient at its kink, which makes inactive pairs no-ops.
pub fn loss_and_gradients(
    model: &RankerModel,
    pair: &RankedPair,
    epsilon: f64,
) -> Result<(f64, Gradients), RankerError> {
    let t1 = model.trace(&pair.x1)?;
    let t2 = model.trace(&pair.x2)?;
    let loss = margin_rank_loss(QualityScore(t1.score), QualityScore(t2.score), pair.gamma, epsilon);
    let mut grads = Gradients::zeros_like(model);
    if loss > 0.0 {
        let g = pair.gamma.sign();
        model.accumulate_gradients(&t1, g, &mut grads);
        model.accumulate_gradients(&t2, -g, &mut grads);
    }
    Ok((loss, grads))
}

pub fn backward(
    model: &RankerModel,
    pair: &RankedPair,
    epsilon: f64,
) -> Result<Gradients, RankerError> {
    Ok(loss_and_gradients(model, pair, epsilon)?.1)
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(model: &RankerModel) -> Self {
        let cfg = model.config();
        let zeros: Vec<Vec<f64>> = model
            .params()
            .iter()
            .map(|p| vec![0.0; p.values.len()])
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_eps,
        }
    }
}

/// One bias-corrected Adam update of every parameter.
pub fn adam_step(
    model: &mut RankerModel,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<(), RankerError> {
    let params = model.params_mut();
    let shapes_ok = params.len() == grads.tensors.len()
        && params.len() == state.m.len()
        && params
            .iter()
            .zip(&grads.tensors)
            .zip(&state.m)
            .all(|((p, g), m)| p.values.len() == g.len() && g.len() == m.len());
    if !shapes_ok {
        return Err(RankerError::ShapeMismatch(
            "gradients or optimizer state do not match the model".into(),
        ));
    }
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - math::powi(b1, state.t as i32);
    let c2 = 1.0 - math::powi(b2, state.t as i32);
    for (i, p) in params.iter_mut().enumerate() {
        let g = &grads.tensors[i];
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        for j in 0..p.values.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            p.values[j] -= lr * m_hat / (math::sqrt(v_hat) + state.eps);
        }
    }
    Ok(())
}

/// Mean training loss of each epoch, measured before each pair's update.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epoch_losses: Vec<f64>,
}

/// Trains with batch size 1. Each iteration draws a fresh ratio pair, blends
/// the source pair twice, and takes one Adam step on the hinge loss. Sources
/// are visited in a seeded shuffled order each epoch.
pub fn train(
    mut model: RankerModel,
    dataset: &[(ImageRGB, ImageRGB)],
    config: &RankerConfig,
) -> Result<(RankerModel, TrainLog), RankerError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(RankerError::EmptyDataset);
    }
    let prepared: Vec<(ImageRGB, ImageRGB)> = dataset
        .iter()
        .map(|(hq, lq)| {
            (
                hq.downscale_to_max_side(config.max_side),
                lq.downscale_to_max_side(config.max_side),
            )
        })
        .collect();
    let mut sampler = RatioSampler::new(config.seed);
    let mut order_rng = rng::seeded(config.seed, SHUFFLE_STREAM);
    let mut state = AdamState {
        beta1: config.beta1,
        beta2: config.beta2,
        eps: config.adam_eps,
        ..AdamState::new(&model)
    };
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut log = TrainLog::default();
    for _ in 0..config.epochs {
        rng::shuffle(&mut order_rng, &mut order);
        let mut total = 0.0;
        for &idx in &order {
            let (hq, lq) = &prepared[idx];
            let ratios = sampler.sample()?;
            let pair = make_ranked_pair(hq, lq, &ratios)?;
            let (loss, grads) = loss_and_gradients(&model, &pair, config.epsilon)?;
            total += loss;
            adam_step(&mut model, &grads, &mut state, config.learning_rate)?;
        }
        log.epoch_losses.push(total / prepared.len() as f64);
    }
    Ok((model, log))
}
