// Forward and backward kernels over channel-major feature maps.

use alloc::vec;
use alloc::vec::Vec;

/// `channels x height x width` activations.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    fn plane_len(&self) -> usize {
        self.height * self.width
    }
}

#[inline]
fn valid_range(len: usize, offset: isize) -> (usize, usize) {
    let lo = (-offset).max(0) as usize;
    let hi = (len as isize - offset.max(0)).max(0) as usize;
    (lo, hi.max(lo))
}

/// Stride-1 convolution with zero "same" padding. `weight` is laid out as
/// `[out][in][ky][kx]`.
pub(crate) fn conv_forward(
    input: &FeatureMap,
    weight: &[f64],
    bias: &[f64],
    out_channels: usize,
    kernel: usize,
) -> FeatureMap {
    let (h, w) = (input.height, input.width);
    let pad = (kernel / 2) as isize;
    let plane = input.plane_len();
    let mut out = FeatureMap::zeros(out_channels, h, w);
    for o in 0..out_channels {
        let dst_plane = &mut out.data[o * plane..(o + 1) * plane];
        dst_plane.fill(bias[o]);
        for i in 0..input.channels {
            let src_plane = &input.data[i * plane..(i + 1) * plane];
            for ky in 0..kernel {
                let dy = ky as isize - pad;
                let (y0, y1) = valid_range(h, dy);
                for kx in 0..kernel {
                    let dx = kx as isize - pad;
                    let (x0, x1) = valid_range(w, dx);
                    let wv = weight[((o * input.channels + i) * kernel + ky) * kernel + kx];
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let sx0 = (x0 as isize + dx) as usize;
                        let dst = &mut dst_plane[y * w + x0..y * w + x1];
                        let src = &src_plane[sy * w + sx0..sy * w + sx0 + (x1 - x0)];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates kernel and bias gradients and, when `grad_input` is given,
/// the gradient with respect to the convolution input.
pub(crate) fn conv_backward(
    input: &FeatureMap,
    weight: &[f64],
    grad_out: &FeatureMap,
    kernel: usize,
    grad_weight: &mut [f64],
    grad_bias: &mut [f64],
    mut grad_input: Option<&mut FeatureMap>,
) {
    let (h, w) = (input.height, input.width);
    let pad = (kernel / 2) as isize;
    let plane = input.plane_len();
    for o in 0..grad_out.channels {
        let g_plane = &grad_out.data[o * plane..(o + 1) * plane];
        grad_bias[o] += g_plane.iter().sum::<f64>();
        for i in 0..input.channels {
            let src_plane = &input.data[i * plane..(i + 1) * plane];
            for ky in 0..kernel {
                let dy = ky as isize - pad;
                let (y0, y1) = valid_range(h, dy);
                for kx in 0..kernel {
                    let dx = kx as isize - pad;
                    let (x0, x1) = valid_range(w, dx);
                    let widx = ((o * input.channels + i) * kernel + ky) * kernel + kx;
                    let wv = weight[widx];
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let sx0 = (x0 as isize + dx) as usize;
                        let g = &g_plane[y * w + x0..y * w + x1];
                        let s = &src_plane[sy * w + sx0..sy * w + sx0 + (x1 - x0)];
                        acc += g.iter().zip(s).map(|(a, b)| a * b).sum::<f64>();
                        if let Some(gi) = grad_input.as_deref_mut() {
                            let gi_row = &mut gi.data
                                [i * plane + sy * w + sx0..i * plane + sy * w + sx0 + (x1 - x0)];
                            for (d, gv) in gi_row.iter_mut().zip(g) {
                                *d += wv * gv;
                            }
                        }
                    }
                    grad_weight[widx] += acc;
                }
            }
        }
    }
}

pub(crate) fn relu_inplace(map: &mut FeatureMap) {
    for v in &mut map.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes gradient entries whose forward pre-activation was not positive.
pub(crate) fn relu_backward(pre: &[f64], grad: &mut [f64]) {
    for (g, &p) in grad.iter_mut().zip(pre) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
}

/// 2x2 max pooling with stride 2; odd trailing rows and columns are dropped.
/// Returns the pooled map and the flat input index of each maximum.
pub(crate) fn maxpool_forward(input: &FeatureMap) -> (FeatureMap, Vec<usize>) {
    let (oh, ow) = (input.height / 2, input.width / 2);
    let mut out = FeatureMap::zeros(input.channels, oh, ow);
    let mut argmax = Vec::with_capacity(out.data.len());
    let plane = input.plane_len();
    for c in 0..input.channels {
        for y in 0..oh {
            for x in 0..ow {
                let mut best_idx = c * plane + (2 * y) * input.width + 2 * x;
                let mut best = input.data[best_idx];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = c * plane + (2 * y + dy) * input.width + 2 * x + dx;
                    if input.data[idx] > best {
                        best = input.data[idx];
                        best_idx = idx;
                    }
                }
                out.data[(c * oh + y) * ow + x] = best;
                argmax.push(best_idx);
            }
        }
    }
    (out, argmax)
}

pub(crate) fn maxpool_backward(
    grad_out: &FeatureMap,
    argmax: &[usize],
    input_shape: (usize, usize, usize),
) -> FeatureMap {
    let mut grad = FeatureMap::zeros(input_shape.0, input_shape.1, input_shape.2);
    for (g, &idx) in grad_out.data.iter().zip(argmax) {
        grad.data[idx] += g;
    }
    grad
}

/// Channel-wise spatial mean.
pub(crate) fn global_average_pool(input: &FeatureMap) -> Vec<f64> {
    let plane = input.plane_len();
    input
        .data
        .chunks_exact(plane)
        .map(|p| p.iter().sum::<f64>() / plane as f64)
        .collect()
}

pub(crate) fn global_average_pool_backward(
    grad: &[f64],
    shape: (usize, usize, usize),
) -> FeatureMap {
    let (c, h, w) = shape;
    let scale = 1.0 / (h * w) as f64;
    let mut out = FeatureMap::zeros(c, h, w);
    for (ch, g) in grad.iter().enumerate() {
        out.data[ch * h * w..(ch + 1) * h * w].fill(g * scale);
    }
    out
}

/// `y = W x + b` with `W` laid out `[out][in]`.
pub(crate) fn dense_forward(input: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
    bias.iter()
        .enumerate()
        .map(|(o, b)| {
            let row = &weight[o * input.len()..(o + 1) * input.len()];
            b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>()
        })
        .collect()
}

pub(crate) fn dense_backward(
    input: &[f64],
    weight: &[f64],
    grad_out: &[f64],
    grad_weight: &mut [f64],
    grad_bias: &mut [f64],
) -> Vec<f64> {
    let n_in = input.len();
    let mut grad_in = vec![0.0; n_in];
    for (o, &g) in grad_out.iter().enumerate() {
        grad_bias[o] += g;
        let row = &weight[o * n_in..(o + 1) * n_in];
        let grow = &mut grad_weight[o * n_in..(o + 1) * n_in];
        for j in 0..n_in {
            grow[j] += g * input[j];
            grad_in[j] += g * row[j];
        }
    }
    grad_in
}
