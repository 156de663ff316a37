//! UIQM and UCIQE: the classical no-reference underwater quality baselines.
//!
//! UIQM = c1·UICM + c2·UISM + c3·UIConM (colorfulness, sharpness, contrast).
//! UCIQE = c1·σc + c2·con_l + c3·μs (chroma spread, luminance contrast,
//! mean saturation).
//!
//! UICM is computed on the 0–255 channel scale so the default weights keep
//! their usual magnitudes. UISM and UIConM are ratio measures; UCIQE uses
//! CIELab units (L in [0, 100]) and HSV saturation in [0, 1].

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::image::{luminance, pixel_to_hsv, pixel_to_lab, ImageRGB, Plane};
use crate::math;

/// Side of the square blocks used by EME and logAMEE. Partial blocks at the
/// right and bottom edges are dropped.
pub const BLOCK: usize = 8;

/// Weights of the UIQM combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UiqmWeights {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for UiqmWeights {
    fn default() -> Self {
        Self {
            c1: 0.0282,
            c2: 0.2953,
            c3: 3.5753,
        }
    }
}

/// Weights of the UCIQE combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UciqeWeights {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for UciqeWeights {
    fn default() -> Self {
        Self {
            c1: 0.4680,
            c2: 0.2745,
            c3: 0.2576,
        }
    }
}

/// Constants of the colorfulness term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UicmParams {
    /// Weight on the trimmed-mean magnitude (negative: a global cast hurts).
    pub mean_weight: f64,
    /// Weight on the spread of the opponent channels.
    pub spread_weight: f64,
    /// Fraction trimmed from each tail of the sorted opponent values.
    pub alpha: f64,
}

impl Default for UicmParams {
    fn default() -> Self {
        Self {
            mean_weight: -0.0268,
            spread_weight: 0.1586,
            alpha: 0.1,
        }
    }
}

/// Percentiles of L whose difference is the luminance contrast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastPercentiles {
    pub low: f64,
    pub high: f64,
}

impl Default for ContrastPercentiles {
    fn default() -> Self {
        Self {
            low: 0.01,
            high: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UiqmScore {
    pub uicm: f64,
    pub uism: f64,
    pub uiconm: f64,
    pub uiqm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UciqeScore {
    pub sigma_chroma: f64,
    pub con_l: f64,
    pub mu_s: f64,
    pub uciqe: f64,
}

/// Every component of both baselines for one image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBreakdown {
    pub uicm: f64,
    pub uism: f64,
    pub uiconm: f64,
    pub sigma_chroma: f64,
    pub con_l: f64,
    pub mu_s: f64,
    pub uiqm: f64,
    pub uciqe: f64,
}

impl MetricBreakdown {
    pub fn compute(img: &ImageRGB, uiqm_w: &UiqmWeights, uciqe_w: &UciqeWeights) -> Self {
        Self::from_parts(uiqm(img, uiqm_w), uciqe(img, uciqe_w))
    }

    pub fn from_parts(q: UiqmScore, c: UciqeScore) -> Self {
        Self {
            uicm: q.uicm,
            uism: q.uism,
            uiconm: q.uiconm,
            sigma_chroma: c.sigma_chroma,
            con_l: c.con_l,
            mu_s: c.mu_s,
            uiqm: q.uiqm,
            uciqe: c.uciqe,
        }
    }
}

/// Mean of `sorted` after dropping `ceil(alpha_low·n)` values from the bottom
/// and `floor(alpha_high·n)` from the top.
fn trimmed_mean(sorted: &[f64], alpha_low: f64, alpha_high: f64) -> f64 {
    let n = sorted.len();
    let lo = libm::ceil(alpha_low * n as f64) as usize;
    let hi = math::floor(alpha_high * n as f64) as usize;
    let kept = &sorted[lo.min(n)..n.saturating_sub(hi).max(lo.min(n))];
    if kept.is_empty() {
        return 0.0;
    }
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// Trimmed mean of the values and their mean squared deviation from it.
fn trimmed_stats(mut values: Vec<f64>, alpha: f64) -> (f64, f64) {
    values.sort_unstable_by(f64::total_cmp);
    let mu = trimmed_mean(&values, alpha, alpha);
    let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / values.len() as f64;
    (mu, var)
}

pub fn uicm(img: &ImageRGB) -> f64 {
    uicm_with(img, &UicmParams::default())
}

/// Colorfulness from the opponent channels RG = R − G and
/// YB = (R + G)/2 − B on the 0–255 scale.
pub fn uicm_with(img: &ImageRGB, params: &UicmParams) -> f64 {
    let n = img.width() * img.height();
    let mut rg = Vec::with_capacity(n);
    let mut yb = Vec::with_capacity(n);
    for [r, g, b] in img.pixels() {
        let (r, g, b) = (r * 255.0, g * 255.0, b * 255.0);
        rg.push(r - g);
        yb.push((r + g) / 2.0 - b);
    }
    let (mu_rg, var_rg) = trimmed_stats(rg, params.alpha);
    let (mu_yb, var_yb) = trimmed_stats(yb, params.alpha);
    params.mean_weight * math::sqrt(mu_rg * mu_rg + mu_yb * mu_yb)
        + params.spread_weight * math::sqrt(var_rg + var_yb)
}

/// 3x3 Sobel gradient magnitude with replicated borders.
pub fn sobel_magnitude(plane: &Plane) -> Plane {
    let (w, h) = (plane.width as isize, plane.height as isize);
    let at = |x: isize, y: isize| plane.at(x.clamp(0, w - 1) as usize, y.clamp(0, h - 1) as usize);
    let mut data = Vec::with_capacity(plane.data.len());
    for y in 0..h {
        for x in 0..w {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            data.push(math::hypot(gx, gy));
        }
    }
    Plane {
        width: plane.width,
        height: plane.height,
        data,
    }
}

/// Visits the `(min, max)` of every full `BLOCK x BLOCK` block and returns
/// the number of blocks.
fn for_each_block(plane: &Plane, mut f: impl FnMut(f64, f64)) -> usize {
    let bx = plane.width / BLOCK;
    let by = plane.height / BLOCK;
    for j in 0..by {
        for i in 0..bx {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for y in j * BLOCK..(j + 1) * BLOCK {
                for x in i * BLOCK..(i + 1) * BLOCK {
                    let v = plane.at(x, y);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            f(lo, hi);
        }
    }
    bx * by
}

/// Measure of enhancement: `2/(k1·k2) · Σ ln(max/min)` over blocks, with a
/// zero block extreme replaced by 1.
pub fn eme(plane: &Plane) -> f64 {
    let mut acc = 0.0;
    let blocks = for_each_block(plane, |lo, hi| {
        let lo = if lo == 0.0 { 1.0 } else { lo };
        let hi = if hi == 0.0 { 1.0 } else { hi };
        acc += math::ln(hi / lo);
    });
    if blocks == 0 {
        return 0.0;
    }
    2.0 / blocks as f64 * acc
}

/// Sharpness: EME of each channel weighted by its Sobel edge map, combined
/// with the Rec. 601 channel weights.
pub fn uism(img: &ImageRGB) -> f64 {
    const LAMBDA: [f64; 3] = [0.299, 0.587, 0.114];
    (0..3)
        .map(|c| {
            let channel = img.channel(c);
            let edges = sobel_magnitude(&channel.map(|v| v * 255.0));
            let weighted = Plane {
                width: edges.width,
                height: edges.height,
                data: edges
                    .data
                    .iter()
                    .zip(&channel.data)
                    .map(|(e, v)| e * v)
                    .collect(),
            };
            LAMBDA[c] * eme(&weighted)
        })
        .sum()
}

/// logAMEE: `-1/(k1·k2) · Σ r·ln(r)` with the block Michelson ratio
/// `r = (max − min)/(max + min)`. Flat or all-zero blocks contribute 0.
///
/// The per-block term `−r·ln r` peaks at `r = 1/e` and returns to zero at
/// `r = 1`, so it is monotone in block contrast only up to that point.
pub fn log_amee(plane: &Plane) -> f64 {
    let mut acc = 0.0;
    let blocks = for_each_block(plane, |lo, hi| {
        let top = hi - lo;
        let bot = hi + lo;
        if top > 0.0 && bot > 0.0 {
            let r = top / bot;
            acc += r * math::ln(r);
        }
    });
    if blocks == 0 {
        return 0.0;
    }
    -acc / blocks as f64
}

/// Contrast: logAMEE on the luminance plane.
pub fn uiconm(img: &ImageRGB) -> f64 {
    log_amee(&luminance(img))
}

pub fn uiqm(img: &ImageRGB, w: &UiqmWeights) -> UiqmScore {
    let uicm = uicm(img);
    let uism = uism(img);
    let uiconm = uiconm(img);
    UiqmScore {
        uicm,
        uism,
        uiconm,
        uiqm: w.c1 * uicm + w.c2 * uism + w.c3 * uiconm,
    }
}

/// Linear-interpolated quantile of sorted data, `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = math::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn uciqe(img: &ImageRGB, w: &UciqeWeights) -> UciqeScore {
    uciqe_with(img, w, &ContrastPercentiles::default())
}

pub fn uciqe_with(img: &ImageRGB, w: &UciqeWeights, pct: &ContrastPercentiles) -> UciqeScore {
    let n = img.width() * img.height();
    let mut lightness = Vec::with_capacity(n);
    // Welford keeps the deviation exactly zero on constant chroma.
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    let mut sat_sum = 0.0;
    for (i, px) in img.pixels().enumerate() {
        let [l, a, b] = pixel_to_lab(px);
        lightness.push(l);
        let chroma = math::sqrt(a * a + b * b);
        let delta = chroma - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (chroma - mean);
        sat_sum += pixel_to_hsv(px)[1];
    }
    let sigma_chroma = math::sqrt(m2 / n as f64);
    lightness.sort_unstable_by(f64::total_cmp);
    let con_l = (quantile_sorted(&lightness, pct.high) - quantile_sorted(&lightness, pct.low))
        .clamp(0.0, 100.0);
    let mu_s = sat_sum / n as f64;
    UciqeScore {
        sigma_chroma,
        con_l,
        mu_s,
        uciqe: w.c1 * sigma_chroma + w.c2 * con_l + w.c3 * mu_s,
    }
}
