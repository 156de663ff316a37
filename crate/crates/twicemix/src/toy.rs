//! Procedural stand-in for a real enhancement corpus.
//!
//! Each source gets a clean high-quality image (a two-colour gradient with a
//! sinusoidal texture) and two degraded views made with the underwater
//! formation model: a low-quality one, and a raw one seen through thicker
//! water.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;

use twicemix_core::rng::{self, SeededRng};
use twicemix_core::ImageRGB;

use crate::dataset::{self, ManifestEntry};
use crate::io;

const TOY_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ToySource {
    pub id: String,
    pub raw: ImageRGB,
    pub hq: ImageRGB,
    pub lq: ImageRGB,
}

fn natural_color(r: &mut SeededRng) -> [f64; 3] {
    let level = rng::uniform(r, 0.35, 0.8);
    let mut c = [0.0; 3];
    for v in &mut c {
        *v = (level + rng::uniform(r, -0.15, 0.15)).clamp(0.0, 1.0);
    }
    c
}

/// Gradient between two muted colours with a sinusoidal texture.
pub fn clean_image(r: &mut SeededRng, size: usize) -> ImageRGB {
    let c0 = natural_color(r);
    let c1 = natural_color(r);
    let theta = rng::uniform(r, 0.0, 2.0 * PI);
    let (dx, dy) = (theta.cos(), theta.sin());
    let freq = rng::uniform(r, 2.0, 6.0);
    let phase = rng::uniform(r, 0.0, 2.0 * PI);
    let amp = rng::uniform(r, 0.1, 0.2);
    let s = (size - 1) as f64;
    ImageRGB::from_fn(size, size, |x, y| {
        let (u, v) = (x as f64 / s - 0.5, y as f64 / s - 0.5);
        let t = (u * dx + v * dy + 0.5).clamp(0.0, 1.0);
        let tex = amp * (2.0 * PI * freq * (u * dy - v * dx) + phase).sin();
        let mut px = [0.0; 3];
        for c in 0..3 {
            px[c] = (c0[c] + t * (c1[c] - c0[c]) + tex).clamp(0.0, 1.0);
        }
        px
    })
    .expect("toy image is valid")
}

/// Per-channel transmission and veiling light of the underwater formation
/// model `I = J·t + A·(1 − t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Water {
    pub transmission: [f64; 3],
    pub veil: [f64; 3],
}

impl Water {
    /// Red is absorbed first, then green; the veil is blue-green.
    pub fn sample(r: &mut SeededRng) -> Self {
        Self {
            transmission: [
                rng::uniform(r, 0.15, 0.45),
                rng::uniform(r, 0.45, 0.75),
                rng::uniform(r, 0.55, 0.85),
            ],
            veil: [
                rng::uniform(r, 0.0, 0.1),
                rng::uniform(r, 0.35, 0.6),
                rng::uniform(r, 0.45, 0.75),
            ],
        }
    }

    /// The same water with every transmission scaled by `factor`.
    pub fn thicker(self, factor: f64) -> Self {
        Self {
            transmission: self.transmission.map(|t| t * factor),
            ..self
        }
    }
}

/// Blends each channel toward the veiling light: a colour cast and a
/// contrast loss in one step.
pub fn degrade(img: &ImageRGB, water: &Water) -> ImageRGB {
    ImageRGB::from_fn(img.width(), img.height(), |x, y| {
        let p = img.pixel(x, y);
        let mut out = [0.0; 3];
        for c in 0..3 {
            let t = water.transmission[c];
            out[c] = (p[c] * t + water.veil[c] * (1.0 - t)).clamp(0.0, 1.0);
        }
        out
    })
    .expect("degraded image is valid")
}

/// `count` sources of `size x size` pixels, ids `src0000`, `src0001`, ...
pub fn generate(count: usize, size: usize, seed: u64) -> Vec<ToySource> {
    let mut r = rng::seeded(seed, TOY_STREAM);
    (0..count)
        .map(|i| {
            let hq = clean_image(&mut r, size);
            let water = Water::sample(&mut r);
            let lq = degrade(&hq, &water);
            let raw = degrade(&hq, &water.thicker(0.6));
            ToySource {
                id: format!("src{i:04}"),
                raw,
                hq,
                lq,
            }
        })
        .collect()
}

/// Writes `raw/`, `hq/` and `lq/` PNGs and a `manifest.csv` under `dir`.
pub fn write_corpus(dir: &Path, count: usize, size: usize, seed: u64) -> anyhow::Result<PathBuf> {
    let mut entries = Vec::with_capacity(count);
    for sub in ["raw", "hq", "lq"] {
        fs::create_dir_all(dir.join(sub)).with_context(|| format!("creating {}", dir.display()))?;
    }
    for src in generate(count, size, seed) {
        let name = format!("{}.png", src.id);
        let entry = ManifestEntry {
            raw_path: dir.join("raw").join(&name),
            hq_path: dir.join("hq").join(&name),
            lq_path: Some(dir.join("lq").join(&name)),
            id: src.id,
        };
        io::save_image(&src.raw, &entry.raw_path)?;
        io::save_image(&src.hq, &entry.hq_path)?;
        io::save_image(&src.lq, entry.lq_path.as_deref().expect("set above"))?;
        entries.push(entry);
    }
    let manifest = dir.join("manifest.csv");
    dataset::write_manifest(&entries, &manifest)?;
    Ok(manifest)
}
