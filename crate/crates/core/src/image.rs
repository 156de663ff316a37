//! Normalized RGB rasters and the color-space views the metrics need.
//!
//! Channel values are stored as `f64` in `[0, 1]`; quantization to 8 bits
//! only happens at file boundaries (see the `twicemix` crate).

use alloc::vec::Vec;
use core::fmt;

use crate::math;

/// Smallest accepted width and height.
pub const MIN_SIDE: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum ImageError {
    /// `data.len()` does not equal `width * height * 3`.
    LengthMismatch { expected: usize, got: usize },
    /// A side is shorter than [`MIN_SIDE`].
    TooSmall { width: usize, height: usize },
    /// A channel value is NaN, infinite or outside `[0, 1]`.
    OutOfRange { index: usize, value: f64 },
    /// Two images that must share dimensions do not.
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
}

impl fmt::Display for ImageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageError::LengthMismatch { expected, got } => {
                write!(f, "pixel buffer has {got} values, expected {expected}")
            }
            ImageError::TooSmall { width, height } => write!(
                f,
                "image is {width}x{height}, minimum is {MIN_SIDE}x{MIN_SIDE}"
            ),
            ImageError::OutOfRange { index, value } => {
                write!(f, "channel value {value} at index {index} is outside [0, 1]")
            }
            ImageError::DimensionMismatch { left, right } => write!(
                f,
                "dimension mismatch: {}x{} vs {}x{}",
                left.0, left.1, right.0, right.1
            ),
        }
    }
}

impl core::error::Error for ImageError {}

/// Row-major `height x width x 3` raster with channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRGB {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageRGB {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(ImageError::TooSmall { width, height });
        }
        let expected = width * height * 3;
        if data.len() != expected {
            return Err(ImageError::LengthMismatch {
                expected,
                got: data.len(),
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(ImageError::OutOfRange { index, value });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Image with every pixel set to `rgb`.
    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self::new(width, height, data)
    }

    /// Builds an image by evaluating `f(x, y)` for each pixel.
    pub fn from_fn<F>(width: usize, height: usize, mut f: F) -> Result<Self, ImageError>
    where
        F: FnMut(usize, usize) -> [f64; 3],
    {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    /// One channel (`0` = R, `1` = G, `2` = B) as a plane.
    pub fn channel(&self, c: usize) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().skip(c).step_by(3).copied().collect(),
        }
    }

    pub(crate) fn check_same_dims(&self, other: &ImageRGB) -> Result<(), ImageError> {
        if self.dims() != other.dims() {
            return Err(ImageError::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }

    /// Area-average downscale so that the longer side is at most `max_side`.
    /// Returns a clone when the image already fits. The shorter side never
    /// drops below [`MIN_SIDE`].
    pub fn downscale_to_max_side(&self, max_side: usize) -> ImageRGB {
        let longest = self.width.max(self.height);
        if longest <= max_side {
            return self.clone();
        }
        let scale = max_side as f64 / longest as f64;
        let new_w = ((self.width as f64 * scale) as usize).max(MIN_SIDE);
        let new_h = ((self.height as f64 * scale) as usize).max(MIN_SIDE);
        let mut data = Vec::with_capacity(new_w * new_h * 3);
        for oy in 0..new_h {
            let y0 = oy * self.height / new_h;
            let y1 = ((oy + 1) * self.height / new_h).max(y0 + 1);
            for ox in 0..new_w {
                let x0 = ox * self.width / new_w;
                let x1 = ((ox + 1) * self.width / new_w).max(x0 + 1);
                let mut acc = [0.0; 3];
                for y in y0..y1 {
                    for x in x0..x1 {
                        let p = self.pixel(x, y);
                        acc[0] += p[0];
                        acc[1] += p[1];
                        acc[2] += p[2];
                    }
                }
                let n = ((y1 - y0) * (x1 - x0)) as f64;
                for a in acc {
                    data.push((a / n).clamp(0.0, 1.0));
                }
            }
        }
        ImageRGB {
            width: new_w,
            height: new_h,
            data,
        }
    }
}

/// Single-channel `height x width` array of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Per-pixel CIELab triples `(L, a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 3]>,
}

/// Per-pixel hexcone HSV triples `(h in [0, 360), s, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HsvImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 3]>,
}

// sRGB (D65) to XYZ.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

// CIE constants: epsilon = (6/29)^3, kappa = (29/3)^3.
const LAB_EPSILON: f64 = 216.0 / 24389.0;
const LAB_KAPPA: f64 = 24389.0 / 27.0;

#[inline]
pub fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        math::powf((c + 0.055) / 1.055, 2.4)
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > LAB_EPSILON {
        math::cbrt(t)
    } else {
        (LAB_KAPPA * t + 16.0) / 116.0
    }
}

/// D65 reference white, taken as the XYZ image of RGB (1, 1, 1) so that
/// achromatic pixels map to `a = b = 0` up to rounding.
fn white_point() -> [f64; 3] {
    let row = |r: [f64; 3]| r[0] + r[1] + r[2];
    [row(RGB_TO_XYZ[0]), row(RGB_TO_XYZ[1]), row(RGB_TO_XYZ[2])]
}

/// Converts one sRGB pixel to CIELab (D65).
pub fn pixel_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = [
        srgb_to_linear(rgb[0]),
        srgb_to_linear(rgb[1]),
        srgb_to_linear(rgb[2]),
    ];
    let white = white_point();
    let mut xyz = [0.0; 3];
    for (i, row) in RGB_TO_XYZ.iter().enumerate() {
        xyz[i] = (row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2]) / white[i];
    }
    let [fx, fy, fz] = [lab_f(xyz[0]), lab_f(xyz[1]), lab_f(xyz[2])];
    let l = if xyz[1] > LAB_EPSILON {
        116.0 * fy - 16.0
    } else {
        LAB_KAPPA * xyz[1]
    };
    [l.clamp(0.0, 100.0), 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Converts one RGB pixel to hexcone HSV.
pub fn pixel_to_hsv(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let h = if h < 0.0 { h + 360.0 } else { h };
    [if h >= 360.0 { h - 360.0 } else { h }, s, max]
}

pub fn rgb_to_lab(img: &ImageRGB) -> LabImage {
    LabImage {
        width: img.width,
        height: img.height,
        data: img.pixels().map(pixel_to_lab).collect(),
    }
}

pub fn rgb_to_hsv(img: &ImageRGB) -> HsvImage {
    HsvImage {
        width: img.width,
        height: img.height,
        data: img.pixels().map(pixel_to_hsv).collect(),
    }
}

/// Rec. 601 luma `0.299 R + 0.587 G + 0.114 B` per pixel.
pub fn luminance(img: &ImageRGB) -> Plane {
    Plane {
        width: img.width,
        height: img.height,
        data: img
            .pixels()
            .map(|[r, g, b]| 0.299 * r + 0.587 * g + 0.114 * b)
            .collect(),
    }
}
