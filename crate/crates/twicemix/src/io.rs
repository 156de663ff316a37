//! Loading and saving 8-bit PNG and binary PPM (P6) images.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use twicemix_core::image::MIN_SIDE;
use twicemix_core::ImageRGB;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: file not found", .0.display())]
    Missing(PathBuf),
    #[error("{}: unsupported format ({})", .0.display(), .1)]
    Unsupported(PathBuf, String),
    #[error("{}: corrupt image ({})", .0.display(), .1)]
    Corrupt(PathBuf, String),
    #[error("{}: {width}x{height} is below the {MIN_SIDE}x{MIN_SIDE} minimum", path.display())]
    TooSmall {
        path: PathBuf,
        width: usize,
        height: usize,
    },
    #[error("{}: {}", .0.display(), .1)]
    Io(PathBuf, #[source] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Png,
    Ppm,
}

impl Format {
    /// Format by extension, case-insensitive.
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "png" => Some(Format::Png),
            "ppm" => Some(Format::Ppm),
            _ => None,
        }
    }
}

/// Interleaved 8-bit RGB pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rgb8 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Rgb8 {
    pub fn to_image(&self) -> Result<ImageRGB, twicemix_core::ImageError> {
        ImageRGB::new(
            self.width,
            self.height,
            self.data.iter().map(|&b| b as f64 / 255.0).collect(),
        )
    }

    pub fn from_image(img: &ImageRGB) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img.data().iter().map(|&v| quantize(v)).collect(),
        }
    }
}

/// `round(v·255)` with halves rounded up, clamped to the byte range.
pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

fn open(path: &Path) -> Result<File, IoError> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => IoError::Missing(path.to_path_buf()),
        _ => IoError::Io(path.to_path_buf(), e),
    })
}

/// Decodes a file to 8-bit RGB without enforcing the minimum size.
pub fn read_rgb8(path: &Path) -> Result<Rgb8, IoError> {
    let format = Format::from_path(path).ok_or_else(|| {
        IoError::Unsupported(path.to_path_buf(), "expected a .png or .ppm file".into())
    })?;
    let file = open(path)?;
    match format {
        Format::Png => decode_png(BufReader::new(file), path),
        Format::Ppm => {
            let mut bytes = Vec::new();
            BufReader::new(file)
                .read_to_end(&mut bytes)
                .map_err(|e| IoError::Io(path.to_path_buf(), e))?;
            decode_ppm(&bytes).map_err(|msg| match msg {
                PpmError::Unsupported(m) => IoError::Unsupported(path.to_path_buf(), m),
                PpmError::Corrupt(m) => IoError::Corrupt(path.to_path_buf(), m),
            })
        }
    }
}

pub fn load_image(path: &Path) -> Result<ImageRGB, IoError> {
    let raw = read_rgb8(path)?;
    if raw.width < MIN_SIDE || raw.height < MIN_SIDE {
        return Err(IoError::TooSmall {
            path: path.to_path_buf(),
            width: raw.width,
            height: raw.height,
        });
    }
    raw.to_image()
        .map_err(|e| IoError::Corrupt(path.to_path_buf(), e.to_string()))
}

pub fn save_image(img: &ImageRGB, path: &Path) -> Result<(), IoError> {
    write_rgb8(&Rgb8::from_image(img), path)
}

pub fn write_rgb8(raw: &Rgb8, path: &Path) -> Result<(), IoError> {
    let format = Format::from_path(path).ok_or_else(|| {
        IoError::Unsupported(path.to_path_buf(), "expected a .png or .ppm file".into())
    })?;
    let io_err = |e| IoError::Io(path.to_path_buf(), e);
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    match format {
        Format::Png => encode_png(raw, &mut out).map_err(|e| match e {
            png::EncodingError::IoError(e) => io_err(e),
            other => IoError::Corrupt(path.to_path_buf(), other.to_string()),
        })?,
        Format::Ppm => {
            write!(out, "P6\n{} {}\n255\n", raw.width, raw.height).map_err(io_err)?;
            out.write_all(&raw.data).map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}

fn encode_png<W: Write>(raw: &Rgb8, out: W) -> Result<(), png::EncodingError> {
    let mut enc = png::Encoder::new(out, raw.width as u32, raw.height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    writer.write_image_data(&raw.data)?;
    writer.finish()
}

fn decode_png<R: std::io::BufRead + std::io::Seek>(r: R, path: &Path) -> Result<Rgb8, IoError> {
    let corrupt = |e: png::DecodingError| match e {
        png::DecodingError::IoError(e) if e.kind() != std::io::ErrorKind::UnexpectedEof => {
            IoError::Io(path.to_path_buf(), e)
        }
        other => IoError::Corrupt(path.to_path_buf(), other.to_string()),
    };
    let mut decoder = png::Decoder::new(r);
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(corrupt)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| IoError::Corrupt(path.to_path_buf(), "image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(corrupt)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(IoError::Unsupported(
            path.to_path_buf(),
            format!("{:?}-bit PNG", info.bit_depth),
        ));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(IoError::Unsupported(
                path.to_path_buf(),
                "unexpanded palette".into(),
            ))
        }
    };
    let mut data = Vec::with_capacity(w * h * 3);
    for row in buf.chunks_exact(info.line_size).take(h) {
        for px in row[..w * channels].chunks_exact(channels) {
            match channels {
                1 | 2 => data.extend_from_slice(&[px[0]; 3]),
                _ => data.extend_from_slice(&px[..3]),
            }
        }
    }
    Ok(Rgb8 {
        width: w,
        height: h,
        data,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PpmError {
    Unsupported(String),
    Corrupt(String),
}

/// Parses a binary P6 PPM with maxval 255. Comments (`#` to end of line)
/// are allowed between header fields.
pub fn decode_ppm(bytes: &[u8]) -> Result<Rgb8, PpmError> {
    let corrupt = |m: &str| PpmError::Corrupt(m.to_string());
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(if bytes.first() == Some(&b'P') {
            PpmError::Unsupported("only binary P6 PPM is supported".into())
        } else {
            corrupt("missing P6 magic")
        });
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(corrupt("truncated header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| corrupt("header value out of range"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(corrupt("missing whitespace after header"));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(PpmError::Unsupported(format!("maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(corrupt("zero dimension"));
    }
    let len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| corrupt("dimensions overflow"))?;
    let data = bytes
        .get(pos..pos + len)
        .ok_or_else(|| corrupt("pixel data shorter than header"))?;
    Ok(Rgb8 {
        width,
        height,
        data: data.to_vec(),
    })
}
