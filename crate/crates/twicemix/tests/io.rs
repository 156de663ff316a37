use std::fs;

use proptest::prelude::*;
use twicemix::io::{self, IoError, Rgb8};
use twicemix_core::ImageRGB;

fn raw(width: usize, height: usize, data: Vec<u8>) -> Rgb8 {
    Rgb8 {
        width,
        height,
        data,
    }
}

fn random_raw() -> impl Strategy<Value = Rgb8> {
    (8usize..20, 8usize..20).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), w * h * 3).prop_map(move |d| raw(w, h, d))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn save_of_load_is_byte_identical(img in random_raw(), ppm in any::<bool>()) {
        let dir = tempfile::tempdir().unwrap();
        let ext = if ppm { "ppm" } else { "png" };
        let first = dir.path().join(format!("a.{ext}"));
        let second = dir.path().join(format!("b.{ext}"));
        io::write_rgb8(&img, &first).unwrap();
        let loaded = io::load_image(&first).unwrap();
        io::save_image(&loaded, &second).unwrap();
        prop_assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    }
}

#[test]
fn bytes_map_to_exact_fractions() {
    let dir = tempfile::tempdir().unwrap();
    for ext in ["png", "ppm"] {
        let path = dir.path().join(format!("img.{ext}"));
        let data: Vec<u8> = (0..8 * 8 * 3).map(|i| (i % 256) as u8).collect();
        io::write_rgb8(&raw(8, 8, data.clone()), &path).unwrap();
        let img = io::load_image(&path).unwrap();
        assert_eq!(img.dims(), (8, 8));
        for (v, b) in img.data().iter().zip(&data) {
            assert_eq!(*v, *b as f64 / 255.0);
        }
        let mut probe = vec![128u8; 8 * 8 * 3];
        probe[0] = 255;
        io::write_rgb8(&raw(8, 8, probe), &path).unwrap();
        let img = io::load_image(&path).unwrap();
        assert_eq!(img.data()[0], 1.0);
        assert_eq!(img.data()[1], 128.0 / 255.0);
        assert!((img.data()[1] - 0.50196).abs() < 1e-5);
    }
}

#[test]
fn saving_writes_rounded_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.ppm");
    let img = ImageRGB::from_fn(8, 8, |x, _| match x {
        0 => [0.0, 1.0, 0.5],
        _ => [0.2, 0.999, 0.001],
    })
    .unwrap();
    io::save_image(&img, &path).unwrap();
    let bytes = fs::read(&path).unwrap();
    let pixels = &bytes[bytes.len() - 8 * 8 * 3..];
    assert_eq!(&pixels[..6], &[0, 255, 128, 51, 255, 0]);
}

#[test]
fn two_by_two_ppm_decodes_but_is_below_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.ppm");
    let mut bytes = b"P6\n2 2\n255\n".to_vec();
    bytes.extend_from_slice(&[255; 12]);
    fs::write(&path, &bytes).unwrap();
    let decoded = io::read_rgb8(&path).unwrap();
    assert!(decoded.data.iter().all(|&b| b as f64 / 255.0 == 1.0));
    assert!(matches!(
        io::load_image(&path),
        Err(IoError::TooSmall { width: 2, height: 2, .. })
    ));
}

#[test]
fn error_kinds() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        io::load_image(&dir.path().join("nope.png")),
        Err(IoError::Missing(_))
    ));
    let bmp = dir.path().join("x.bmp");
    fs::write(&bmp, b"BM").unwrap();
    assert!(matches!(io::load_image(&bmp), Err(IoError::Unsupported(..))));
    let bad = dir.path().join("bad.ppm");
    fs::write(&bad, b"P6\nxx").unwrap();
    assert!(matches!(io::load_image(&bad), Err(IoError::Corrupt(..))));
    let ascii = dir.path().join("ascii.ppm");
    fs::write(&ascii, b"P3\n8 8\n255\n").unwrap();
    assert!(matches!(io::load_image(&ascii), Err(IoError::Unsupported(..))));
    let not_png = dir.path().join("fake.png");
    fs::write(&not_png, b"not a png at all").unwrap();
    assert!(matches!(io::load_image(&not_png), Err(IoError::Corrupt(..))));
}

#[test]
fn truncated_png_is_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("full.png");
    let data: Vec<u8> = (0..16 * 16 * 3).map(|i| (i * 7 % 256) as u8).collect();
    io::write_rgb8(&raw(16, 16, data), &path).unwrap();
    let bytes = fs::read(&path).unwrap();
    let cut = dir.path().join("cut.png");
    for len in [8, 20, 40, bytes.len() / 2, bytes.len() - 13] {
        fs::write(&cut, &bytes[..len]).unwrap();
        assert!(
            matches!(io::load_image(&cut), Err(IoError::Corrupt(..))),
            "prefix {len}"
        );
    }
}

#[test]
fn grayscale_and_alpha_png_expand_to_rgb() {
    let dir = tempfile::tempdir().unwrap();
    let gray = dir.path().join("g.png");
    let file = fs::File::create(&gray).unwrap();
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), 8, 8);
    enc.set_color(png::ColorType::GrayscaleAlpha);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header().unwrap();
    let data: Vec<u8> = (0..64).flat_map(|i| [i as u8 * 3, 200]).collect();
    w.write_image_data(&data).unwrap();
    w.finish().unwrap();
    let img = io::read_rgb8(&gray).unwrap();
    assert_eq!(&img.data[..6], &[0, 0, 0, 3, 3, 3]);
}
