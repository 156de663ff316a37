use std::fs;

use twicemix::model_file::{self, ModelFileError};
use twicemix_core::{ImageRGB, RankerConfig, RankerModel};

fn model(seed: u64) -> RankerModel {
    RankerModel::init(RankerConfig {
        seed,
        ..RankerConfig::default()
    })
    .unwrap()
}

fn image() -> ImageRGB {
    ImageRGB::from_fn(20, 16, |x, y| {
        let t = (x * 3 + y * 5) as f64 / 200.0;
        [t, (1.0 - t) * 0.7, (t * 13.0).fract()]
    })
    .unwrap()
}

#[test]
fn save_then_load_gives_identical_scores() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    for seed in [0, 1, 99] {
        let m = model(seed);
        model_file::save_model(&m, &path).unwrap();
        let back = model_file::load_model(&path).unwrap();
        assert_eq!(back, m);
        let a = m.forward(&image()).unwrap().value();
        let b = back.forward(&image()).unwrap().value();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn saved_file_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    model_file::save_model(&model(4), &a).unwrap();
    model_file::save_model(&model_file::load_model(&a).unwrap(), &b).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn other_versions_are_rejected() {
    let text = model_file::to_json(&model(0));
    for v in ["0", "2", "17"] {
        let changed = text.replacen("\"version\":1", &format!("\"version\":{v}"), 1);
        assert!(matches!(
            model_file::from_json(&changed),
            Err(ModelFileError::Version { .. })
        ));
    }
}

#[test]
fn every_truncation_is_corrupt() {
    let small = RankerModel::init(RankerConfig {
        conv_channels: vec![2],
        fc_widths: vec![3, 2],
        ..RankerConfig::default()
    })
    .unwrap();
    let text = model_file::to_json(&small);
    for len in 0..text.len() {
        match model_file::from_json(&text[..len]) {
            Err(ModelFileError::Corrupt(_)) => {}
            other => panic!("prefix of {len} bytes gave {other:?}"),
        }
    }
    assert!(model_file::from_json(&text).is_ok());
}

#[test]
fn missing_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        model_file::load_model(&dir.path().join("none.json")),
        Err(ModelFileError::Io(..))
    ));
}
