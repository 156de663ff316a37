use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use twicemix::cli::GroundTruthRow;
use twicemix::{io, model_file, toy};
use twicemix_core::{RankerConfig, RankerModel};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twicemix"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus(dir: &Path, count: usize) -> String {
    let manifest = toy::write_corpus(&dir.join("corpus"), count, 16, 3).unwrap();
    manifest.to_str().unwrap().to_string()
}

const FIELDS: [&str; 8] = [
    "uicm",
    "uism",
    "uiconm",
    "sigma_chroma",
    "con_l",
    "mu_s",
    "uiqm",
    "uciqe",
];

#[test]
fn score_one_png() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 1);
    let img = dir.path().join("corpus/hq/src0000.png");
    let v = json(&ok(&["score", s(&img)]));
    let recs = v.as_array().unwrap();
    assert_eq!(recs.len(), 1);
    for f in FIELDS {
        assert!(recs[0][f].as_f64().unwrap().is_finite(), "{f}");
    }
    assert_eq!(recs[0].as_object().unwrap().len(), FIELDS.len() + 1);
}

#[test]
fn score_weight_override_isolates_uicm() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 1);
    let img = dir.path().join("corpus/lq/src0000.png");
    let v = json(&ok(&["score", s(&img), "--uiqm-weights", "1,0,0"]));
    assert_eq!(v[0]["uiqm"], v[0]["uicm"]);
    let v = json(&ok(&["score", s(&img), "--uciqe-weights", "0,0,1"]));
    assert_eq!(v[0]["uciqe"], v[0]["mu_s"]);
}

#[test]
fn score_directory_in_filename_order() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 5);
    let hq = dir.path().join("corpus/hq");
    let v = json(&ok(&["score", s(&hq)]));
    let paths: Vec<String> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["path"].as_str().unwrap().to_string())
        .collect();
    let expected: Vec<String> = (0..5)
        .map(|i| hq.join(format!("src{i:04}.png")).display().to_string())
        .collect();
    assert_eq!(paths, expected);
}

#[test]
fn score_missing_file_is_a_data_error() {
    let out = run(&["score", "/nonexistent/x.png"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mix_outputs() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 1);
    let hq = dir.path().join("corpus/hq/src0000.png");
    let lq = dir.path().join("corpus/lq/src0000.png");
    let out = dir.path().join("mix");
    ok(&["mix", "--hq", s(&hq), "--lq", s(&lq), "--k", "0,0.5,1", "--out", s(&out)]);
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["mix_0.5.png", "mix_0.png", "mix_1.png"]);
    assert_eq!(fs::read(out.join("mix_1.png")).unwrap(), fs::read(&hq).unwrap());
    assert_eq!(fs::read(out.join("mix_0.png")).unwrap(), fs::read(&lq).unwrap());

    let first = fs::read(out.join("mix_0.5.png")).unwrap();
    ok(&["mix", "--hq", s(&hq), "--lq", s(&lq), "--k", "0.5", "--out", s(&out)]);
    assert_eq!(fs::read(out.join("mix_0.5.png")).unwrap(), first);
}

#[test]
fn mix_errors() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 1);
    let hq = dir.path().join("corpus/hq/src0000.png");
    let small = dir.path().join("small.png");
    io::save_image(&twicemix_core::ImageRGB::filled(8, 8, [0.5; 3]).unwrap(), &small).unwrap();
    let out = dir.path().join("m");
    let mismatch = run(&["mix", "--hq", s(&hq), "--lq", s(&small), "--k", "0.5", "--out", s(&out)]);
    assert_eq!(mismatch.status.code(), Some(2));
    let bad_k = run(&["mix", "--hq", s(&hq), "--lq", s(&hq), "--k", "1.5", "--out", s(&out)]);
    assert_eq!(bad_k.status.code(), Some(1));
}

fn ground_truth(dir: &Path) -> Vec<GroundTruthRow> {
    twicemix::cli::read_ground_truth(dir).unwrap()
}

#[test]
fn synthset_default_ks() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 3);
    let out = dir.path().join("ss");
    ok(&["synthset", "--manifest", &manifest, "--out", s(&out)]);
    let rows = ground_truth(&out);
    assert_eq!(rows.len(), 15);
    for src in ["src0000", "src0001", "src0002"] {
        let mut mine: Vec<&GroundTruthRow> = rows.iter().filter(|r| r.source_id == src).collect();
        assert_eq!(mine.len(), 5);
        let ks: Vec<f64> = mine.iter().map(|r| r.k).collect();
        assert_eq!(ks, [0.0, 0.2, 0.4, 0.6, 0.8]);
        // Ranks must follow from the k ordering alone.
        mine.sort_by(|a, b| a.k.total_cmp(&b.k));
        for (i, r) in mine.iter().enumerate() {
            assert_eq!(r.rank, i + 1);
            assert!(out.join(&r.path).is_file());
        }
    }
    let header = fs::read_to_string(out.join("groundtruth.csv")).unwrap();
    assert!(header.starts_with("source_id,k,rank,path\n"));
}

#[test]
fn synthset_one_source_and_split() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 4);
    let out = dir.path().join("ss");
    ok(&["synthset", "--manifest", &manifest, "--split", "3", "--out", s(&out)]);
    let rows = ground_truth(&out);
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.source_id == "src0003"));
    let bad = run(&["synthset", "--manifest", &manifest, "--ks", "0.5,0.2", "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(1));
    let bad = run(&["synthset", "--manifest", &manifest, "--ks", "0,1.2", "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn train_zero_epochs_writes_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 2);
    let model = dir.path().join("m.json");
    ok(&["train", "--manifest", &manifest, "--epochs", "0", "--seed", "12", "--out", s(&model)]);
    let init = RankerModel::init(RankerConfig {
        seed: 12,
        epochs: 0,
        ..RankerConfig::default()
    })
    .unwrap();
    assert_eq!(fs::read_to_string(&model).unwrap(), model_file::to_json(&init));
    let log = fs::read_to_string(dir.path().join("m.log.csv")).unwrap();
    assert_eq!(log, "epoch,mean_loss\n");
}

#[test]
fn train_same_seed_same_file_and_loss_falls() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 6);
    let args = |out: &str, log: &str| {
        vec![
            "train".to_string(),
            "--manifest".into(),
            manifest.clone(),
            "--epochs".into(),
            "8".into(),
            "--lr".into(),
            "1e-3".into(),
            "--conv-channels".into(),
            "4,8".into(),
            "--fc-widths".into(),
            "8,4".into(),
            "--seed".into(),
            "5".into(),
            "--out".into(),
            out.into(),
            "--log".into(),
            log.into(),
        ]
    };
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let a: Vec<String> = args(&p("a.json"), &p("a.csv"));
    let b: Vec<String> = args(&p("b.json"), &p("b.csv"));
    ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
    ok(&b.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(fs::read(p("a.json")).unwrap(), fs::read(p("b.json")).unwrap());
    assert_eq!(fs::read(p("a.csv")).unwrap(), fs::read(p("b.csv")).unwrap());

    let mut reader = csv::Reader::from_path(p("a.csv")).unwrap();
    let losses: Vec<f64> = reader
        .records()
        .map(|r| r.unwrap()[1].parse().unwrap())
        .collect();
    assert_eq!(losses.len(), 8);
    assert!(losses[7] < losses[0], "{losses:?}");
}

#[test]
fn train_without_lq_pairs_fails_with_data_error() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 2);
    let manifest = dir.path().join("corpus/nolq.csv");
    fs::write(
        &manifest,
        "id,raw,hq,lq\na,raw/src0000.png,hq/src0000.png,\nb,raw/src0001.png,hq/src0001.png,\n",
    )
    .unwrap();
    let out = run(&["train", "--manifest", s(&manifest), "--out", s(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no trainable pairs"));
}

#[test]
fn train_rejects_invalid_config() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 1);
    let m = dir.path().join("m.json");
    for extra in [["--epsilon", "0"], ["--fc-widths", "4"], ["--conv-channels", "0,4"]] {
        let mut args = vec!["train", "--manifest", &manifest, "--out", s(&m)];
        args.extend(extra);
        assert_eq!(run(&args).status.code(), Some(1), "{extra:?}");
    }
}

#[test]
fn eval_with_model_and_baselines() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 5);
    let model = dir.path().join("m.json");
    ok(&["train", "--manifest", &manifest, "--split", "3", "--epochs", "2", "--out", s(&model)]);
    let ss = dir.path().join("ss");
    ok(&["synthset", "--manifest", &manifest, "--split", "3", "--out", s(&ss)]);

    let report = json(&ok(&["eval", "--model", s(&model), "--synthset", s(&ss)]));
    let mean = report["mean_krcc"].as_f64().unwrap();
    assert!((-1.0..=1.0).contains(&mean));
    let groups = report["groups"].as_array().unwrap();
    assert_eq!(groups.len(), 2);
    let krccs: Vec<f64> = groups.iter().map(|g| g["krcc"].as_f64().unwrap()).collect();
    let srccs: Vec<f64> = groups.iter().map(|g| g["srcc"].as_f64().unwrap()).collect();
    let (mk, sk) = twicemix_core::eval::mean_std(&krccs);
    let (ms, ss_) = twicemix_core::eval::mean_std(&srccs);
    assert!((report["mean_krcc"].as_f64().unwrap() - mk).abs() < 1e-12);
    assert!((report["std_krcc"].as_f64().unwrap() - sk).abs() < 1e-12);
    assert!((report["mean_srcc"].as_f64().unwrap() - ms).abs() < 1e-12);
    assert!((report["std_srcc"].as_f64().unwrap() - ss_).abs() < 1e-12);

    for metric in ["uiqm", "uciqe"] {
        let r = json(&ok(&["eval", "--metric", metric, "--synthset", s(&ss)]));
        assert!(r["mean_krcc"].as_f64().is_some());
    }
}

#[test]
fn eval_scored_csv_and_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("scores.csv");
    fs::write(
        &csv,
        "group_id,item_id,score,gt_rank\ng,a,0.1,1\ng,b,0.2,2\ng,c,0.3,3\nh,a,3,1\nh,b,2,2\nh,c,1,3\n",
    )
    .unwrap();
    let report_path = dir.path().join("r.json");
    ok(&["eval", "--scores", s(&csv), "--report", s(&report_path)]);
    let r: Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(r["groups"][0]["krcc"], 1.0);
    assert_eq!(r["groups"][1]["krcc"], -1.0);
    assert_eq!(r["mean_krcc"], 0.0);
    assert_eq!(r["std_krcc"], 1.0);
}

#[test]
fn eval_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let missing = run(&["eval", "--metric", "uiqm", "--synthset", s(&empty)]);
    assert_eq!(missing.status.code(), Some(2));
    let no_scorer = run(&["eval", "--synthset", s(&empty)]);
    assert_eq!(no_scorer.status.code(), Some(1));
    let both = run(&["eval", "--metric", "uiqm", "--model", "m.json", "--synthset", s(&empty)]);
    assert_eq!(both.status.code(), Some(1));
}

#[test]
fn validate_reports_failures() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 2);
    let v = json(&ok(&["validate", "--manifest", &manifest]));
    assert_eq!(v["failures"].as_array().unwrap().len(), 0);
    fs::remove_file(dir.path().join("corpus/hq/src0001.png")).unwrap();
    let out = run(&["validate", "--manifest", &manifest]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["failures"][0]["id"], "src0001");
    assert_eq!(v["failures"][0]["kind"], "missing");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["score", "--uiqm-weights", "1,2", "x.png"]).status.code(), Some(1));
    assert_eq!(run(&["train", "--manifest", "m.csv"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn duplicate_manifest_id_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    fs::write(&m, "id,raw,hq,lq\nx,a.png,b.png,\nx,c.png,d.png,\n").unwrap();
    let out = run(&["validate", "--manifest", s(&m)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"x\""));
}
