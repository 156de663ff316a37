//! The `twicemix` command line.
//!
//! Exit codes: 0 on success, 1 for usage errors (bad flags or flag values),
//! 2 for data errors (unreadable, missing or inconsistent inputs).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use twicemix_core::eval::RankedItem;
use twicemix_core::metrics::{self, MetricBreakdown};
use twicemix_core::mixing;
use twicemix_core::ranker::{self, TrainLog};
use twicemix_core::{
    evaluate_groups, ImageRGB, Ranking, RankingReport, RankerConfig, RankerModel, UciqeWeights,
    UiqmWeights,
};

use crate::dataset::{self, Endpoint, SplitSpec};
use crate::{io, model_file, toy};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.into())
            }
        }
    )*};
}

data_error!(io::IoError, dataset::DatasetError, model_file::ModelFileError);

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "twicemix", version, about = "Rank-learned quality assessment of enhanced underwater images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute UIQM and UCIQE with their components for each image.
    Score(ScoreArgs),
    /// Blend a high- and a low-quality image at one or more ratios.
    Mix(MixArgs),
    /// Build a graded synthetic test set with ground-truth ranks.
    Synthset(SynthsetArgs),
    /// Train the Siamese ranker on the HQ/LQ pairs of a manifest.
    Train(TrainArgs),
    /// Rank graded images with a model or a baseline and report KRCC/SRCC.
    Eval(EvalArgs),
    /// Check that every file of a manifest exists, decodes and lines up.
    Validate(ValidateArgs),
    /// Write a procedural toy corpus and its manifest.
    Toy(ToyArgs),
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| format!("{p:?}: {e}")))
        .collect()
}

fn parse_weights(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = parse_list(s)?;
    let w: [f64; 3] = v
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected 3 comma-separated weights, got {}", v.len()))?;
    if w.iter().any(|x| !x.is_finite()) {
        return Err("weights must be finite".into());
    }
    Ok(w)
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Image files, or directories whose .png/.ppm files are scored in
    /// filename order.
    pub inputs: Vec<PathBuf>,
    /// Score every image referenced by a manifest instead.
    #[arg(long, conflicts_with = "inputs")]
    pub manifest: Option<PathBuf>,
    /// UIQM weights c1,c2,c3.
    #[arg(long, value_parser = parse_weights, allow_hyphen_values = true)]
    pub uiqm_weights: Option<[f64; 3]>,
    /// UCIQE weights c1,c2,c3.
    #[arg(long, value_parser = parse_weights, allow_hyphen_values = true)]
    pub uciqe_weights: Option<[f64; 3]>,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    #[arg(long)]
    pub hq: PathBuf,
    #[arg(long)]
    pub lq: PathBuf,
    /// Mixing ratios applied to the HQ image, comma-separated.
    #[arg(long = "k", value_delimiter = ',', required = true)]
    pub ks: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EndpointArg {
    Lq,
    Raw,
}

impl From<EndpointArg> for Endpoint {
    fn from(e: EndpointArg) -> Self {
        match e {
            EndpointArg::Lq => Endpoint::Lq,
            EndpointArg::Raw => Endpoint::Raw,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthsetArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Ascending mixing ratios; one graded image per ratio and source.
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6,0.8")]
    pub ks: Vec<f64>,
    /// Low endpoint of each mix. `lq` falls back to raw for entries without
    /// an LQ image.
    #[arg(long, value_enum, default_value = "lq")]
    pub endpoint: EndpointArg,
    /// Use only the entries after the first N (the held-out part of a split).
    #[arg(long)]
    pub split: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Model JSON to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch loss CSV; defaults to the model path with `.log.csv`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Train only on the first N entries.
    #[arg(long)]
    pub split: Option<usize>,
    #[arg(long, default_value_t = RankerConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = RankerConfig::default().learning_rate)]
    pub lr: f64,
    #[arg(long, default_value_t = RankerConfig::default().epsilon)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = RankerConfig::default().max_side)]
    pub max_side: usize,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
    pub conv_channels: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "32,16")]
    pub fc_widths: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum Metric {
    Uiqm,
    Uciqe,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["synthset", "scores"])))]
pub struct EvalArgs {
    /// Model JSON used to score the synthetic set.
    #[arg(long, conflicts_with_all = ["metric", "scores"], required_unless_present_any = ["metric", "scores"])]
    pub model: Option<PathBuf>,
    /// Rank with a baseline metric instead of a model.
    #[arg(long, value_enum, conflicts_with = "scores")]
    pub metric: Option<Metric>,
    /// Directory written by `synthset`.
    #[arg(long)]
    pub synthset: Option<PathBuf>,
    /// Pre-scored CSV with columns group_id,item_id,score,gt_rank.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code; messages go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Score(a) => cmd_score(a),
        Command::Mix(a) => cmd_mix(a),
        Command::Synthset(a) => cmd_synthset(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Toy(a) => cmd_toy(a),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes")
}

fn is_image(path: &Path) -> bool {
    io::Format::from_path(path).is_some()
}

/// Expands directories into their image files, sorted by file name.
fn expand_inputs(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(input)
                .with_context(|| format!("reading {}", input.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()
                .with_context(|| format!("reading {}", input.display()))?;
            files.retain(|p| p.is_file() && is_image(p));
            files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
            out.extend(files);
        } else {
            out.push(input.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub path: String,
    #[serde(flatten)]
    pub metrics: MetricBreakdown,
}

fn uiqm_weights(w: Option<[f64; 3]>) -> UiqmWeights {
    w.map_or_else(UiqmWeights::default, |[c1, c2, c3]| UiqmWeights { c1, c2, c3 })
}

fn uciqe_weights(w: Option<[f64; 3]>) -> UciqeWeights {
    w.map_or_else(UciqeWeights::default, |[c1, c2, c3]| UciqeWeights { c1, c2, c3 })
}

fn cmd_score(a: ScoreArgs) -> Result<(), CliError> {
    let paths = match &a.manifest {
        Some(m) => {
            let entries = dataset::load_manifest(m)?;
            entries
                .into_iter()
                .flat_map(|e| [Some(e.raw_path), Some(e.hq_path), e.lq_path])
                .flatten()
                .collect()
        }
        None if a.inputs.is_empty() => return Err(usage("no images given")),
        None => expand_inputs(&a.inputs)?,
    };
    let (qw, cw) = (uiqm_weights(a.uiqm_weights), uciqe_weights(a.uciqe_weights));
    let mut records = Vec::with_capacity(paths.len());
    for p in paths {
        let img = io::load_image(&p)?;
        records.push(ScoreRecord {
            path: p.display().to_string(),
            metrics: MetricBreakdown::compute(&img, &qw, &cw),
        });
    }
    write_output(a.out.as_deref(), &to_json(&records))?;
    Ok(())
}

/// File name of one mix, e.g. `mix_0.5.png`.
pub fn mix_file_name(k: f64) -> String {
    format!("mix_{k}.png")
}

fn check_ratios(ks: &[f64]) -> Result<(), CliError> {
    if ks.is_empty() {
        return Err(usage("at least one mixing ratio is required"));
    }
    if let Some(k) = ks.iter().find(|k| !(0.0..=1.0).contains(*k)) {
        return Err(usage(format!("mixing ratio {k} is outside [0, 1]")));
    }
    Ok(())
}

fn cmd_mix(a: MixArgs) -> Result<(), CliError> {
    check_ratios(&a.ks)?;
    let ks = a.ks;
    let hq = io::load_image(&a.hq)?;
    let lq = io::load_image(&a.lq)?;
    if hq.dims() != lq.dims() {
        return Err(anyhow!("hq is {:?} but lq is {:?}", hq.dims(), lq.dims()).into());
    }
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for k in ks {
        let img = mixing::mix(&hq, &lq, k).map_err(|e| anyhow!("{e}"))?;
        io::save_image(&img, &a.out.join(mix_file_name(k)))?;
    }
    Ok(())
}

/// One row of a synthetic set's `groundtruth.csv`. `path` is relative to the
/// set's directory; `rank` is 1 for the lowest ratio and grows with `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRow {
    pub source_id: String,
    pub k: f64,
    pub rank: usize,
    pub path: String,
}

pub const GROUND_TRUTH_FILE: &str = "groundtruth.csv";

fn cmd_synthset(a: SynthsetArgs) -> Result<(), CliError> {
    mixing::validate_ratio_list(&a.ks).map_err(|e| usage(format!("--ks: {e}")))?;
    let entries = dataset::load_manifest(&a.manifest)?;
    let entries = match a.split {
        Some(n) => dataset::split(&entries, SplitSpec { train_count: n })
            .map_err(|e| usage(e.to_string()))?
            .test,
        None => entries,
    };
    if entries.is_empty() {
        return Err(anyhow!("no entries to build a synthetic set from").into());
    }
    let sources = dataset::load_synthetic_sources(&entries, a.endpoint.into())?;
    let grades = mixing::build_synthetic_testset(&sources, &a.ks).map_err(|e| anyhow!("{e}"))?;
    let images = a.out.join("images");
    fs::create_dir_all(&images).with_context(|| format!("creating {}", images.display()))?;
    let gt_path = a.out.join(GROUND_TRUTH_FILE);
    let mut w = csv::Writer::from_path(&gt_path).with_context(|| format!("writing {}", gt_path.display()))?;
    for g in &grades {
        let rel = format!("images/{}_k{}.png", g.source_id, g.k);
        io::save_image(&g.image, &a.out.join(&rel))?;
        w.serialize(GroundTruthRow {
            source_id: g.source_id.clone(),
            k: g.k,
            rank: g.gt_rank,
            path: rel,
        })
        .context("writing ground truth")?;
    }
    w.flush().context("writing ground truth")?;
    eprintln!("wrote {} images for {} sources", grades.len(), sources.len());
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<(), CliError> {
    let config = RankerConfig {
        conv_channels: a.conv_channels,
        fc_widths: a.fc_widths,
        epsilon: a.epsilon,
        learning_rate: a.lr,
        epochs: a.epochs,
        seed: a.seed,
        max_side: a.max_side,
        ..RankerConfig::default()
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    if !(a.lr >= 0.0 && a.lr.is_finite()) {
        return Err(usage("--lr must be a finite non-negative number"));
    }
    let entries = dataset::load_manifest(&a.manifest)?;
    let train_entries = match a.split {
        Some(n) => {
            let s = dataset::split(&entries, SplitSpec { train_count: n })
                .map_err(|e| usage(e.to_string()))?;
            if !s.excluded.is_empty() {
                eprintln!(
                    "excluded {} entries without an LQ image: {}",
                    s.excluded.len(),
                    s.excluded.join(", ")
                );
            }
            s.train
        }
        None => entries,
    };
    let pairs = dataset::load_training_pairs(&train_entries)?;
    if pairs.is_empty() {
        return Err(anyhow!("no trainable pairs: training needs entries with both an hq and an lq image").into());
    }
    let model = RankerModel::init(config.clone()).map_err(|e| usage(e.to_string()))?;
    let (model, log) = if config.epochs == 0 {
        (model, TrainLog::default())
    } else {
        eprintln!("training on {} pairs for {} epochs", pairs.len(), config.epochs);
        ranker::train(model, &pairs, &config).map_err(|e| anyhow!("{e}"))?
    };
    model_file::save_model(&model, &a.out)?;
    let log_path = a.log.unwrap_or_else(|| a.out.with_extension("log.csv"));
    let mut w = csv::Writer::from_path(&log_path).with_context(|| format!("writing {}", log_path.display()))?;
    w.write_record(["epoch", "mean_loss"]).context("writing log")?;
    for (i, loss) in log.epoch_losses.iter().enumerate() {
        w.write_record([(i + 1).to_string(), loss.to_string()]).context("writing log")?;
        eprintln!("epoch {} mean loss {loss:.6}", i + 1);
    }
    w.flush().context("writing log")?;
    Ok(())
}

enum Scorer {
    Model(Box<RankerModel>),
    Metric(Metric),
}

impl Scorer {
    fn score(&self, img: &ImageRGB) -> anyhow::Result<f64> {
        Ok(match self {
            Scorer::Model(m) => m.forward(img).map_err(|e| anyhow!("{e}"))?.value(),
            Scorer::Metric(Metric::Uiqm) => metrics::uiqm(img, &UiqmWeights::default()).uiqm,
            Scorer::Metric(Metric::Uciqe) => metrics::uciqe(img, &UciqeWeights::default()).uciqe,
        })
    }
}

/// Groups items by id in order of first appearance.
fn group(items: impl IntoIterator<Item = (String, RankedItem)>) -> Vec<Ranking> {
    let mut out: Vec<Ranking> = Vec::new();
    for (gid, item) in items {
        match out.iter_mut().find(|r| r.group_id == gid) {
            Some(r) => r.items.push(item),
            None => out.push(Ranking {
                group_id: gid,
                items: vec![item],
            }),
        }
    }
    out
}

pub fn read_ground_truth(dir: &Path) -> anyhow::Result<Vec<GroundTruthRow>> {
    let path = dir.join(GROUND_TRUTH_FILE);
    if !path.is_file() {
        bail!("missing ground truth {}", path.display());
    }
    let mut r = csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<GroundTruthRow>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

#[derive(Debug, Deserialize)]
struct ScoredRow {
    group_id: String,
    item_id: String,
    score: f64,
    gt_rank: usize,
}

fn scored_csv_rankings(path: &Path) -> anyhow::Result<Vec<Ranking>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let rows = r
        .deserialize()
        .collect::<Result<Vec<ScoredRow>, _>>()
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(group(rows.into_iter().map(|row| {
        (
            row.group_id,
            RankedItem {
                item_id: row.item_id,
                score: row.score,
                gt_rank: row.gt_rank,
            },
        )
    })))
}

fn synthset_rankings(dir: &Path, scorer: &Scorer) -> anyhow::Result<Vec<Ranking>> {
    let rows = read_ground_truth(dir)?;
    let mut items = Vec::with_capacity(rows.len());
    for row in rows {
        let img = io::load_image(&dir.join(&row.path))?;
        let score = scorer
            .score(&img)
            .with_context(|| format!("scoring {}", row.path))?;
        items.push((
            row.source_id,
            RankedItem {
                item_id: row.path,
                score,
                gt_rank: row.rank,
            },
        ));
    }
    Ok(group(items))
}

pub fn format_table(report: &RankingReport) -> String {
    let mut s = format!("{:<24} {:>3} {:>8} {:>8}\n", "group", "n", "krcc", "srcc");
    for g in &report.groups {
        s += &format!("{:<24} {:>3} {:>8.4} {:>8.4}\n", g.group_id, g.n, g.krcc, g.srcc);
    }
    s += &format!(
        "mean krcc {:.4} (std {:.4})  mean srcc {:.4} (std {:.4})",
        report.mean_krcc, report.std_krcc, report.mean_srcc, report.std_srcc
    );
    s
}

fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    let rankings = match (&a.scores, &a.synthset) {
        (Some(csv), _) => scored_csv_rankings(csv)?,
        (None, Some(dir)) => {
            let scorer = match (&a.model, a.metric) {
                (Some(path), _) => {
                    Scorer::Model(Box::new(model_file::load_model(path)?))
                }
                (None, Some(m)) => Scorer::Metric(m),
                (None, None) => return Err(usage("--synthset needs --model or --metric")),
            };
            synthset_rankings(dir, &scorer)?
        }
        (None, None) => return Err(usage("one of --synthset or --scores is required")),
    };
    let report = evaluate_groups(&rankings).map_err(|e| anyhow!("{e}"))?;
    write_output(a.report.as_deref(), &to_json(&report))?;
    eprintln!("{}", format_table(&report));
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> Result<(), CliError> {
    let entries = dataset::load_manifest(&a.manifest)?;
    let report = dataset::validate_manifest(&entries);
    write_output(a.out.as_deref(), &to_json(&report))?;
    if !report.is_ok() {
        return Err(anyhow!("{} of {} entries failed validation", report.failures.len(), report.entries).into());
    }
    Ok(())
}

fn cmd_toy(a: ToyArgs) -> Result<(), CliError> {
    if a.size < twicemix_core::image::MIN_SIDE {
        return Err(usage(format!("--size must be at least {}", twicemix_core::image::MIN_SIDE)));
    }
    toy::write_corpus(&a.out, a.count, a.size, a.seed)?;
    Ok(())
}
