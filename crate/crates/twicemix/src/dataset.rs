//! Manifest CSV ingestion, validation and splitting.
//!
//! A manifest has the header `id,raw,hq,lq`; `lq` may be empty. Paths are
//! relative to the manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use twicemix_core::mixing::SyntheticSource;
use twicemix_core::ImageRGB;

use crate::io::{self, IoError};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{}: {}", .0.display(), .1)]
    Io(PathBuf, #[source] std::io::Error),
    #[error("manifest line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("duplicate manifest id {0:?}")]
    DuplicateId(String),
    #[error("train count {train_count} exceeds the {total} manifest entries")]
    SplitTooLarge { train_count: usize, total: usize },
    #[error("entry {id}: {source}")]
    Image {
        id: String,
        #[source]
        source: IoError,
    },
    #[error("entry {id}: {what} is {a:?} but hq is {b:?}")]
    DimensionMismatch {
        id: String,
        what: &'static str,
        a: (usize, usize),
        b: (usize, usize),
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub raw_path: PathBuf,
    pub hq_path: PathBuf,
    pub lq_path: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct Row {
    id: String,
    raw: String,
    hq: String,
    lq: Option<String>,
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::Io(path.to_path_buf(), e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base)
}

/// Parses manifest text, resolving paths against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| DatasetError::Malformed {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["id", "raw", "hq", "lq"] {
        return Err(DatasetError::Malformed {
            line: 1,
            message: format!("expected header id,raw,hq,lq, found {}", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DatasetError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: Row = record
            .deserialize(Some(&header))
            .map_err(|e| DatasetError::Malformed {
                line,
                message: e.to_string(),
            })?;
        for (field, value) in [("id", &row.id), ("raw", &row.raw), ("hq", &row.hq)] {
            if value.is_empty() {
                return Err(DatasetError::Malformed {
                    line,
                    message: format!("empty {field} field"),
                });
            }
        }
        if !seen.insert(row.id.clone()) {
            return Err(DatasetError::DuplicateId(row.id));
        }
        entries.push(ManifestEntry {
            id: row.id,
            raw_path: base.join(row.raw),
            hq_path: base.join(row.hq),
            lq_path: row.lq.filter(|s| !s.is_empty()).map(|s| base.join(s)),
        });
    }
    Ok(entries)
}

/// Writes a manifest whose paths are made relative to `path`'s directory
/// when possible.
pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<(), DatasetError> {
    let base = path.parent().unwrap_or(Path::new("."));
    let rel = |p: &Path| {
        p.strip_prefix(base)
            .unwrap_or(p)
            .to_string_lossy()
            .into_owned()
    };
    let io_err = |e: std::io::Error| DatasetError::Io(path.to_path_buf(), e);
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(e.into()))?;
    w.write_record(["id", "raw", "hq", "lq"])
        .map_err(|e| io_err(e.into()))?;
    for e in entries {
        let lq = e.lq_path.as_deref().map(rel).unwrap_or_default();
        w.write_record([e.id.as_str(), &rel(&e.raw_path), &rel(&e.hq_path), &lq])
            .map_err(|e| io_err(e.into()))?;
    }
    w.flush().map_err(io_err)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Missing,
    Decode,
    DimensionMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationFailure {
    pub id: String,
    pub path: PathBuf,
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub entries: usize,
    pub failures: Vec<ValidationFailure>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks that every referenced file exists, decodes, and has the
/// dimensions of the entry's HQ image. Never aborts early.
pub fn validate_manifest(entries: &[ManifestEntry]) -> ValidationReport {
    let mut failures = Vec::new();
    for e in entries {
        let mut files: Vec<(&Path, &str)> = vec![(&e.hq_path, "hq"), (&e.raw_path, "raw")];
        if let Some(lq) = &e.lq_path {
            files.push((lq, "lq"));
        }
        let mut hq_dims = None;
        for (path, role) in files {
            match io::read_rgb8(path) {
                Ok(img) => {
                    let dims = (img.width, img.height);
                    match hq_dims {
                        None if role == "hq" => hq_dims = Some(dims),
                        Some(h) if h != dims => failures.push(ValidationFailure {
                            id: e.id.clone(),
                            path: path.to_path_buf(),
                            kind: FailureKind::DimensionMismatch,
                            message: format!("{role} is {dims:?} but hq is {h:?}"),
                        }),
                        _ => {}
                    }
                }
                Err(err) => failures.push(ValidationFailure {
                    id: e.id.clone(),
                    path: path.to_path_buf(),
                    kind: match err {
                        IoError::Missing(_) => FailureKind::Missing,
                        _ => FailureKind::Decode,
                    },
                    message: err.to_string(),
                }),
            }
        }
    }
    ValidationReport {
        entries: entries.len(),
        failures,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    /// Training entries, all with an LQ image.
    pub train: Vec<ManifestEntry>,
    pub test: Vec<ManifestEntry>,
    /// Ids in the training prefix left out for lacking an LQ image.
    pub excluded: Vec<String>,
}

/// Prefix/suffix split in manifest order.
pub fn split(entries: &[ManifestEntry], spec: SplitSpec) -> Result<Split, DatasetError> {
    if spec.train_count > entries.len() {
        return Err(DatasetError::SplitTooLarge {
            train_count: spec.train_count,
            total: entries.len(),
        });
    }
    let (head, tail) = entries.split_at(spec.train_count);
    let (train, excluded): (Vec<_>, Vec<_>) = head.iter().cloned().partition(|e| e.lq_path.is_some());
    Ok(Split {
        train,
        test: tail.to_vec(),
        excluded: excluded.into_iter().map(|e| e.id).collect(),
    })
}

/// Low endpoint of the synthetic test set mixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    /// The LQ image, or the raw image for entries without one.
    #[default]
    Lq,
    Raw,
}

fn load(entry: &ManifestEntry, path: &Path) -> Result<ImageRGB, DatasetError> {
    io::load_image(path).map_err(|source| DatasetError::Image {
        id: entry.id.clone(),
        source,
    })
}

fn same_dims(entry: &ManifestEntry, what: &'static str, a: &ImageRGB, hq: &ImageRGB) -> Result<(), DatasetError> {
    if a.dims() != hq.dims() {
        return Err(DatasetError::DimensionMismatch {
            id: entry.id.clone(),
            what,
            a: a.dims(),
            b: hq.dims(),
        });
    }
    Ok(())
}

/// Loads the `(hq, lq)` training pair of every entry that has an LQ image.
pub fn load_training_pairs(entries: &[ManifestEntry]) -> Result<Vec<(ImageRGB, ImageRGB)>, DatasetError> {
    entries
        .iter()
        .filter_map(|e| e.lq_path.as_ref().map(|lq| (e, lq)))
        .map(|(e, lq_path)| {
            let hq = load(e, &e.hq_path)?;
            let lq = load(e, lq_path)?;
            same_dims(e, "lq", &lq, &hq)?;
            Ok((hq, lq))
        })
        .collect()
}

/// Loads the mixing endpoints of every entry for a synthetic test set.
pub fn load_synthetic_sources(
    entries: &[ManifestEntry],
    endpoint: Endpoint,
) -> Result<Vec<SyntheticSource>, DatasetError> {
    entries
        .iter()
        .map(|e| {
            let high = load(e, &e.hq_path)?;
            let (what, path) = match (endpoint, &e.lq_path) {
                (Endpoint::Lq, Some(lq)) => ("lq", lq),
                _ => ("raw", &e.raw_path),
            };
            let low = load(e, path)?;
            same_dims(e, what, &low, &high)?;
            Ok(SyntheticSource {
                id: e.id.clone(),
                high,
                low,
            })
        })
        .collect()
}
