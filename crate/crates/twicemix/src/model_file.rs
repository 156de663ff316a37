//! Versioned JSON model files.
//!
//! ```json
//! {"version": 1, "config": {...}, "layers": [{"name": "conv0.weight", "shape": [8, 3, 3, 3], "values": [...]}, ...]}
//! ```
//!
//! Layers appear in the scorer's storage order: every `conv{i}.weight` /
//! `conv{i}.bias` pair, then `fc0`, `fc1`, `fc2`. Values are written with
//! shortest round-trip formatting, so save then load is lossless.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use twicemix_core::ranker::{Param, RankerError, MODEL_VERSION};
use twicemix_core::{RankerConfig, RankerModel};

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("{}: {}", .0.display(), .1)]
    Io(PathBuf, #[source] std::io::Error),
    #[error("model format version {found} is not supported (expected {expected})")]
    Version { found: u64, expected: u32 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("invalid model: {0}")]
    Invalid(RankerError),
}

#[derive(Serialize, Deserialize)]
struct Document {
    version: u32,
    config: RankerConfig,
    layers: Vec<Param>,
}

#[derive(Serialize)]
struct DocumentRef<'a> {
    version: u32,
    config: &'a RankerConfig,
    layers: &'a [Param],
}

pub fn to_json(model: &RankerModel) -> String {
    serde_json::to_string(&DocumentRef {
        version: MODEL_VERSION,
        config: model.config(),
        layers: model.params(),
    })
    .expect("model serializes")
}

pub fn from_json(text: &str) -> Result<RankerModel, ModelFileError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ModelFileError::Corrupt(e.to_string()))?;
    let version = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| ModelFileError::Corrupt("missing integer version".into()))?;
    if version != u64::from(MODEL_VERSION) {
        return Err(ModelFileError::Version {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let doc: Document =
        serde_json::from_value(value).map_err(|e| ModelFileError::Corrupt(e.to_string()))?;
    RankerModel::from_params(doc.config, doc.layers).map_err(ModelFileError::Invalid)
}

pub fn save_model(model: &RankerModel, path: &Path) -> Result<(), ModelFileError> {
    fs::write(path, to_json(model)).map_err(|e| ModelFileError::Io(path.to_path_buf(), e))
}

pub fn load_model(path: &Path) -> Result<RankerModel, ModelFileError> {
    let text =
        fs::read_to_string(path).map_err(|e| ModelFileError::Io(path.to_path_buf(), e))?;
    from_json(&text)
}
