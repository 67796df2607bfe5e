//! Trajectory files: a small TOML document naming the map and the actions.
//!
//! ```toml
//! map = "default"          # or a path, or inline rows under `map_text`
//! actions = "RRDDLLUU"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::{parse_actions, Action, ActionParseError, GridMap, MapError};

#[derive(Debug, Error)]
pub enum TrajFileError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid trajectory file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("both `map` and `map_text` are set")]
    AmbiguousMap,
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Actions(#[from] ActionParseError),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajFile {
    /// `"default"` or a path, relative to the file itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_text: Option<String>,
    pub actions: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Map path or inline text resolved to a grid; `"default"` is the shipped map.
pub fn load_map(spec: &str, base: Option<&Path>) -> Result<GridMap, TrajFileError> {
    if spec == "default" {
        return Ok(GridMap::default_map());
    }
    let path = match base {
        Some(dir) => dir.join(spec),
        None => PathBuf::from(spec),
    };
    let text = std::fs::read_to_string(&path).map_err(|source| TrajFileError::Io { path, source })?;
    Ok(GridMap::parse(&text)?)
}

impl TrajFile {
    pub fn parse(text: &str) -> Result<TrajFile, TrajFileError> {
        Ok(toml::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<TrajFile, TrajFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| TrajFileError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        TrajFile::parse(&text)
    }

    pub fn actions(&self) -> Result<Vec<Action>, TrajFileError> {
        Ok(parse_actions(&self.actions)?)
    }

    /// The map named by the file, or `None` if it names none.
    pub fn map(&self, base: Option<&Path>) -> Result<Option<GridMap>, TrajFileError> {
        match (&self.map, &self.map_text) {
            (Some(_), Some(_)) => Err(TrajFileError::AmbiguousMap),
            (Some(spec), None) => load_map(spec, base).map(Some),
            (None, Some(text)) => Ok(Some(GridMap::parse(text)?)),
            (None, None) => Ok(None),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain strings serialize")
    }
}
