//! Batch run configuration: everything `simulate` needs, loadable from a
//! JSON file and overridable field by field.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::pack::{DomainPack, PackError};
use crate::session::{ConfigError, RewardConfig, SimulationConfig, SystemConfig, UserConfig, DEFAULT_MAX_TURNS};

pub const CORPUS_FILE: &str = "corpus.jsonl";

#[derive(Debug, Error)]
pub enum RunConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: {path}: {message}")]
    Parse {
        origin: String,
        path: String,
        message: String,
    },
    #[error("episodes: must be at least 1")]
    NoEpisodes,
    #[error("pack {path}: {source}")]
    Pack {
        path: PathBuf,
        #[source]
        source: PackError,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub user: UserConfig,
    /// Pack directory; the bundled pack when absent.
    pub pack: Option<PathBuf>,
    pub episodes: u64,
    pub base_seed: u64,
    pub max_turns: usize,
    pub reward: RewardConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: SystemConfig::default(),
            user: UserConfig::default(),
            pack: None,
            episodes: 500,
            base_seed: 0,
            max_turns: DEFAULT_MAX_TURNS,
            reward: RewardConfig::default(),
            output_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    /// Builds a config from defaults, then the file's fields, then
    /// `overrides` (JSON pointer → value), later layers winning.
    pub fn layered(file: Option<&Path>, overrides: &[(&str, Value)]) -> Result<Self, RunConfigError> {
        let mut doc = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
        let mut origin = "defaults".to_string();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|source| RunConfigError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let layer: Value = serde_json::from_str(&text).map_err(|e| RunConfigError::Parse {
                origin: path.display().to_string(),
                path: ".".into(),
                message: e.to_string(),
            })?;
            merge(&mut doc, layer);
            origin = path.display().to_string();
        }
        for (pointer, value) in overrides {
            set_pointer(&mut doc, pointer, value.clone());
        }
        if !overrides.is_empty() {
            origin = format!("{origin} + flags");
        }
        serde_path_to_error::deserialize(doc).map_err(|e| RunConfigError::Parse {
            origin,
            path: e.path().to_string(),
            message: e.into_inner().to_string(),
        })
    }

    pub fn simulation(&self) -> SimulationConfig {
        SimulationConfig {
            system: self.system.clone(),
            user: self.user.clone(),
            max_turns: self.max_turns,
            reward: self.reward,
        }
    }

    pub fn load_pack(&self) -> Result<Arc<DomainPack>, RunConfigError> {
        match &self.pack {
            Some(dir) => DomainPack::load(dir).map(Arc::new).map_err(|source| RunConfigError::Pack {
                path: dir.clone(),
                source,
            }),
            None => Ok(DomainPack::bundled().shared()),
        }
    }

    /// Checks everything that can be checked before running; returns the pack.
    pub fn validate(&self) -> Result<Arc<DomainPack>, RunConfigError> {
        if self.episodes == 0 {
            return Err(RunConfigError::NoEpisodes);
        }
        let pack = self.load_pack()?;
        self.simulation().validate(&pack)?;
        Ok(pack)
    }
}

/// Recursive object merge; non-object values replace.
fn merge(base: &mut Value, layer: Value) {
    match (base, layer) {
        (Value::Object(base), Value::Object(layer)) => {
            for (k, v) in layer {
                match base.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        base.insert(k, v);
                    }
                }
            }
        }
        (base, layer) => *base = layer,
    }
}

fn set_pointer(doc: &mut Value, pointer: &str, value: Value) {
    let mut cur = doc;
    for key in pointer.trim_start_matches('/').split('/') {
        if !cur.is_object() {
            *cur = Value::Object(Default::default());
        }
        cur = cur
            .as_object_mut()
            .expect("just made an object")
            .entry(key.to_string())
            .or_insert(Value::Null);
    }
    *cur = value;
}
