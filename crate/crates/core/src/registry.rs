//! Component registry: the stage implementations and domain packs a live
//! session may be assembled from, loaded from a JSON file.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pack::{DomainPack, PackError, BUNDLED_NAME};
use crate::pipeline::{NoiseConfig, Stage};
use crate::session::{ConfigError, DstChoice, NlgChoice, NluChoice, PolicyChoice, SystemConfig};

pub const REGISTRY_ENV: &str = "DIALOGUE_FORGE_REGISTRY";

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("stage {stage}: {message}")]
    Stage { stage: Stage, message: String },
    #[error("pack {name:?}: {message}")]
    Pack { name: String, message: String },
    #[error("pack {name:?}: {source}")]
    PackLoad {
        name: String,
        #[source]
        source: PackError,
    },
}

/// One selectable implementation of a stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageOption {
    pub name: String,
    #[serde(default)]
    pub display_name: String,
    /// Built-in implementation: `pattern` or `none` for NLU, `rule` for
    /// DST and policy, `template` or `none` for NLG.
    pub implementation: String,
    #[serde(default = "empty_object")]
    pub config: serde_json::Value,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackOption {
    pub name: String,
    #[serde(default)]
    pub display_name: String,
    /// Directory holding schema.json, database.json and templates.json.
    /// Absent for the pack compiled into the binary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

/// The registry file's contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryFile {
    pub stages: BTreeMap<Stage, Vec<StageOption>>,
    pub packs: Vec<PackOption>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct NluOptionConfig {
    noise: NoiseConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PolicyOptionConfig {
    withheld_slots: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoConfig {}

/// A stage option resolved to what it configures.
#[derive(Debug, Clone, PartialEq)]
enum Resolved {
    Nlu(NluChoice, NoiseConfig),
    Dst(DstChoice),
    Policy(PolicyChoice, Vec<String>),
    Nlg(NlgChoice),
}

fn resolve_option(stage: Stage, option: &StageOption) -> Result<Resolved, String> {
    fn config<T: serde::de::DeserializeOwned>(value: &serde_json::Value) -> Result<T, String> {
        serde_json::from_value(value.clone()).map_err(|e| format!("bad config: {e}"))
    }
    let unknown = || format!("unknown implementation {:?} for option {:?}", option.implementation, option.name);
    match (stage, option.implementation.as_str()) {
        (Stage::Nlu, "pattern") => Ok(Resolved::Nlu(NluChoice::Pattern, config::<NluOptionConfig>(&option.config)?.noise)),
        (Stage::Nlu, "none") => config::<NoConfig>(&option.config).map(|_| Resolved::Nlu(NluChoice::None, NoiseConfig::default())),
        (Stage::Dst, "rule") => config::<NoConfig>(&option.config).map(|_| Resolved::Dst(DstChoice::Rule)),
        (Stage::Policy, "rule") => Ok(Resolved::Policy(
            PolicyChoice::Rule,
            config::<PolicyOptionConfig>(&option.config)?.withheld_slots,
        )),
        (Stage::Nlg, "template") => config::<NoConfig>(&option.config).map(|_| Resolved::Nlg(NlgChoice::Template)),
        (Stage::Nlg, "none") => config::<NoConfig>(&option.config).map(|_| Resolved::Nlg(NlgChoice::None)),
        _ => Err(unknown()),
    }
}

/// Stage and pack choices for one session; absent fields take the first
/// option listed in the registry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Selection {
    pub nlu: Option<String>,
    pub dst: Option<String>,
    pub policy: Option<String>,
    pub nlg: Option<String>,
    pub pack: Option<String>,
}

impl Selection {
    fn get(&self, stage: Stage) -> Option<&str> {
        match stage {
            Stage::Nlu => self.nlu.as_deref(),
            Stage::Dst => self.dst.as_deref(),
            Stage::Policy => self.policy.as_deref(),
            Stage::Nlg => self.nlg.as_deref(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("unknown {field} option {name:?}")]
    Unknown { field: String, name: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

impl SelectionError {
    /// The selection field at fault.
    pub fn field(&self) -> &str {
        match self {
            SelectionError::Unknown { field, .. } | SelectionError::Invalid { field, .. } => field,
        }
    }
}

/// The fully resolved selection a session is built from.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub names: BTreeMap<String, String>,
    pub pack: Arc<DomainPack>,
    pub system: SystemConfig,
}

/// A validated registry with its packs loaded.
#[derive(Debug, Clone)]
pub struct Registry {
    file: RegistryFile,
    resolved: BTreeMap<Stage, Vec<Resolved>>,
    packs: IndexMap<String, Arc<DomainPack>>,
}

impl Registry {
    /// Built-in registry listing every implementation and the bundled pack.
    pub fn builtin() -> Self {
        Registry::from_file(builtin_file(), Path::new(".")).expect("built-in registry is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: RegistryFile = serde_json::from_str(&text).map_err(|source| RegistryError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        Registry::from_file(file, path.parent().unwrap_or(Path::new(".")))
    }

    /// Validates every option and loads every pack. Relative pack paths are
    /// resolved against `base`.
    pub fn from_file(file: RegistryFile, base: &Path) -> Result<Self, RegistryError> {
        let mut resolved = BTreeMap::new();
        for stage in Stage::ALL {
            let options = file.stages.get(&stage).map(Vec::as_slice).unwrap_or_default();
            if options.is_empty() {
                return Err(RegistryError::Stage {
                    stage,
                    message: "no options listed".into(),
                });
            }
            let mut seen = HashSet::new();
            let mut list = Vec::with_capacity(options.len());
            for option in options {
                if !seen.insert(option.name.as_str()) {
                    return Err(RegistryError::Stage {
                        stage,
                        message: format!("duplicate option {:?}", option.name),
                    });
                }
                list.push(resolve_option(stage, option).map_err(|message| RegistryError::Stage { stage, message })?);
            }
            resolved.insert(stage, list);
        }
        if file.packs.is_empty() {
            return Err(RegistryError::Pack {
                name: String::new(),
                message: "no packs listed".into(),
            });
        }
        let mut packs = IndexMap::new();
        for option in &file.packs {
            let pack = match &option.path {
                None if option.name == BUNDLED_NAME => DomainPack::bundled(),
                None => {
                    return Err(RegistryError::Pack {
                        name: option.name.clone(),
                        message: "needs a path".into(),
                    })
                }
                Some(path) => DomainPack::load(base.join(path)).map_err(|source| RegistryError::PackLoad {
                    name: option.name.clone(),
                    source,
                })?,
            };
            if packs.insert(option.name.clone(), pack.shared()).is_some() {
                return Err(RegistryError::Pack {
                    name: option.name.clone(),
                    message: "listed twice".into(),
                });
            }
        }
        let registry = Registry { file, resolved, packs };
        // options must also make sense against every pack (e.g. withheld slots)
        for stage in Stage::ALL {
            for option in &registry.file.stages[&stage] {
                for pack in registry.packs.keys() {
                    let selection = selection_with(stage, &option.name, pack);
                    if let Err(e) = registry.assemble(&selection) {
                        if e.field() == stage.as_str() {
                            return Err(RegistryError::Stage {
                                stage,
                                message: format!("option {:?} with pack {pack:?}: {e}", option.name),
                            });
                        }
                    }
                }
            }
        }
        Ok(registry)
    }

    pub fn file(&self) -> &RegistryFile {
        &self.file
    }

    pub fn options(&self, stage: Stage) -> &[StageOption] {
        &self.file.stages[&stage]
    }

    pub fn pack(&self, name: &str) -> Option<&Arc<DomainPack>> {
        self.packs.get(name)
    }

    pub fn pack_names(&self) -> impl Iterator<Item = &str> {
        self.packs.keys().map(String::as_str)
    }

    /// Resolves a selection into a system configuration and pack.
    pub fn assemble(&self, selection: &Selection) -> Result<Assembly, SelectionError> {
        let mut system = SystemConfig::default();
        let mut names = BTreeMap::new();
        for stage in Stage::ALL {
            let options = &self.file.stages[&stage];
            let index = match selection.get(stage) {
                None => 0,
                Some(name) => options
                    .iter()
                    .position(|o| o.name == name)
                    .ok_or_else(|| SelectionError::Unknown {
                        field: stage.as_str().into(),
                        name: name.into(),
                    })?,
            };
            names.insert(stage.as_str().to_string(), options[index].name.clone());
            match self.resolved[&stage][index].clone() {
                Resolved::Nlu(choice, noise) => {
                    system.nlu = choice;
                    system.noise = noise;
                }
                Resolved::Dst(choice) => system.dst = choice,
                Resolved::Policy(choice, withheld) => {
                    system.policy = choice;
                    system.withheld_slots = withheld;
                }
                Resolved::Nlg(choice) => system.nlg = choice,
            }
        }
        let pack_name = selection
            .pack
            .clone()
            .unwrap_or_else(|| self.packs.keys().next().cloned().unwrap_or_default());
        let pack = self.packs.get(&pack_name).cloned().ok_or_else(|| SelectionError::Unknown {
            field: "pack".into(),
            name: pack_name.clone(),
        })?;
        names.insert("pack".into(), pack_name);
        system.validate(&pack).map_err(|e| {
            let field = match &e {
                ConfigError::Noise { .. } => "nlu",
                ConfigError::Invalid { field, .. } if field.contains("withheld") => "policy",
                ConfigError::Invalid { field, .. } if field.contains("dst") => "dst",
                ConfigError::Invalid { .. } => "nlu",
            };
            SelectionError::Invalid {
                field: field.into(),
                message: e.to_string(),
            }
        })?;
        Ok(Assembly { names, pack, system })
    }
}

fn selection_with(stage: Stage, name: &str, pack: &str) -> Selection {
    let mut s = Selection {
        pack: Some(pack.to_string()),
        ..Default::default()
    };
    let slot = match stage {
        Stage::Nlu => &mut s.nlu,
        Stage::Dst => &mut s.dst,
        Stage::Policy => &mut s.policy,
        Stage::Nlg => &mut s.nlg,
    };
    *slot = Some(name.to_string());
    s
}

fn option(name: &str, display: &str, implementation: &str, config: serde_json::Value) -> StageOption {
    StageOption {
        name: name.into(),
        display_name: display.into(),
        implementation: implementation.into(),
        config,
    }
}

pub fn builtin_file() -> RegistryFile {
    let none = empty_object;
    RegistryFile {
        stages: BTreeMap::from([
            (
                Stage::Nlu,
                vec![
                    option("pattern", "Template-inverse NLU", "pattern", none()),
                    option("none", "None (dialogue acts in)", "none", none()),
                ],
            ),
            (Stage::Dst, vec![option("rule", "Rule-based tracker", "rule", none())]),
            (
                Stage::Policy,
                vec![
                    option("rule", "Rule-based policy", "rule", none()),
                    option(
                        "rule-no-phone",
                        "Rule-based policy that never gives phone numbers",
                        "rule",
                        serde_json::json!({ "withheld_slots": ["Phone"] }),
                    ),
                ],
            ),
            (
                Stage::Nlg,
                vec![
                    option("template", "Template NLG", "template", none()),
                    option("none", "None (dialogue acts out)", "none", none()),
                ],
            ),
        ]),
        packs: vec![PackOption {
            name: BUNDLED_NAME.into(),
            display_name: "Synthetic four-domain pack".into(),
            path: None,
        }],
    }
}
