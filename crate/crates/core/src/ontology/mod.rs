//! Domain schemas, the entity database, and user-goal generation.

mod goal;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::act::{DONTCARE, NONE, REQUESTED};

pub use goal::{generate_goal, Dependency, GoalConfig, SubGoal, UserGoal};

pub const SCHEMA_FILE: &str = "schema.json";
pub const DATABASE_FILE: &str = "database.json";

/// An entity row: slot name to value, in file order.
pub type Entity = IndexMap<String, String>;

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("schema violation in domain {domain}{}: {message}", location(.slot, .entity))]
    SchemaViolation {
        domain: String,
        slot: Option<String>,
        entity: Option<usize>,
        message: String,
    },
    #[error("unknown domain {0:?}")]
    UnknownDomain(String),
    #[error("unknown slot {slot:?} in domain {domain}")]
    UnknownSlot { domain: String, slot: String },
    #[error("no {domain} entity has {slot}={value:?}")]
    UnsatisfiableDependency {
        domain: String,
        slot: String,
        value: String,
    },
    #[error("domain {0} has no entities")]
    EmptyDomain(String),
}

fn location(slot: &Option<String>, entity: &Option<usize>) -> String {
    let mut out = String::new();
    if let Some(index) = entity {
        out.push_str(&format!(", entity #{index}"));
    }
    if let Some(slot) = slot {
        out.push_str(&format!(", slot {slot}"));
    }
    out
}

fn violation(domain: &str, slot: Option<&str>, entity: Option<usize>, message: impl Into<String>) -> OntologyError {
    OntologyError::SchemaViolation {
        domain: domain.to_string(),
        slot: slot.map(str::to_string),
        entity,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSchema {
    pub name: String,
    /// Slots the user may constrain, each with its finite vocabulary.
    pub informable_slots: IndexMap<String, Vec<String>>,
    pub requestable_slots: Vec<String>,
    pub key_slot: String,
}

impl DomainSchema {
    pub fn is_informable(&self, slot: &str) -> bool {
        self.informable_slots.contains_key(slot)
    }

    pub fn is_requestable(&self, slot: &str) -> bool {
        self.requestable_slots.iter().any(|s| s == slot)
    }

    pub fn has_slot(&self, slot: &str) -> bool {
        self.is_informable(slot) || self.is_requestable(slot)
    }

    /// Informable slots first, then requestable ones not already listed.
    pub fn all_slots(&self) -> Vec<&str> {
        let mut slots: Vec<&str> = self.informable_slots.keys().map(String::as_str).collect();
        for slot in &self.requestable_slots {
            if !slots.contains(&slot.as_str()) {
                slots.push(slot);
            }
        }
        slots
    }

    /// Whether `value` may be used as a constraint on an informable slot.
    pub fn accepts_value(&self, slot: &str, value: &str) -> bool {
        value == DONTCARE
            || self
                .informable_slots
                .get(slot)
                .is_some_and(|vocab| vocab.iter().any(|v| v == value))
    }

    fn validate(&self) -> Result<(), OntologyError> {
        check_token(&self.name, &self.name, None)?;
        if self.informable_slots.is_empty() && self.requestable_slots.is_empty() {
            return Err(violation(&self.name, None, None, "domain declares no slots"));
        }
        for (slot, vocab) in &self.informable_slots {
            check_token(&self.name, slot, Some(slot))?;
            if vocab.is_empty() {
                return Err(violation(&self.name, Some(slot), None, "empty vocabulary"));
            }
            for value in vocab {
                check_token(&self.name, value, Some(slot))?;
            }
        }
        for slot in &self.requestable_slots {
            check_token(&self.name, slot, Some(slot))?;
        }
        if !self.has_slot(&self.key_slot) {
            return Err(violation(
                &self.name,
                Some(&self.key_slot),
                None,
                "key slot is neither informable nor requestable",
            ));
        }
        Ok(())
    }
}

/// Domain names, slot names and values must survive the act encoding and the
/// `; ` joiner of generated utterances.
fn check_token(domain: &str, token: &str, slot: Option<&str>) -> Result<(), OntologyError> {
    let bad = token.is_empty()
        || token.contains('-')
        || token.contains("; ")
        || token == NONE
        || token == REQUESTED
        || token == DONTCARE;
    if bad {
        return Err(violation(domain, slot, None, format!("illegal token {token:?}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainTable {
    pub schema: DomainSchema,
    pub entities: Vec<Entity>,
}

/// Entities per domain, in file order. Every table carries its schema so
/// queries can reject unknown slots.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Database {
    tables: IndexMap<String, DomainTable>,
}

impl Database {
    pub fn from_parts(
        schemas: &[DomainSchema],
        mut entities: IndexMap<String, Vec<Entity>>,
    ) -> Result<Self, OntologyError> {
        let mut seen = HashSet::new();
        for schema in schemas {
            schema.validate()?;
            if !seen.insert(schema.name.clone()) {
                return Err(violation(&schema.name, None, None, "duplicate domain"));
            }
        }
        if let Some(unknown) = entities.keys().find(|d| !seen.contains(*d)) {
            return Err(violation(unknown, None, None, "database domain missing from schema"));
        }
        let mut tables = IndexMap::new();
        for schema in schemas {
            let rows = entities.shift_remove(&schema.name).unwrap_or_default();
            validate_entities(schema, &rows)?;
            tables.insert(
                schema.name.clone(),
                DomainTable {
                    schema: schema.clone(),
                    entities: rows,
                },
            );
        }
        Ok(Database { tables })
    }

    pub fn schemas(&self) -> impl Iterator<Item = &DomainSchema> {
        self.tables.values().map(|t| &t.schema)
    }

    pub fn schema(&self, domain: &str) -> Option<&DomainSchema> {
        self.tables.get(domain).map(|t| &t.schema)
    }

    pub fn domain_names(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }

    pub fn entities(&self, domain: &str) -> Result<&[Entity], OntologyError> {
        self.tables
            .get(domain)
            .map(|t| t.entities.as_slice())
            .ok_or_else(|| OntologyError::UnknownDomain(domain.to_string()))
    }

    /// Entities of `domain` matching every constraint by string equality;
    /// `dontcare` matches anything. Results keep database order.
    pub fn query<I, K, V>(&self, domain: &str, constraints: I) -> Result<Vec<&Entity>, OntologyError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let table = self
            .tables
            .get(domain)
            .ok_or_else(|| OntologyError::UnknownDomain(domain.to_string()))?;
        let mut filters = Vec::new();
        for (slot, value) in constraints {
            let (slot, value) = (slot.as_ref(), value.as_ref());
            if !table.schema.is_informable(slot) {
                return Err(OntologyError::UnknownSlot {
                    domain: domain.to_string(),
                    slot: slot.to_string(),
                });
            }
            if value != DONTCARE {
                filters.push((slot.to_string(), value.to_string()));
            }
        }
        Ok(table
            .entities
            .iter()
            .filter(|e| filters.iter().all(|(s, v)| e.get(s) == Some(v)))
            .collect())
    }
}

fn validate_entities(schema: &DomainSchema, rows: &[Entity]) -> Result<(), OntologyError> {
    let slots = schema.all_slots();
    let mut keys = HashSet::new();
    for (index, entity) in rows.iter().enumerate() {
        for slot in &slots {
            let Some(value) = entity.get(*slot) else {
                return Err(violation(&schema.name, Some(slot), Some(index), "entity is missing a declared slot"));
            };
            check_token(&schema.name, value, Some(slot)).map_err(|_| {
                violation(&schema.name, Some(slot), Some(index), format!("illegal value {value:?}"))
            })?;
            if let Some(vocab) = schema.informable_slots.get(*slot) {
                if !vocab.contains(value) {
                    return Err(violation(
                        &schema.name,
                        Some(slot),
                        Some(index),
                        format!("value {value:?} outside the declared vocabulary"),
                    ));
                }
            }
        }
        if let Some(extra) = entity.keys().find(|k| !slots.contains(&k.as_str())) {
            return Err(violation(&schema.name, Some(extra), Some(index), "undeclared slot"));
        }
        if !keys.insert(entity[&schema.key_slot].clone()) {
            return Err(violation(&schema.name, Some(&schema.key_slot), Some(index), "duplicate key value"));
        }
    }
    Ok(())
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, OntologyError> {
    let text = fs::read_to_string(path).map_err(|source| OntologyError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| OntologyError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads `schema.json` and `database.json` from a pack directory.
pub fn load_domain_pack(dir: impl AsRef<Path>) -> Result<(Vec<DomainSchema>, Database), OntologyError> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(OntologyError::Io {
            path: dir.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "pack directory not found"),
        });
    }
    let schemas: Vec<DomainSchema> = read_json(&dir.join(SCHEMA_FILE))?;
    let entities: IndexMap<String, Vec<Entity>> = read_json(&dir.join(DATABASE_FILE))?;
    let db = Database::from_parts(&schemas, entities)?;
    Ok((schemas, db))
}

pub fn parse_domain_pack(schema_json: &str, database_json: &str) -> Result<(Vec<DomainSchema>, Database), OntologyError> {
    let schemas: Vec<DomainSchema> = serde_json::from_str(schema_json).map_err(|source| OntologyError::Json {
        path: PathBuf::from(SCHEMA_FILE),
        source,
    })?;
    let entities: IndexMap<String, Vec<Entity>> =
        serde_json::from_str(database_json).map_err(|source| OntologyError::Json {
            path: PathBuf::from(DATABASE_FILE),
            source,
        })?;
    let db = Database::from_parts(&schemas, entities)?;
    Ok((schemas, db))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pack::{BUNDLED_DATABASE, BUNDLED_SCHEMA};
    use std::collections::BTreeMap;

    fn bundled() -> (Vec<DomainSchema>, Database) {
        parse_domain_pack(BUNDLED_SCHEMA, BUNDLED_DATABASE).unwrap()
    }

    #[test]
    fn bundled_pack_has_four_domains() {
        let (schemas, db) = bundled();
        let names: Vec<&str> = schemas.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["Hotel", "Restaurant", "Attraction", "Hospital"]);
        for name in names {
            assert_eq!(db.entities(name).unwrap().len(), 20);
        }
        let hotel = db.schema("Hotel").unwrap();
        assert_eq!(
            hotel.informable_slots.keys().collect::<Vec<_>>(),
            ["Area", "Parking", "Internet", "Stars", "Price"]
        );
        assert_eq!(hotel.requestable_slots, ["Phone", "Post", "Addr", "Name"]);
    }

    #[test]
    fn load_is_deterministic() {
        assert_eq!(bundled(), bundled());
    }

    #[test]
    fn missing_slot_is_a_violation() {
        let mut db: serde_json::Value = serde_json::from_str(BUNDLED_DATABASE).unwrap();
        db["Hotel"][3].as_object_mut().unwrap().remove("Phone");
        let err = parse_domain_pack(BUNDLED_SCHEMA, &db.to_string()).unwrap_err();
        match err {
            OntologyError::SchemaViolation { domain, slot, entity, .. } => {
                assert_eq!(domain, "Hotel");
                assert_eq!(slot.as_deref(), Some("Phone"));
                assert_eq!(entity, Some(3));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn out_of_vocabulary_and_duplicate_keys_are_violations() {
        let mut db: serde_json::Value = serde_json::from_str(BUNDLED_DATABASE).unwrap();
        db["Hotel"][0]["Parking"] = "maybe".into();
        assert!(matches!(
            parse_domain_pack(BUNDLED_SCHEMA, &db.to_string()),
            Err(OntologyError::SchemaViolation { .. })
        ));
        let mut db: serde_json::Value = serde_json::from_str(BUNDLED_DATABASE).unwrap();
        db["Hotel"][1]["Name"] = db["Hotel"][0]["Name"].clone();
        assert!(matches!(
            parse_domain_pack(BUNDLED_SCHEMA, &db.to_string()),
            Err(OntologyError::SchemaViolation { .. })
        ));
    }

    #[test]
    fn missing_directory_is_io_error() {
        assert!(matches!(
            load_domain_pack("/nonexistent/pack"),
            Err(OntologyError::Io { .. })
        ));
    }

    #[test]
    fn query_semantics() {
        let (_, db) = bundled();
        let all = db.query("Hotel", BTreeMap::<String, String>::new()).unwrap();
        assert_eq!(all.len(), 20);
        let wildcard = db.query("Hotel", [("Area", "dontcare")]).unwrap();
        assert_eq!(wildcard, all);
        assert!(matches!(
            db.query("Spa", [("Area", "north")]),
            Err(OntologyError::UnknownDomain(_))
        ));
        assert!(matches!(
            db.query("Hotel", [("Phone", "x")]),
            Err(OntologyError::UnknownSlot { .. })
        ));
    }
}
