//! Domain packs: schema, entity database and NLG templates bundled together.

use std::path::Path;
use std::sync::Arc;

use indexmap::IndexMap;
use thiserror::Error;

use crate::ontology::{self, Database, DomainSchema, Entity, OntologyError};
use crate::pipeline::templates::{TemplateEntry, TemplateError, TemplateTable, TEMPLATE_FILE};

pub const BUNDLED_SCHEMA: &str = include_str!("../packs/synthetic/schema.json");
pub const BUNDLED_DATABASE: &str = include_str!("../packs/synthetic/database.json");
pub const BUNDLED_TEMPLATES: &str = include_str!("../packs/synthetic/templates.json");
pub const BUNDLED_NAME: &str = "synthetic";

#[derive(Debug, Error)]
pub enum PackError {
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Templates(#[from] TemplateError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainPack {
    pub schemas: Vec<DomainSchema>,
    pub database: Database,
    pub templates: TemplateTable,
}

impl DomainPack {
    /// Loads and validates a pack directory (`schema.json`, `database.json`,
    /// `templates.json`).
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, PackError> {
        let dir = dir.as_ref();
        let (schemas, database) = ontology::load_domain_pack(dir)?;
        let templates = TemplateTable::load(dir.join(TEMPLATE_FILE))?;
        Self::assemble(schemas, database, templates)
    }

    pub fn from_json(schema: &str, database: &str, templates: &str) -> Result<Self, PackError> {
        let (schemas, database) = ontology::parse_domain_pack(schema, database)?;
        let entries: Vec<TemplateEntry> = serde_json::from_str(templates).map_err(|source| OntologyError::Json {
            path: TEMPLATE_FILE.into(),
            source,
        })?;
        Self::assemble(schemas, database, TemplateTable::new(entries)?)
    }

    fn assemble(schemas: Vec<DomainSchema>, database: Database, templates: TemplateTable) -> Result<Self, PackError> {
        templates.validate_against(&database)?;
        Ok(DomainPack {
            schemas,
            database,
            templates,
        })
    }

    /// The synthetic four-domain pack compiled into the binary.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_SCHEMA, BUNDLED_DATABASE, BUNDLED_TEMPLATES).expect("bundled pack is valid")
    }

    pub fn shared(self) -> Arc<Self> {
        Arc::new(self)
    }

    pub fn schema(&self, domain: &str) -> Option<&DomainSchema> {
        self.database.schema(domain)
    }

    pub fn query<I, K, V>(&self, domain: &str, constraints: I) -> Result<Vec<&Entity>, OntologyError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        self.database.query(domain, constraints)
    }

    /// The raw entity lists, in file order.
    pub fn entity_lists(&self) -> IndexMap<String, Vec<Entity>> {
        self.database
            .domain_names()
            .map(|d| (d.to_string(), self.database.entities(d).expect("listed").to_vec()))
            .collect()
    }
}
