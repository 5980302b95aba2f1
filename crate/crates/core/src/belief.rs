use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// What the system has tracked for one domain.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainBelief {
    #[serde(default)]
    pub constraints: BTreeMap<String, String>,
    #[serde(default)]
    pub requested: BTreeSet<String>,
    /// Key value of the entity last recommended for this domain, maintained
    /// by the policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recommended: Option<String>,
}

/// Per-domain user constraints and pending requests as tracked by the system.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefState {
    #[serde(default)]
    pub domains: BTreeMap<String, DomainBelief>,
    #[serde(default)]
    pub active_domain: Option<String>,
}

impl BeliefState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn domain(&self, name: &str) -> Option<&DomainBelief> {
        self.domains.get(name)
    }

    pub fn domain_mut(&mut self, name: &str) -> &mut DomainBelief {
        self.domains.entry(name.to_string()).or_default()
    }

    pub fn constraints(&self, domain: &str) -> BTreeMap<String, String> {
        self.domains
            .get(domain)
            .map(|d| d.constraints.clone())
            .unwrap_or_default()
    }

    pub fn is_empty(&self) -> bool {
        self.active_domain.is_none() && self.domains.values().all(|d| *d == DomainBelief::default())
    }
}
