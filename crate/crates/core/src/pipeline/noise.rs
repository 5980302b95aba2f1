use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::act::{DialogueAct, NONE};
use crate::ontology::Database;

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("{name} must lie in [0, 1], got {value}")]
    Rate { name: &'static str, value: f64 },
    #[error("confusion target {target:?} for {domain} is not a known {kind}")]
    Target {
        domain: String,
        target: String,
        kind: &'static str,
    },
}

/// Controlled corruption of parsed acts, standing in for a statistical NLU's
/// errors. Targets are drawn uniformly from the per-domain lists, excluding
/// the act's current domain or slot.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub domain_confusion_rate: f64,
    pub slot_confusion_rate: f64,
    pub drop_rate: f64,
    /// Domain → domains it may be confused with. Missing entries mean
    /// "every other domain of the pack".
    pub domain_targets: BTreeMap<String, Vec<String>>,
    /// Domain → slots a slot of that domain may be confused with. Missing
    /// entries mean "every other slot of the domain".
    pub slot_targets: BTreeMap<String, Vec<String>>,
}

impl NoiseConfig {
    pub fn is_noiseless(&self) -> bool {
        self.domain_confusion_rate == 0.0 && self.slot_confusion_rate == 0.0 && self.drop_rate == 0.0
    }

    pub fn domain_confusion(rate: f64) -> Self {
        NoiseConfig {
            domain_confusion_rate: rate,
            ..Default::default()
        }
    }

    /// Validates rates and explicit targets, then fills in default targets
    /// from the database.
    pub fn resolve(&self, db: &Database) -> Result<NoiseConfig, NoiseError> {
        for (name, value) in [
            ("domain_confusion_rate", self.domain_confusion_rate),
            ("slot_confusion_rate", self.slot_confusion_rate),
            ("drop_rate", self.drop_rate),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(NoiseError::Rate { name, value });
            }
        }
        let mut resolved = self.clone();
        for (domain, targets) in &self.domain_targets {
            for target in targets {
                if db.schema(target).is_none() {
                    return Err(NoiseError::Target {
                        domain: domain.clone(),
                        target: target.clone(),
                        kind: "domain",
                    });
                }
            }
        }
        for (domain, targets) in &self.slot_targets {
            let schema = db.schema(domain).ok_or_else(|| NoiseError::Target {
                domain: domain.clone(),
                target: domain.clone(),
                kind: "domain",
            })?;
            for target in targets {
                if !schema.has_slot(target) {
                    return Err(NoiseError::Target {
                        domain: domain.clone(),
                        target: target.clone(),
                        kind: "slot",
                    });
                }
            }
        }
        for schema in db.schemas() {
            resolved
                .domain_targets
                .entry(schema.name.clone())
                .or_insert_with(|| db.domain_names().filter(|d| *d != schema.name).map(str::to_string).collect());
            resolved
                .slot_targets
                .entry(schema.name.clone())
                .or_insert_with(|| schema.all_slots().into_iter().map(str::to_string).collect());
        }
        Ok(resolved)
    }
}

fn pick<'a, R: Rng + ?Sized>(rng: &mut R, targets: Option<&'a Vec<String>>, current: &str) -> Option<&'a String> {
    let candidates: Vec<&String> = targets?.iter().filter(|t| t.as_str() != current).collect();
    candidates.choose(rng).copied()
}

/// Per act: drop with `drop_rate`; otherwise re-domain with
/// `domain_confusion_rate`; otherwise re-slot with `slot_confusion_rate`.
/// Greet and Bye have no domain or slot and are only subject to dropping.
pub fn corrupt_acts<R: Rng + ?Sized>(acts: &[DialogueAct], noise: &NoiseConfig, rng: &mut R) -> Vec<DialogueAct> {
    if noise.is_noiseless() {
        return acts.to_vec();
    }
    let mut out = Vec::with_capacity(acts.len());
    for act in acts {
        if rng.gen_bool(noise.drop_rate) {
            continue;
        }
        if act.has_domain() && rng.gen_bool(noise.domain_confusion_rate) {
            if let Some(target) = pick(rng, noise.domain_targets.get(act.domain()), act.domain()) {
                out.push(act.with_domain(target).unwrap_or_else(|_| act.clone()));
                continue;
            }
        }
        if act.slot() != NONE && rng.gen_bool(noise.slot_confusion_rate) {
            if let Some(target) = pick(rng, noise.slot_targets.get(act.domain()), act.slot()) {
                out.push(act.with_slot(target).unwrap_or_else(|_| act.clone()));
                continue;
            }
        }
        out.push(act.clone());
    }
    out
}
