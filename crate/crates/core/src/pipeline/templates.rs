//! Template NLG and its exact inverse, the pattern NLU.
//!
//! Each (side, intent, domain, slot) has one template with at most one
//! `{value}` placeholder. Acts render to fixed phrases joined by `; `, and the
//! NLU recovers them by matching each segment against the same table.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::act::{DialogueAct, Intent, DONTCARE, NONE, REQUESTED};
use crate::dialogue::Speaker;
use crate::ontology::{read_json, Database, OntologyError};

pub const TEMPLATE_FILE: &str = "templates.json";
pub const PLACEHOLDER: &str = "{value}";
pub const SEGMENT_JOINER: &str = "; ";

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("no {side} template for {intent}-{domain}-{slot}")]
    Missing {
        side: Speaker,
        intent: Intent,
        domain: String,
        slot: String,
    },
    #[error("duplicate {side} template for {intent}-{domain}-{slot}")]
    Duplicate {
        side: Speaker,
        intent: Intent,
        domain: String,
        slot: String,
    },
    #[error("invalid template {template:?}: {reason}")]
    Invalid { template: String, reason: String },
    #[error("{side} templates are ambiguous: {rendered:?} parses as {parsed:?}, expected {expected}")]
    Ambiguous {
        side: Speaker,
        rendered: String,
        parsed: Vec<String>,
        expected: String,
    },
    #[error(transparent)]
    Load(#[from] OntologyError),
}

/// One row of `templates.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateEntry {
    pub side: Speaker,
    pub intent: Intent,
    pub domain: String,
    pub slot: String,
    pub template: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Pattern {
    intent: Intent,
    domain: String,
    slot: String,
    prefix: String,
    /// Present iff the template has a `{value}` placeholder.
    suffix: Option<String>,
}

impl Pattern {
    fn compile(entry: &TemplateEntry) -> Result<Self, TemplateError> {
        let invalid = |reason: &str| TemplateError::Invalid {
            template: entry.template.clone(),
            reason: reason.to_string(),
        };
        if entry.template.is_empty() {
            return Err(invalid("empty template"));
        }
        if entry.template.contains(SEGMENT_JOINER) {
            return Err(invalid("contains the segment joiner"));
        }
        let mut parts = entry.template.splitn(2, PLACEHOLDER);
        let prefix = parts.next().unwrap_or_default().to_string();
        let suffix = parts.next().map(str::to_string);
        if suffix.as_deref().is_some_and(|s| s.contains(PLACEHOLDER)) {
            return Err(invalid("more than one placeholder"));
        }
        let takes_value = matches!(entry.intent, Intent::Inform | Intent::Recommend);
        if takes_value != suffix.is_some() {
            return Err(invalid(if takes_value {
                "inform and recommend templates need a {value} placeholder"
            } else {
                "only inform and recommend templates take a {value} placeholder"
            }));
        }
        // validates the act shape once, with a dummy value
        let probe = if takes_value { "x" } else { fixed_value(entry.intent) };
        DialogueAct::new(entry.intent, entry.domain.as_str(), entry.slot.as_str(), probe)
            .map_err(|e| invalid(&e.to_string()))?;
        Ok(Pattern {
            intent: entry.intent,
            domain: entry.domain.clone(),
            slot: entry.slot.clone(),
            prefix,
            suffix,
        })
    }

    fn render(&self, value: &str) -> String {
        match &self.suffix {
            Some(suffix) => format!("{}{}{}", self.prefix, value, suffix),
            None => self.prefix.clone(),
        }
    }

    fn parse(&self, segment: &str) -> Option<DialogueAct> {
        let value = match &self.suffix {
            None => {
                if segment != self.prefix {
                    return None;
                }
                fixed_value(self.intent)
            }
            Some(suffix) => {
                if segment.len() <= self.prefix.len() + suffix.len()
                    || !segment.starts_with(&self.prefix)
                    || !segment.ends_with(suffix.as_str())
                {
                    return None;
                }
                &segment[self.prefix.len()..segment.len() - suffix.len()]
            }
        };
        DialogueAct::new(self.intent, self.domain.as_str(), self.slot.as_str(), value).ok()
    }
}

fn fixed_value(intent: Intent) -> &'static str {
    if intent == Intent::Request {
        REQUESTED
    } else {
        NONE
    }
}

type TemplateKey = (Intent, String, String);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct SideTable {
    patterns: Vec<Pattern>,
    index: HashMap<TemplateKey, usize>,
}

/// Both sides' templates, compiled for rendering and inverse parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateTable {
    entries: Vec<TemplateEntry>,
    sides: BTreeMap<Speaker, SideTable>,
}

impl TemplateTable {
    pub fn new(entries: Vec<TemplateEntry>) -> Result<Self, TemplateError> {
        let mut sides: BTreeMap<Speaker, SideTable> = BTreeMap::new();
        for entry in &entries {
            let pattern = Pattern::compile(entry)?;
            let table = sides.entry(entry.side).or_default();
            let key = (entry.intent, entry.domain.clone(), entry.slot.clone());
            if table.index.contains_key(&key) {
                return Err(TemplateError::Duplicate {
                    side: entry.side,
                    intent: entry.intent,
                    domain: entry.domain.clone(),
                    slot: entry.slot.clone(),
                });
            }
            table.index.insert(key, table.patterns.len());
            table.patterns.push(pattern);
        }
        Ok(TemplateTable { entries, sides })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TemplateError> {
        let entries: Vec<TemplateEntry> = read_json(path.as_ref())?;
        Self::new(entries)
    }

    pub fn entries(&self) -> &[TemplateEntry] {
        &self.entries
    }

    fn pattern(&self, side: Speaker, act: &DialogueAct) -> Option<&Pattern> {
        let table = self.sides.get(&side)?;
        let key = (act.intent(), act.domain().to_string(), act.slot().to_string());
        table.index.get(&key).map(|&i| &table.patterns[i])
    }

    pub fn has_template(&self, side: Speaker, intent: Intent, domain: &str, slot: &str) -> bool {
        self.sides
            .get(&side)
            .is_some_and(|t| t.index.contains_key(&(intent, domain.to_string(), slot.to_string())))
    }

    /// Renders each act with its template and joins the phrases with `; `.
    pub fn generate(&self, acts: &[DialogueAct], side: Speaker) -> Result<String, TemplateError> {
        let mut phrases = Vec::with_capacity(acts.len());
        for act in acts {
            let pattern = self.pattern(side, act).ok_or_else(|| TemplateError::Missing {
                side,
                intent: act.intent(),
                domain: act.domain().to_string(),
                slot: act.slot().to_string(),
            })?;
            phrases.push(pattern.render(act.value()));
        }
        Ok(phrases.join(SEGMENT_JOINER))
    }

    /// Inverse of [`TemplateTable::generate`]. Segments that match no
    /// template contribute nothing.
    pub fn parse(&self, utterance: &str, side: Speaker) -> Vec<DialogueAct> {
        let Some(table) = self.sides.get(&side) else {
            return Vec::new();
        };
        if utterance.is_empty() {
            return Vec::new();
        }
        utterance
            .split(SEGMENT_JOINER)
            .filter_map(|segment| table.patterns.iter().find_map(|p| p.parse(segment)))
            .collect()
    }

    /// Checks that the table covers every act the rule pipeline can produce
    /// over `db`, and that every rendering parses back to exactly its act.
    pub fn validate_against(&self, db: &Database) -> Result<(), TemplateError> {
        for (side, act) in required_acts(db) {
            let Some(pattern) = self.pattern(side, &act) else {
                return Err(TemplateError::Missing {
                    side,
                    intent: act.intent(),
                    domain: act.domain().to_string(),
                    slot: act.slot().to_string(),
                });
            };
            let values: Vec<String> = if pattern.suffix.is_some() {
                fill_values(db, act.domain(), act.slot())
            } else {
                vec![act.value().to_string()]
            };
            for value in values {
                let expected = DialogueAct::new(act.intent(), act.domain(), act.slot(), value.as_str())
                    .map_err(|e| TemplateError::Invalid {
                        template: pattern.render(&value),
                        reason: e.to_string(),
                    })?;
                let rendered = pattern.render(&value);
                let parsed = self.parse(&rendered, side);
                if parsed != [expected.clone()] {
                    return Err(TemplateError::Ambiguous {
                        side,
                        rendered,
                        parsed: parsed.iter().map(ToString::to_string).collect(),
                        expected: expected.to_string(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Values a template slot can be filled with: the vocabulary plus
/// `dontcare` for informable slots, entity values otherwise.
pub(crate) fn fill_values(db: &Database, domain: &str, slot: &str) -> Vec<String> {
    let Some(schema) = db.schema(domain) else {
        return Vec::new();
    };
    let mut values: Vec<String> = match schema.informable_slots.get(slot) {
        Some(vocab) => vocab.iter().cloned().chain([DONTCARE.to_string()]).collect(),
        None => db
            .entities(domain)
            .map(|rows| rows.iter().filter_map(|e| e.get(slot).cloned()).collect())
            .unwrap_or_default(),
    };
    values.sort();
    values.dedup();
    values
}

/// Acts (with placeholder values) the pipeline may need to render.
fn required_acts(db: &Database) -> Vec<(Speaker, DialogueAct)> {
    let mut acts = vec![
        (Speaker::User, DialogueAct::greet()),
        (Speaker::User, DialogueAct::bye()),
        (Speaker::System, DialogueAct::greet()),
        (Speaker::System, DialogueAct::bye()),
    ];
    let probe = |intent, domain: &str, slot: &str| {
        let value = match intent {
            Intent::Request => REQUESTED,
            Intent::NoOffer => NONE,
            _ => "x",
        };
        DialogueAct::new(intent, domain, slot, value).expect("schema tokens are valid")
    };
    for schema in db.schemas() {
        let d = schema.name.as_str();
        for slot in schema.informable_slots.keys() {
            acts.push((Speaker::User, probe(Intent::Inform, d, slot)));
            acts.push((Speaker::System, probe(Intent::Request, d, slot)));
        }
        for slot in &schema.requestable_slots {
            acts.push((Speaker::User, probe(Intent::Request, d, slot)));
        }
        for slot in schema.all_slots() {
            acts.push((Speaker::System, probe(Intent::Inform, d, slot)));
        }
        acts.push((Speaker::System, probe(Intent::Recommend, d, &schema.key_slot)));
        acts.push((Speaker::System, probe(Intent::NoOffer, d, NONE)));
    }
    acts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pack::DomainPack;

    fn act(s: &str) -> DialogueAct {
        s.parse().unwrap()
    }

    #[test]
    fn renders_reference_phrases() {
        let pack = DomainPack::bundled();
        let t = &pack.templates;
        assert_eq!(
            t.generate(&[act("Request-Hotel-Phone-?")], Speaker::User).unwrap(),
            "What is the phone number of the hotel?"
        );
        assert_eq!(
            t.generate(&[act("Inform-Hotel-Parking-yes")], Speaker::System).unwrap(),
            "The hotel has parking: yes."
        );
        assert_eq!(t.generate(&[DialogueAct::bye()], Speaker::System).unwrap(), "Goodbye.");
        assert_eq!(
            t.generate(&[act("Inform-Hotel-Area-north")], Speaker::User).unwrap(),
            "I want a hotel in the north"
        );
    }

    #[test]
    fn parses_reference_phrases() {
        let pack = DomainPack::bundled();
        let t = &pack.templates;
        assert_eq!(
            t.parse("What is the phone number of the hotel?", Speaker::User),
            vec![act("Request-Hotel-Phone-?")]
        );
        assert_eq!(t.parse("blorp qux", Speaker::User), vec![]);
        assert_eq!(t.parse("", Speaker::System), vec![]);
        // unknown segments drop out, known ones survive
        assert_eq!(
            t.parse("blorp; Goodbye.", Speaker::User),
            vec![DialogueAct::bye()]
        );
    }

    #[test]
    fn missing_template_is_an_error() {
        let pack = DomainPack::bundled();
        let err = pack
            .templates
            .generate(&[act("Recommend-Hotel-Parking-yes")], Speaker::System)
            .unwrap_err();
        assert!(matches!(err, TemplateError::Missing { .. }));
    }

    #[test]
    fn rejects_bad_tables() {
        let entry = |intent, template: &str| TemplateEntry {
            side: Speaker::User,
            intent,
            domain: "Hotel".into(),
            slot: "Area".into(),
            template: template.into(),
        };
        assert!(TemplateTable::new(vec![entry(Intent::Inform, "no placeholder")]).is_err());
        assert!(TemplateTable::new(vec![entry(Intent::Inform, "{value} and {value}")]).is_err());
        assert!(TemplateTable::new(vec![entry(Intent::Request, "where {value}?")]).is_err());
        assert!(matches!(
            TemplateTable::new(vec![entry(Intent::Inform, "a {value}"), entry(Intent::Inform, "b {value}")]),
            Err(TemplateError::Duplicate { .. })
        ));
    }

    #[test]
    fn ambiguous_tables_fail_validation() {
        let pack = DomainPack::bundled();
        let mut entries = pack.templates.entries().to_vec();
        // make Hotel Parking render exactly like Hotel Internet
        for e in entries.iter_mut() {
            if e.side == Speaker::User && e.intent == Intent::Inform && e.domain == "Hotel" && e.slot == "Parking" {
                e.template = "I want a hotel with internet: {value}".into();
            }
        }
        let table = TemplateTable::new(entries).unwrap();
        assert!(matches!(
            table.validate_against(&pack.database),
            Err(TemplateError::Ambiguous { .. })
        ));
    }
}
