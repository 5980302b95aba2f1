//! Dialogue acts: the intent–domain–slot–value unit exchanged between agents.
//!
//! The canonical text form joins the four fields with `-`, for example
//! `Request-Hotel-Post-?`. Because `-` is the separator it is rejected inside
//! any field at construction time, which keeps the encoding unambiguous.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

/// Placeholder used for the slot and value of acts that carry neither.
pub const NONE: &str = "none";
/// Value carried by every request act.
pub const REQUESTED: &str = "?";
/// Wildcard constraint value that matches any entity.
pub const DONTCARE: &str = "dontcare";

const SEPARATOR: char = '-';

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActError {
    #[error("malformed dialogue act {input:?}: {reason}")]
    Malformed { input: String, reason: String },
    #[error("unknown intent {0:?}")]
    UnknownIntent(String),
}

impl ActError {
    fn malformed(input: impl Into<String>, reason: impl Into<String>) -> Self {
        ActError::Malformed {
            input: input.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Intent {
    Inform,
    Request,
    Recommend,
    NoOffer,
    Greet,
    Bye,
}

impl Intent {
    pub const ALL: [Intent; 6] = [
        Intent::Inform,
        Intent::Request,
        Intent::Recommend,
        Intent::NoOffer,
        Intent::Greet,
        Intent::Bye,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Intent::Inform => "Inform",
            Intent::Request => "Request",
            Intent::Recommend => "Recommend",
            Intent::NoOffer => "NoOffer",
            Intent::Greet => "Greet",
            Intent::Bye => "Bye",
        }
    }

    /// Greet and Bye carry no slot or value.
    pub fn is_general(self) -> bool {
        matches!(self, Intent::Greet | Intent::Bye)
    }

    /// Intents that convey an entity attribute to the listener.
    pub fn is_inform_like(self) -> bool {
        matches!(self, Intent::Inform | Intent::Recommend)
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Intent {
    type Err = ActError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Intent::ALL
            .into_iter()
            .find(|intent| intent.as_str() == s)
            .ok_or_else(|| ActError::UnknownIntent(s.to_string()))
    }
}

/// A validated dialogue act. Fields are private so the invariants checked in
/// [`DialogueAct::new`] hold for every value in the program.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DialogueAct {
    intent: Intent,
    domain: String,
    slot: String,
    value: String,
}

impl DialogueAct {
    pub fn new(
        intent: Intent,
        domain: impl Into<String>,
        slot: impl Into<String>,
        value: impl Into<String>,
    ) -> Result<Self, ActError> {
        let act = DialogueAct {
            intent,
            domain: domain.into(),
            slot: slot.into(),
            value: value.into(),
        };
        act.validate()?;
        Ok(act)
    }

    pub fn inform(domain: &str, slot: &str, value: &str) -> Result<Self, ActError> {
        Self::new(Intent::Inform, domain, slot, value)
    }

    pub fn request(domain: &str, slot: &str) -> Result<Self, ActError> {
        Self::new(Intent::Request, domain, slot, REQUESTED)
    }

    pub fn recommend(domain: &str, slot: &str, value: &str) -> Result<Self, ActError> {
        Self::new(Intent::Recommend, domain, slot, value)
    }

    pub fn no_offer(domain: &str) -> Result<Self, ActError> {
        Self::new(Intent::NoOffer, domain, NONE, NONE)
    }

    pub fn greet() -> Self {
        Self::general(Intent::Greet)
    }

    pub fn bye() -> Self {
        Self::general(Intent::Bye)
    }

    fn general(intent: Intent) -> Self {
        DialogueAct {
            intent,
            domain: NONE.to_string(),
            slot: NONE.to_string(),
            value: NONE.to_string(),
        }
    }

    fn validate(&self) -> Result<(), ActError> {
        for (field, text) in [
            ("domain", &self.domain),
            ("slot", &self.slot),
            ("value", &self.value),
        ] {
            if text.is_empty() {
                return Err(ActError::malformed(self.encode(), format!("empty {field}")));
            }
            if text.contains(SEPARATOR) {
                return Err(ActError::malformed(
                    self.encode(),
                    format!("{field} contains the '-' separator"),
                ));
            }
        }
        if self.intent == Intent::Request && self.value != REQUESTED {
            return Err(ActError::malformed(self.encode(), "request value must be '?'"));
        }
        if self.intent != Intent::Request && self.value == REQUESTED {
            return Err(ActError::malformed(self.encode(), "'?' is reserved for requests"));
        }
        if self.intent.is_general() && (self.slot != NONE || self.value != NONE) {
            return Err(ActError::malformed(
                self.encode(),
                "greet and bye take slot and value 'none'",
            ));
        }
        Ok(())
    }

    pub fn intent(&self) -> Intent {
        self.intent
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn slot(&self) -> &str {
        &self.slot
    }

    pub fn value(&self) -> &str {
        &self.value
    }

    /// True when the act is tied to a concrete domain.
    pub fn has_domain(&self) -> bool {
        self.domain != NONE
    }

    /// `Intent-Domain-Slot`, the value-free pattern used by audit tables.
    pub fn pattern(&self) -> String {
        format!("{}-{}-{}", self.intent, self.domain, self.slot)
    }

    pub fn with_domain(&self, domain: &str) -> Result<Self, ActError> {
        Self::new(self.intent, domain, self.slot.clone(), self.value.clone())
    }

    pub fn with_slot(&self, slot: &str) -> Result<Self, ActError> {
        Self::new(self.intent, self.domain.clone(), slot, self.value.clone())
    }

    fn encode(&self) -> String {
        format!(
            "{}-{}-{}-{}",
            self.intent, self.domain, self.slot, self.value
        )
    }
}

/// Parses the hyphen-joined form. Missing trailing segments default to
/// `none` (or `?` for a request value).
pub fn parse_act_string(s: &str) -> Result<DialogueAct, ActError> {
    if s.is_empty() {
        return Err(ActError::malformed(s, "empty string"));
    }
    let parts: Vec<&str> = s.splitn(4, SEPARATOR).collect();
    if parts.len() < 2 {
        return Err(ActError::malformed(s, "expected at least intent and domain"));
    }
    let intent: Intent = parts[0].parse()?;
    let slot = parts.get(2).copied().unwrap_or(NONE);
    let default_value = if intent == Intent::Request { REQUESTED } else { NONE };
    let value = parts.get(3).copied().unwrap_or(default_value);
    DialogueAct::new(intent, parts[1], slot, value)
}

pub fn format_act_string(act: &DialogueAct) -> String {
    act.encode()
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

impl FromStr for DialogueAct {
    type Err = ActError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_act_string(s)
    }
}

impl Serialize for DialogueAct {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.encode())
    }
}

// Accepts either "Inform-Hotel-Area-north" or ["Inform", "Hotel", "Area", "north"].
impl<'de> Deserialize<'de> for DialogueAct {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ActVisitor;

        impl<'de> Visitor<'de> for ActVisitor {
            type Value = DialogueAct;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a hyphen-joined dialogue act or a 4-string array")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<DialogueAct, E> {
                parse_act_string(v).map_err(E::custom)
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<DialogueAct, A::Error> {
                let mut fields: Vec<String> = Vec::with_capacity(4);
                while let Some(field) = seq.next_element::<String>()? {
                    fields.push(field);
                }
                if fields.len() != 4 {
                    return Err(de::Error::invalid_length(fields.len(), &"4 strings"));
                }
                let intent: Intent = fields[0].parse().map_err(de::Error::custom)?;
                DialogueAct::new(intent, &*fields[1], &*fields[2], &*fields[3])
                    .map_err(de::Error::custom)
            }
        }

        deserializer.deserialize_any(ActVisitor)
    }
}
