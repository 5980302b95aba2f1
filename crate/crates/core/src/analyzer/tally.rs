//! Count tables behind the report. Counts are the source of truth; shares
//! are derived from them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::act::{DialogueAct, Intent, NONE};
use crate::dialogue::{DialogueLog, Outcome, Speaker};
use crate::ontology::Database;
use crate::session::consistent_with_goal;

pub const DEFAULT_LOOP_WINDOW: usize = 3;

/// How one true act fared in the listener's parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Alignment {
    Correct,
    Confused(DialogueAct),
    Dropped,
}

/// Pairs each true act with at most one parsed act: exact matches first,
/// then acts sharing (intent, slot), then the remaining acts by position.
/// Returns one outcome per true act, in order.
pub fn align(truth: &[DialogueAct], parsed: &[DialogueAct]) -> Vec<Alignment> {
    let mut used = vec![false; parsed.len()];
    let mut out: Vec<Option<Alignment>> = vec![None; truth.len()];
    for (i, t) in truth.iter().enumerate() {
        if let Some(j) = (0..parsed.len()).find(|&j| !used[j] && parsed[j] == *t) {
            used[j] = true;
            out[i] = Some(Alignment::Correct);
        }
    }
    for (i, t) in truth.iter().enumerate() {
        if out[i].is_some() {
            continue;
        }
        let same_key = |p: &DialogueAct| p.intent() == t.intent() && p.slot() == t.slot();
        if let Some(j) = (0..parsed.len()).find(|&j| !used[j] && same_key(&parsed[j])) {
            used[j] = true;
            out[i] = Some(Alignment::Confused(parsed[j].clone()));
        }
    }
    let mut rest = (0..parsed.len()).filter(|&j| !used[j]);
    out.into_iter()
        .map(|slot| match slot {
            Some(a) => a,
            None => match rest.next() {
                Some(j) => Alignment::Confused(parsed[j].clone()),
                None => Alignment::Dropped,
            },
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionRow {
    pub occurrences: u64,
    pub correct: u64,
    pub dropped: u64,
    /// Parsed act → times the true act was read as it.
    pub confused: BTreeMap<String, u64>,
}

impl ConfusionRow {
    pub fn confused_total(&self) -> u64 {
        self.confused.values().sum()
    }

    pub fn errors(&self) -> u64 {
        self.confused_total() + self.dropped
    }

    /// Share of each misreading, largest first; "dropped" is listed as
    /// its own entry. The shares sum to at most 1; the rest is correct.
    pub fn shares(&self) -> Vec<(String, f64)> {
        let n = self.occurrences.max(1) as f64;
        let mut shares: Vec<(String, f64)> = self
            .confused
            .iter()
            .map(|(act, c)| (act.clone(), *c as f64 / n))
            .collect();
        if self.dropped > 0 {
            shares.push(("(dropped)".to_string(), self.dropped as f64 / n));
        }
        shares.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        shares
    }
}

/// True act (hyphen form) → how the listener parsed it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionTable {
    pub rows: BTreeMap<String, ConfusionRow>,
}

impl ConfusionTable {
    /// Tallies one speaker turn. Acts without a domain (Greet, Bye) are
    /// not tallied.
    pub fn add_turn(&mut self, truth: &[DialogueAct], parsed: &[DialogueAct]) {
        let truth: Vec<DialogueAct> = truth.iter().filter(|a| a.has_domain()).cloned().collect();
        let parsed: Vec<DialogueAct> = parsed.iter().filter(|a| a.has_domain()).cloned().collect();
        for (act, outcome) in truth.iter().zip(align(&truth, &parsed)) {
            let row = self.rows.entry(act.to_string()).or_default();
            row.occurrences += 1;
            match outcome {
                Alignment::Correct => row.correct += 1,
                Alignment::Dropped => row.dropped += 1,
                Alignment::Confused(p) => *row.confused.entry(p.to_string()).or_default() += 1,
            }
        }
    }

    pub fn occurrences(&self) -> u64 {
        self.rows.values().map(|r| r.occurrences).sum()
    }

    pub fn errors(&self) -> u64 {
        self.rows.values().map(ConfusionRow::errors).sum()
    }

    /// Confused plus dropped over all tallied acts.
    pub fn error_share(&self) -> f64 {
        match self.occurrences() {
            0 => 0.0,
            n => self.errors() as f64 / n as f64,
        }
    }

    /// Rows with at least one error, most errors first.
    pub fn most_confusing(&self) -> Vec<(&String, &ConfusionRow)> {
        let mut rows: Vec<_> = self.rows.iter().filter(|(_, r)| r.errors() > 0).collect();
        rows.sort_by(|a, b| b.1.errors().cmp(&a.1.errors()).then_with(|| a.0.cmp(b.0)));
        rows
    }
}

/// Confusion of user acts by the system NLU.
pub fn nlu_confusion(corpus: &[DialogueLog]) -> ConfusionTable {
    confusion(corpus, Speaker::User)
}

/// Confusion of system acts by the simulator's NLU.
pub fn nlg_confusion(corpus: &[DialogueLog]) -> ConfusionTable {
    confusion(corpus, Speaker::System)
}

fn confusion(corpus: &[DialogueLog], speaker: Speaker) -> ConfusionTable {
    let mut table = ConfusionTable::default();
    for log in corpus {
        for turn in log.turns.iter().filter(|t| t.speaker == speaker) {
            // the final user turn is never heard by the system
            if let Some(parsed) = &turn.parsed_acts {
                table.add_turn(&turn.true_acts, parsed);
            }
        }
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditLabel {
    Valid,
    Invalid,
    Redundant,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRow {
    pub informs: u64,
    pub valid: u64,
    pub invalid: u64,
    pub redundant: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingRow {
    /// Dialogues whose goal requested the slot.
    pub requested: u64,
    /// Of those, dialogues where the system never informed it.
    pub missing: u64,
}

/// Audit of system Inform/Recommend acts, keyed by act pattern
/// (`Inform-Hotel-Stars`).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemActAudit {
    pub informs: BTreeMap<String, AuditRow>,
    pub missing: BTreeMap<String, MissingRow>,
}

impl SystemActAudit {
    pub fn total_invalid(&self) -> u64 {
        self.informs.values().map(|r| r.invalid).sum()
    }

    pub fn total_redundant(&self) -> u64 {
        self.informs.values().map(|r| r.redundant).sum()
    }

    pub fn total_missing(&self) -> u64 {
        self.missing.values().map(|r| r.missing).sum()
    }

    /// Patterns ranked by one bucket's share of their informs.
    pub fn ranked(&self, label: AuditLabel) -> Vec<(&String, u64, f64)> {
        let mut out: Vec<_> = self
            .informs
            .iter()
            .map(|(p, r)| {
                let c = match label {
                    AuditLabel::Valid => r.valid,
                    AuditLabel::Invalid => r.invalid,
                    AuditLabel::Redundant => r.redundant,
                };
                (p, c, c as f64 / r.informs.max(1) as f64)
            })
            .filter(|(_, c, _)| *c > 0)
            .collect();
        out.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| b.1.cmp(&a.1)).then_with(|| a.0.cmp(b.0)));
        out
    }

    pub fn ranked_missing(&self) -> Vec<(&String, u64, f64)> {
        let mut out: Vec<_> = self
            .missing
            .iter()
            .filter(|(_, r)| r.missing > 0)
            .map(|(p, r)| (p, r.missing, r.missing as f64 / r.requested.max(1) as f64))
            .collect();
        out.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| b.1.cmp(&a.1)).then_with(|| a.0.cmp(b.0)));
        out
    }
}

/// Labels one system inform given the (domain, slot, value) triples informed
/// earlier in the dialogue. Redundancy wins over everything; an inform for a
/// domain outside the goal is invalid.
pub fn classify_inform(
    log: &DialogueLog,
    db: &Database,
    act: &DialogueAct,
    earlier: &[(String, String, String)],
) -> AuditLabel {
    let key = (act.domain().to_string(), act.slot().to_string(), act.value().to_string());
    if earlier.contains(&key) {
        AuditLabel::Redundant
    } else if consistent_with_goal(&log.goal, db, act.domain(), act.slot(), act.value()) {
        AuditLabel::Valid
    } else {
        AuditLabel::Invalid
    }
}

pub fn audit_system_acts(corpus: &[DialogueLog], db: &Database) -> SystemActAudit {
    let mut audit = SystemActAudit::default();
    for log in corpus {
        let mut earlier: Vec<(String, String, String)> = Vec::new();
        for act in log
            .system_turns()
            .flat_map(|t| t.true_acts.iter())
            .filter(|a| a.intent().is_inform_like())
        {
            let label = classify_inform(log, db, act, &earlier);
            let row = audit.informs.entry(act.pattern()).or_default();
            row.informs += 1;
            match label {
                AuditLabel::Valid => row.valid += 1,
                AuditLabel::Invalid => row.invalid += 1,
                AuditLabel::Redundant => row.redundant += 1,
            }
            earlier.push((act.domain().to_string(), act.slot().to_string(), act.value().to_string()));
        }
        for (domain, slot) in log.goal.requested_pairs() {
            let informed = log
                .system_turns()
                .flat_map(|t| t.true_acts.iter())
                .any(|a| a.intent().is_inform_like() && a.domain() == domain && a.slot() == slot);
            let row = audit.missing.entry(format!("Inform-{domain}-{slot}")).or_default();
            row.requested += 1;
            if !informed {
                row.missing += 1;
            }
        }
    }
    audit
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainLoops {
    /// Dialogues whose goal includes the domain.
    pub dialogues: u64,
    /// Looped dialogues whose cause is a request in the domain.
    pub looped: u64,
}

impl DomainLoops {
    pub fn proportion(&self) -> f64 {
        match self.dialogues {
            0 => 0.0,
            n => self.looped as f64 / n as f64,
        }
    }
}

/// Causes of dialogue loops. A dialogue is looped when it hit the turn
/// limit and the same Request act occurs in each of its final `window`
/// user turns; that act is the cause.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopTable {
    pub window: usize,
    pub looped: u64,
    /// Request act → looped dialogues it caused.
    pub causes: BTreeMap<String, u64>,
    /// Turn-limit failures without a repeated request.
    pub other: u64,
    pub per_domain: BTreeMap<String, DomainLoops>,
}

impl LoopTable {
    /// Cause shares over looped dialogues, largest first. Sums to 1 when
    /// any loop was observed.
    pub fn shares(&self) -> Vec<(String, f64)> {
        let n = self.looped.max(1) as f64;
        let mut out: Vec<_> = self.causes.iter().map(|(a, c)| (a.clone(), *c as f64 / n)).collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }
}

/// The Request act repeated through the final `window` user turns, if the
/// dialogue hit the turn limit.
pub fn loop_cause(log: &DialogueLog, window: usize) -> Option<DialogueAct> {
    if log.outcome != Outcome::FailureMaxTurns || window == 0 {
        return None;
    }
    let users: Vec<_> = log.user_turns().collect();
    if users.len() < window {
        return None;
    }
    let tail = &users[users.len() - window..];
    let last = tail.last()?;
    last.true_acts
        .iter()
        .filter(|a| a.intent() == Intent::Request)
        .find(|a| tail.iter().all(|t| t.true_acts.contains(a)))
        .cloned()
}

pub fn loop_causes(corpus: &[DialogueLog], window: usize) -> LoopTable {
    let mut table = LoopTable {
        window,
        ..Default::default()
    };
    for log in corpus {
        for domain in log.goal.domains() {
            table.per_domain.entry(domain.to_string()).or_default().dialogues += 1;
        }
        match loop_cause(log, window) {
            Some(act) => {
                table.looped += 1;
                *table.causes.entry(act.to_string()).or_default() += 1;
                if act.domain() != NONE {
                    table.per_domain.entry(act.domain().to_string()).or_default().looped += 1;
                }
            }
            None if log.outcome == Outcome::FailureMaxTurns => table.other += 1,
            None => {}
        }
    }
    table
}
