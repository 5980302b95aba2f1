use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::act::{DialogueAct, Intent};
use crate::dialogue::{DialogueLog, Speaker, Turn};
use crate::ontology::{Database, UserGoal};

/// Per-dialogue evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub success: bool,
    pub inform_precision: f64,
    pub inform_recall: f64,
    pub inform_f1: f64,
    /// User turns.
    pub turn_count: usize,
    pub reward_total: f64,
}

/// Terminal reward schedule: −1 per user turn, then a bonus or penalty when
/// the dialogue ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub per_turn: f64,
    /// Multiplied by max_turns on task success.
    pub success_factor: f64,
    /// Multiplied by max_turns on failure.
    pub failure_factor: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            per_turn: -1.0,
            success_factor: 2.0,
            failure_factor: -1.0,
        }
    }
}

impl RewardConfig {
    pub fn terminal(&self, success: bool, max_turns: usize) -> f64 {
        let factor = if success { self.success_factor } else { self.failure_factor };
        factor * max_turns as f64
    }

    pub fn total(&self, user_turns: usize, success: bool, max_turns: usize) -> f64 {
        self.per_turn * user_turns as f64 + self.terminal(success, max_turns)
    }
}

fn system_acts(turns: &[Turn]) -> impl Iterator<Item = &DialogueAct> {
    turns
        .iter()
        .filter(|t| t.speaker == Speaker::System)
        .flat_map(|t| t.true_acts.iter())
}

/// Whether `value` is slot `slot` of some entity matching the goal's
/// constraints for `domain`.
pub fn consistent_with_goal(goal: &UserGoal, db: &Database, domain: &str, slot: &str, value: &str) -> bool {
    let Some(sub) = goal.subgoal(domain) else {
        return false;
    };
    db.query(domain, &sub.constraints)
        .map(|matches| matches.iter().any(|e| e.get(slot).is_some_and(|v| v == value)))
        .unwrap_or(false)
}

/// Clause (a) of task success: every goal request was answered correctly at
/// least once.
pub fn requests_answered(goal: &UserGoal, turns: &[Turn], db: &Database) -> bool {
    let answered = correct_pairs(goal, system_acts(turns), db);
    goal.requested_pairs().all(|(d, s)| answered.contains(&(d.to_string(), s.to_string())))
}

/// Clause (a) restricted to one domain's requests.
pub fn domain_requests_answered(goal: &UserGoal, turns: &[Turn], db: &Database, domain: &str) -> bool {
    let answered = correct_pairs(goal, system_acts(turns).filter(|a| a.domain() == domain), db);
    goal.requested_pairs()
        .filter(|(d, _)| *d == domain)
        .all(|(d, s)| answered.contains(&(d.to_string(), s.to_string())))
}

fn correct_pairs<'a>(
    goal: &UserGoal,
    acts: impl Iterator<Item = &'a DialogueAct>,
    db: &Database,
) -> BTreeSet<(String, String)> {
    acts.filter(|a| a.intent().is_inform_like())
        .filter(|a| consistent_with_goal(goal, db, a.domain(), a.slot(), a.value()))
        .map(|a| (a.domain().to_string(), a.slot().to_string()))
        .collect()
}

/// Task success: all requests answered from a matching entity, and the user
/// closed the dialogue with Bye within the turn limit.
pub fn evaluate_success(log: &DialogueLog, db: &Database) -> bool {
    let said_bye = log
        .user_turns()
        .any(|t| t.true_acts.iter().any(|a| a.intent() == Intent::Bye));
    said_bye && log.user_turn_count() <= log.max_turns && requests_answered(&log.goal, &log.turns, db)
}

/// Inform precision, recall and F1.
///
/// R is the set of requested (domain, slot) pairs, A the pairs the system
/// informed or recommended with a goal-consistent value, and W the pairs it
/// informed with an inconsistent value or without being asked. A Recommend
/// outside R is an offer, not an answer, and is not counted in W.
pub fn inform_f1(log: &DialogueLog, db: &Database) -> (f64, f64, f64) {
    inform_scores(&log.goal, &log.turns, db)
}

pub fn inform_scores(goal: &UserGoal, turns: &[Turn], db: &Database) -> (f64, f64, f64) {
    let requested = goal.requested_pairs().map(|(d, s)| (d.to_string(), s.to_string())).collect();
    score_acts(goal, &requested, system_acts(turns), db)
}

/// Inform scores counting only requests and system acts of `domain`.
pub fn domain_inform_scores(goal: &UserGoal, turns: &[Turn], db: &Database, domain: &str) -> (f64, f64, f64) {
    let requested = goal
        .requested_pairs()
        .filter(|(d, _)| *d == domain)
        .map(|(d, s)| (d.to_string(), s.to_string()))
        .collect();
    score_acts(goal, &requested, system_acts(turns).filter(|a| a.domain() == domain), db)
}

fn score_acts<'a>(
    goal: &UserGoal,
    requested: &BTreeSet<(String, String)>,
    acts: impl Iterator<Item = &'a DialogueAct>,
    db: &Database,
) -> (f64, f64, f64) {
    let mut hits = BTreeSet::new();
    let mut wrong = BTreeSet::new();
    for act in acts.filter(|a| a.intent().is_inform_like()) {
        let pair = (act.domain().to_string(), act.slot().to_string());
        let in_r = requested.contains(&pair);
        let correct = consistent_with_goal(goal, db, act.domain(), act.slot(), act.value());
        if in_r && correct {
            hits.insert(pair);
        } else if act.intent() == Intent::Inform || in_r {
            wrong.insert(pair);
        }
    }
    let tp = hits.len() as f64;
    let precision = if hits.len() + wrong.len() == 0 {
        1.0
    } else {
        tp / (tp + wrong.len() as f64)
    };
    let recall = if requested.is_empty() { 1.0 } else { tp / requested.len() as f64 };
    (precision, recall, harmonic_mean(precision, recall))
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Scores a finished dialogue.
pub fn evaluate(log: &DialogueLog, db: &Database, reward: &RewardConfig) -> EvaluationResult {
    let success = evaluate_success(log, db);
    let (inform_precision, inform_recall, inform_f1) = inform_f1(log, db);
    let turn_count = log.user_turn_count();
    EvaluationResult {
        success,
        inform_precision,
        inform_recall,
        inform_f1,
        turn_count,
        reward_total: reward.total(turn_count, success, log.max_turns),
    }
}
