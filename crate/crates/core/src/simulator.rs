//! Agenda-based user policy.
//!
//! The agenda is a stack of pending user acts built from the goal. Each turn
//! the simulator reacts to the system's acts (recording answers, correcting
//! wrong values, re-stating constraints after a NoOffer) and then pops the
//! next acts to utter.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::act::{DialogueAct, Intent, DONTCARE};
use crate::ontology::UserGoal;

pub const DEFAULT_MAX_ACTS_PER_TURN: usize = 2;

/// Stack of pending user acts; the last element is uttered first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agenda {
    stack: Vec<DialogueAct>,
    pub max_acts_per_turn: usize,
}

impl Agenda {
    pub fn new(max_acts_per_turn: usize) -> Self {
        Agenda {
            stack: Vec::new(),
            max_acts_per_turn: max_acts_per_turn.max(1),
        }
    }

    /// Pushes `act` on top. An equal act already in the stack moves to the top.
    pub fn push(&mut self, act: DialogueAct) {
        self.remove(&act);
        self.stack.push(act);
    }

    pub fn remove(&mut self, act: &DialogueAct) {
        self.stack.retain(|a| a != act);
    }

    pub fn pop(&mut self) -> Option<DialogueAct> {
        self.stack.pop()
    }

    pub fn len(&self) -> usize {
        self.stack.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stack.is_empty()
    }

    pub fn contains(&self, act: &DialogueAct) -> bool {
        self.stack.contains(act)
    }

    /// Pending acts in pop order.
    pub fn pending(&self) -> impl Iterator<Item = &DialogueAct> {
        self.stack.iter().rev()
    }
}

/// The goal plus what the system has delivered so far.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalState {
    pub goal: UserGoal,
    /// Domain → requested slot → value the system supplied.
    pub fulfilled: BTreeMap<String, BTreeMap<String, String>>,
    /// Domain → constraint slots the system confirmed with the goal value.
    pub acknowledged: BTreeMap<String, BTreeSet<String>>,
}

impl GoalState {
    pub fn new(goal: UserGoal) -> Self {
        GoalState {
            goal,
            fulfilled: BTreeMap::new(),
            acknowledged: BTreeMap::new(),
        }
    }

    pub fn is_fulfilled(&self, domain: &str, slot: &str) -> bool {
        self.fulfilled.get(domain).is_some_and(|m| m.contains_key(slot))
    }

    pub fn is_complete(&self) -> bool {
        self.goal.requested_pairs().all(|(d, s)| self.is_fulfilled(d, s))
    }

    pub fn oldest_unfulfilled(&self) -> Option<(&str, &str)> {
        self.goal.requested_pairs().find(|(d, s)| !self.is_fulfilled(d, s))
    }
}

/// Per-session user simulator state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSimState {
    pub agenda: Agenda,
    pub goal_state: GoalState,
}

/// Builds the agenda so that pops yield, per sub-goal in order, its Informs
/// (constraint order) and then its Requests.
pub fn agenda_init(goal: &UserGoal, max_acts_per_turn: usize) -> (Agenda, GoalState) {
    let mut ordered = Vec::with_capacity(goal.total_constraints() + goal.total_requests());
    for sub in &goal.subgoals {
        for (slot, value) in &sub.constraints {
            ordered.push(DialogueAct::inform(&sub.domain, slot, value).expect("goal tokens come from the pack"));
        }
        for slot in &sub.requests {
            ordered.push(DialogueAct::request(&sub.domain, slot).expect("goal tokens come from the pack"));
        }
    }
    let mut agenda = Agenda::new(max_acts_per_turn);
    for act in ordered.into_iter().rev() {
        agenda.push(act);
    }
    (agenda, GoalState::new(goal.clone()))
}

/// Applies the system's acts to the agenda and goal state.
pub fn agenda_update(agenda: &Agenda, goal_state: &GoalState, system_acts: &[DialogueAct]) -> (Agenda, GoalState) {
    let mut agenda = agenda.clone();
    let mut state = goal_state.clone();
    for act in system_acts {
        let Some(sub) = state.goal.subgoal(act.domain()).cloned() else {
            continue;
        };
        let (domain, slot, value) = (act.domain(), act.slot(), act.value());
        match act.intent() {
            Intent::Inform | Intent::Recommend => {
                if sub.requests.iter().any(|r| r == slot) && !state.is_fulfilled(domain, slot) {
                    state
                        .fulfilled
                        .entry(domain.to_string())
                        .or_default()
                        .insert(slot.to_string(), value.to_string());
                    agenda.remove(&DialogueAct::request(domain, slot).expect("valid act"));
                }
                if let Some(wanted) = sub.constraints.get(slot) {
                    if wanted == value {
                        state.acknowledged.entry(domain.to_string()).or_default().insert(slot.to_string());
                    } else {
                        agenda.push(DialogueAct::inform(domain, slot, wanted).expect("valid act"));
                    }
                }
            }
            Intent::Request => {
                let answer = sub.constraints.get(slot).map_or(DONTCARE, String::as_str);
                agenda.push(DialogueAct::inform(domain, slot, answer).expect("valid act"));
            }
            Intent::NoOffer => {
                for (slot, wanted) in sub.constraints.iter().rev() {
                    agenda.push(DialogueAct::inform(domain, slot, wanted).expect("valid act"));
                }
            }
            Intent::Greet | Intent::Bye => {}
        }
    }
    (agenda, state)
}

/// One user turn produced by [`user_respond`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserTurn {
    pub acts: Vec<DialogueAct>,
    pub session_over: bool,
    pub state: UserSimState,
}

/// Updates on the system's acts, then pops up to `max_acts_per_turn` acts.
/// With an empty agenda the user says Bye once the goal is complete, and
/// otherwise repeats the oldest unfulfilled request.
pub fn user_respond(state: &UserSimState, system_acts: &[DialogueAct]) -> UserTurn {
    let (mut agenda, goal_state) = agenda_update(&state.agenda, &state.goal_state, system_acts);
    if agenda.is_empty() {
        if goal_state.is_complete() {
            return UserTurn {
                acts: vec![DialogueAct::bye()],
                session_over: true,
                state: UserSimState { agenda, goal_state },
            };
        }
        if let Some((domain, slot)) = goal_state.oldest_unfulfilled() {
            agenda.push(DialogueAct::request(domain, slot).expect("valid act"));
        }
    }
    let mut acts = Vec::with_capacity(agenda.max_acts_per_turn);
    while acts.len() < agenda.max_acts_per_turn {
        match agenda.pop() {
            Some(act) => acts.push(act),
            None => break,
        }
    }
    UserTurn {
        acts,
        session_over: false,
        state: UserSimState { agenda, goal_state },
    }
}
