//! Turn and dialogue logs: the records simulation writes and analysis reads.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::act::DialogueAct;
use crate::belief::BeliefState;
use crate::ontology::UserGoal;
use crate::pipeline::StageTrace;
use crate::session::EvaluationResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    System,
}

impl Speaker {
    pub fn as_str(self) -> &'static str {
        match self {
            Speaker::User => "user",
            Speaker::System => "system",
        }
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What passes between agents: text when the speaker has an NLG stage,
/// otherwise the raw act list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Message {
    Text(String),
    Acts(Vec<DialogueAct>),
}

impl Message {
    pub fn empty_text() -> Self {
        Message::Text(String::new())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Message::Text(_) => "text",
            Message::Acts(_) => "acts",
        }
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Text(text) => f.write_str(text),
            Message::Acts(acts) => {
                let joined: Vec<String> = acts.iter().map(ToString::to_string).collect();
                f.write_str(&joined.join("; "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub turn_index: usize,
    pub speaker: Speaker,
    pub utterance: String,
    /// Acts chosen by the speaker's policy, before generation.
    pub true_acts: Vec<DialogueAct>,
    /// Acts the listener's NLU recovered from this turn.
    #[serde(default)]
    pub parsed_acts: Option<Vec<DialogueAct>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief_snapshot: Option<BeliefState>,
    pub trace: StageTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// The user closed the dialogue with Bye.
    Success,
    FailureMaxTurns,
    FailureOther,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueLog {
    pub episode: u64,
    pub seed: u64,
    pub max_turns: usize,
    pub goal: UserGoal,
    pub turns: Vec<Turn>,
    pub outcome: Outcome,
    pub evaluation: EvaluationResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl DialogueLog {
    pub fn user_turns(&self) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(|t| t.speaker == Speaker::User)
    }

    pub fn system_turns(&self) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(|t| t.speaker == Speaker::System)
    }

    pub fn user_turn_count(&self) -> usize {
        self.user_turns().count()
    }
}
