//! Stage interfaces, their rule/template implementations, and the pipeline
//! agent that chains them: NLU → DST → Policy → NLG.

pub mod dst;
pub mod noise;
pub mod policy;
pub mod templates;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::act::{DialogueAct, Intent};
use crate::belief::BeliefState;
use crate::dialogue::{Message, Speaker};
use crate::ontology::UserGoal;
use crate::pack::DomainPack;
use crate::simulator::{agenda_init, user_respond, UserSimState};

pub use dst::{dst_update, DstUpdate};
pub use noise::{corrupt_acts, NoiseConfig, NoiseError};
pub use policy::{rule_policy, PolicyDecision, PolicyError};
pub use templates::{TemplateEntry, TemplateError, TemplateTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Nlu,
    Dst,
    Policy,
    Nlg,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Nlu, Stage::Dst, Stage::Policy, Stage::Nlg];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Nlu => "nlu",
            Stage::Dst => "dst",
            Stage::Policy => "policy",
            Stage::Nlg => "nlg",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("{agent}: expected {expected} input, got {got}")]
    TypeMismatch {
        agent: String,
        expected: &'static str,
        got: &'static str,
    },
    #[error("{agent}: {stage} stage failed: {message}")]
    Stage {
        agent: String,
        stage: Stage,
        message: String,
    },
}

/// Maps an utterance to dialogue acts.
pub trait Nlu: Send + Sync {
    fn parse(&self, utterance: &str) -> Vec<DialogueAct>;
}

/// Folds parsed acts into a belief state without mutating the input.
pub trait Dst: Send + Sync {
    fn update(&self, state: &BeliefState, acts: &[DialogueAct]) -> DstUpdate;
}

/// Chooses the agent's acts. Policies keep their memory in [`AgentState`]
/// so that a turn can be rolled back by restoring a snapshot.
pub trait Policy: Send + Sync {
    fn respond(&self, observed: &[DialogueAct], state: &mut AgentState) -> Result<Vec<DialogueAct>, String>;

    /// Prepares per-session state; user policies load their goal here.
    fn init_session(&self, _state: &mut AgentState, _goal: Option<&UserGoal>) {}
}

/// Renders acts as an utterance.
pub trait Nlg: Send + Sync {
    fn generate(&self, acts: &[DialogueAct]) -> Result<String, String>;
}

/// Inverse-template NLU. `speaker` is the side whose utterances it reads.
pub struct PatternNlu {
    pack: Arc<DomainPack>,
    speaker: Speaker,
}

impl PatternNlu {
    pub fn new(pack: Arc<DomainPack>, speaker: Speaker) -> Self {
        PatternNlu { pack, speaker }
    }
}

impl Nlu for PatternNlu {
    fn parse(&self, utterance: &str) -> Vec<DialogueAct> {
        pattern_nlu(&self.pack.templates, utterance, self.speaker)
    }
}

pub fn pattern_nlu(templates: &TemplateTable, utterance: &str, side: Speaker) -> Vec<DialogueAct> {
    templates.parse(utterance, side)
}

pub fn template_nlg(templates: &TemplateTable, acts: &[DialogueAct], side: Speaker) -> Result<String, TemplateError> {
    templates.generate(acts, side)
}

pub struct TemplateNlg {
    pack: Arc<DomainPack>,
    speaker: Speaker,
}

impl TemplateNlg {
    pub fn new(pack: Arc<DomainPack>, speaker: Speaker) -> Self {
        TemplateNlg { pack, speaker }
    }
}

impl Nlg for TemplateNlg {
    fn generate(&self, acts: &[DialogueAct]) -> Result<String, String> {
        template_nlg(&self.pack.templates, acts, self.speaker).map_err(|e| e.to_string())
    }
}

pub struct RuleDst {
    pack: Arc<DomainPack>,
}

impl RuleDst {
    pub fn new(pack: Arc<DomainPack>) -> Self {
        RuleDst { pack }
    }
}

impl Dst for RuleDst {
    fn update(&self, state: &BeliefState, acts: &[DialogueAct]) -> DstUpdate {
        dst_update(state, acts, &self.pack.database)
    }
}

/// System rule policy; see [`rule_policy`].
pub struct RulePolicy {
    pack: Arc<DomainPack>,
    withheld: BTreeSet<String>,
}

impl RulePolicy {
    pub fn new(pack: Arc<DomainPack>) -> Self {
        RulePolicy {
            pack,
            withheld: BTreeSet::new(),
        }
    }

    /// A deliberately faulty variant that never answers the given slots.
    pub fn withholding(pack: Arc<DomainPack>, slots: impl IntoIterator<Item = String>) -> Self {
        RulePolicy {
            pack,
            withheld: slots.into_iter().collect(),
        }
    }
}

impl Policy for RulePolicy {
    fn respond(&self, _observed: &[DialogueAct], state: &mut AgentState) -> Result<Vec<DialogueAct>, String> {
        let decision = rule_policy(&state.belief, &self.pack.database, &self.withheld).map_err(|e| e.to_string())?;
        state.belief = decision.state;
        Ok(decision.acts)
    }
}

/// Agenda-based user policy; see [`crate::simulator`].
pub struct AgendaPolicy {
    pub max_acts_per_turn: usize,
}

impl Policy for AgendaPolicy {
    fn respond(&self, observed: &[DialogueAct], state: &mut AgentState) -> Result<Vec<DialogueAct>, String> {
        let user = state.user.as_ref().ok_or("user policy has no goal")?;
        let turn = user_respond(user, observed);
        state.user = Some(turn.state);
        Ok(turn.acts)
    }

    fn init_session(&self, state: &mut AgentState, goal: Option<&UserGoal>) {
        state.user = goal.map(|g| {
            let (agenda, goal_state) = agenda_init(g, self.max_acts_per_turn);
            UserSimState { agenda, goal_state }
        });
    }
}

/// Everything an agent carries between turns. Cloning it is a snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub belief: BeliefState,
    pub user: Option<UserSimState>,
    pub noise_rng: ChaCha8Rng,
}

impl AgentState {
    pub fn new(noise_seed: u64) -> Self {
        AgentState {
            belief: BeliefState::new(),
            user: None,
            noise_rng: ChaCha8Rng::seed_from_u64(noise_seed),
        }
    }
}

/// Replacement output for one stage, used to rerun a turn from a corrected
/// intermediate result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", content = "output", rename_all = "lowercase")]
pub enum StageOverride {
    Nlu(Vec<DialogueAct>),
    Dst(BeliefState),
    Policy(Vec<DialogueAct>),
    Nlg(String),
}

impl StageOverride {
    pub fn stage(&self) -> Stage {
        match self {
            StageOverride::Nlu(_) => Stage::Nlu,
            StageOverride::Dst(_) => Stage::Dst,
            StageOverride::Policy(_) => Stage::Policy,
            StageOverride::Nlg(_) => Stage::Nlg,
        }
    }
}

/// Output of every stage for one agent turn. Absent stages are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub input: Message,
    /// NLU output after any configured noise.
    pub nlu: Option<Vec<DialogueAct>>,
    pub dst: Option<BeliefState>,
    pub policy: Vec<DialogueAct>,
    pub nlg: Option<String>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub tracker_skips: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overridden: Option<Stage>,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl StageTrace {
    /// What the agent emitted this turn.
    pub fn output(&self) -> Message {
        match &self.nlg {
            Some(text) => Message::Text(text.clone()),
            None => Message::Acts(self.policy.clone()),
        }
    }
}

/// An agent assembled from optional NLU, DST and NLG stages around a policy.
pub struct PipelineAgent {
    pub name: String,
    nlu: Option<Box<dyn Nlu>>,
    noise: Option<NoiseConfig>,
    dst: Option<Box<dyn Dst>>,
    policy: Box<dyn Policy>,
    nlg: Option<Box<dyn Nlg>>,
    state: AgentState,
}

impl PipelineAgent {
    pub fn new(
        name: impl Into<String>,
        nlu: Option<Box<dyn Nlu>>,
        dst: Option<Box<dyn Dst>>,
        policy: Box<dyn Policy>,
        nlg: Option<Box<dyn Nlg>>,
    ) -> Self {
        PipelineAgent {
            name: name.into(),
            nlu,
            noise: None,
            dst,
            policy,
            nlg,
            state: AgentState::new(0),
        }
    }

    /// Corrupts NLU output with `noise` (already resolved against the pack),
    /// drawing from `rng`. Noiseless configurations leave the output alone.
    pub fn with_noise(mut self, noise: NoiseConfig, rng: ChaCha8Rng) -> Self {
        self.noise = (!noise.is_noiseless()).then_some(noise);
        self.state.noise_rng = rng;
        self
    }

    pub fn has_nlu(&self) -> bool {
        self.nlu.is_some()
    }

    pub fn has_nlg(&self) -> bool {
        self.nlg.is_some()
    }

    pub fn has_dst(&self) -> bool {
        self.dst.is_some()
    }

    /// Resets conversational state for a new dialogue; the noise stream is kept.
    pub fn init_session(&mut self, goal: Option<&UserGoal>) {
        self.state.belief = BeliefState::new();
        self.state.user = None;
        self.policy.init_session(&mut self.state, goal);
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn snapshot(&self) -> AgentState {
        self.state.clone()
    }

    pub fn restore(&mut self, snapshot: AgentState) {
        self.state = snapshot;
    }

    pub fn respond(&mut self, observation: &Message) -> Result<(Message, StageTrace), AgentError> {
        self.respond_with(observation, None)
    }

    /// Runs one turn. With an override, that stage is skipped and its output
    /// replaced; every later stage runs on the replacement. A failed turn
    /// leaves the agent state unchanged.
    pub fn respond_with(
        &mut self,
        observation: &Message,
        replacement: Option<StageOverride>,
    ) -> Result<(Message, StageTrace), AgentError> {
        let before = self.state.clone();
        let result = self.run(observation, replacement);
        if result.is_err() {
            self.state = before;
        }
        result
    }

    fn stage_error(&self, stage: Stage, message: String) -> AgentError {
        AgentError::Stage {
            agent: self.name.clone(),
            stage,
            message,
        }
    }

    fn run(&mut self, observation: &Message, replacement: Option<StageOverride>) -> Result<(Message, StageTrace), AgentError> {
        let overridden = replacement.as_ref().map(StageOverride::stage);
        let mut replacement = replacement;
        let mut take = |stage: Stage| -> Option<StageOverride> {
            if overridden == Some(stage) {
                replacement.take()
            } else {
                None
            }
        };

        let (acts, nlu_trace) = match (take(Stage::Nlu), &self.nlu, observation) {
            (Some(StageOverride::Nlu(acts)), _, _) => (acts.clone(), Some(acts)),
            (_, Some(nlu), Message::Text(text)) => {
                let mut acts = nlu.parse(text);
                if let Some(noise) = &self.noise {
                    acts = corrupt_acts(&acts, noise, &mut self.state.noise_rng);
                }
                (acts.clone(), Some(acts))
            }
            (_, None, Message::Acts(acts)) => (acts.clone(), None),
            (_, nlu, msg) => {
                return Err(AgentError::TypeMismatch {
                    agent: self.name.clone(),
                    expected: if nlu.is_some() { "text" } else { "acts" },
                    got: msg.kind(),
                })
            }
        };

        let mut tracker_skips = 0;
        let dst_trace = match (take(Stage::Dst), &self.dst) {
            (Some(StageOverride::Dst(state)), _) => {
                self.state.belief = state.clone();
                Some(state)
            }
            (_, Some(dst)) => {
                let update = dst.update(&self.state.belief, &acts);
                tracker_skips = update.skipped;
                self.state.belief = update.state.clone();
                Some(update.state)
            }
            (_, None) => None,
        };

        let policy_acts = match take(Stage::Policy) {
            Some(StageOverride::Policy(acts)) => acts,
            _ => self
                .policy
                .respond(&acts, &mut self.state)
                .map_err(|m| self.stage_error(Stage::Policy, m))?,
        };

        let nlg_trace = match (take(Stage::Nlg), &self.nlg) {
            (Some(StageOverride::Nlg(text)), _) => Some(text),
            (_, Some(nlg)) => Some(
                nlg.generate(&policy_acts)
                    .map_err(|m| self.stage_error(Stage::Nlg, m))?,
            ),
            (_, None) => None,
        };

        let trace = StageTrace {
            input: observation.clone(),
            nlu: nlu_trace,
            dst: dst_trace,
            policy: policy_acts,
            nlg: nlg_trace,
            tracker_skips,
            overridden,
        };
        Ok((trace.output(), trace))
    }
}

/// Whether a list of acts ends the dialogue from the user's side.
pub fn contains_bye(acts: &[DialogueAct]) -> bool {
    acts.iter().any(|a| a.intent() == Intent::Bye)
}

/// Builds the default system agent: pattern NLU, rule DST, rule policy and
/// template NLG over `pack`.
pub fn rule_system_agent(pack: Arc<DomainPack>) -> PipelineAgent {
    PipelineAgent::new(
        "sys",
        Some(Box::new(PatternNlu::new(pack.clone(), Speaker::User))),
        Some(Box::new(RuleDst::new(pack.clone()))),
        Box::new(RulePolicy::new(pack.clone())),
        Some(Box::new(TemplateNlg::new(pack, Speaker::System))),
    )
}

/// Builds the default user simulator: pattern NLU, no DST, agenda policy and
/// template NLG.
pub fn agenda_user_agent(pack: Arc<DomainPack>, max_acts_per_turn: usize) -> PipelineAgent {
    PipelineAgent::new(
        "user",
        Some(Box::new(PatternNlu::new(pack.clone(), Speaker::System))),
        None,
        Box::new(AgendaPolicy { max_acts_per_turn }),
        Some(Box::new(TemplateNlg::new(pack, Speaker::User))),
    )
}
