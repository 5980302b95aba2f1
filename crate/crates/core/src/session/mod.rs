//! Two-agent conversation driver, evaluation and seeded batch simulation.

pub mod corpus;
mod evaluator;

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::act::{DialogueAct, Intent};
use crate::dialogue::{DialogueLog, Message, Outcome, Speaker, Turn};
use crate::ontology::{generate_goal, GoalConfig, UserGoal};
use crate::pack::DomainPack;
use crate::pipeline::{
    AgendaPolicy, AgentError, NoiseConfig, NoiseError, PatternNlu, PipelineAgent, RuleDst, RulePolicy, StageTrace,
    TemplateNlg,
};
use crate::simulator::DEFAULT_MAX_ACTS_PER_TURN;

pub use corpus::{corpus_to_string, read_corpus, write_corpus, CorpusError};
pub use evaluator::{
    consistent_with_goal, domain_inform_scores, domain_requests_answered, evaluate, evaluate_success, harmonic_mean,
    inform_f1, inform_scores, requests_answered, EvaluationResult, RewardConfig,
};

pub const DEFAULT_MAX_TURNS: usize = 20;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("session is over; next_turn called after termination")]
    Terminated,
    #[error(transparent)]
    Agent(#[from] AgentError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("{field}: {source}")]
    Noise {
        field: &'static str,
        #[source]
        source: NoiseError,
    },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NluChoice {
    #[default]
    Pattern,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DstChoice {
    #[default]
    Rule,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyChoice {
    #[default]
    Rule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NlgChoice {
    #[default]
    Template,
    None,
}

/// Stage selections for the system side.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub nlu: NluChoice,
    pub dst: DstChoice,
    pub policy: PolicyChoice,
    pub nlg: NlgChoice,
    /// Corruption applied to the system NLU's output.
    pub noise: NoiseConfig,
    /// Slots the rule policy never answers (a deliberately faulty system).
    pub withheld_slots: Vec<String>,
}

impl SystemConfig {
    pub fn validate(&self, pack: &DomainPack) -> Result<NoiseConfig, ConfigError> {
        if self.nlu == NluChoice::None && !self.noise.is_noiseless() {
            return Err(invalid("system.noise", "noise needs an NLU stage to corrupt"));
        }
        if self.dst == DstChoice::None {
            // the rule policy reads the belief state the tracker maintains
            return Err(invalid("system.dst", "the rule policy needs a tracker"));
        }
        for slot in &self.withheld_slots {
            if !pack.database.schemas().any(|s| s.is_requestable(slot)) {
                return Err(invalid("system.withheld_slots", format!("{slot:?} is not a requestable slot")));
            }
        }
        self.noise
            .resolve(&pack.database)
            .map_err(|source| ConfigError::Noise {
                field: "system.noise",
                source,
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UserConfig {
    pub max_acts_per_turn: usize,
    pub goal: GoalConfig,
    /// Corruption applied to the simulator's parse of system utterances.
    pub noise: NoiseConfig,
}

impl Default for UserConfig {
    fn default() -> Self {
        UserConfig {
            max_acts_per_turn: DEFAULT_MAX_ACTS_PER_TURN,
            goal: GoalConfig::default(),
            noise: NoiseConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub system: SystemConfig,
    pub user: UserConfig,
    pub max_turns: usize,
    pub reward: RewardConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            system: SystemConfig::default(),
            user: UserConfig::default(),
            max_turns: DEFAULT_MAX_TURNS,
            reward: RewardConfig::default(),
        }
    }
}

/// Validated configuration with noise targets filled in.
#[derive(Debug, Clone)]
struct Resolved {
    config: SimulationConfig,
    system_noise: NoiseConfig,
    user_noise: NoiseConfig,
}

impl SimulationConfig {
    pub fn validate(&self, pack: &DomainPack) -> Result<(), ConfigError> {
        self.resolve(pack).map(|_| ())
    }

    fn resolve(&self, pack: &DomainPack) -> Result<Resolved, ConfigError> {
        if self.max_turns == 0 {
            return Err(invalid("max_turns", "must be at least 1"));
        }
        if self.user.max_acts_per_turn == 0 {
            return Err(invalid("user.max_acts_per_turn", "must be at least 1"));
        }
        let system_noise = self.system.validate(pack)?;
        if self.system.nlg == NlgChoice::None && !self.user.noise.is_noiseless() {
            return Err(invalid("user.noise", "the simulator only parses text; set system.nlg"));
        }
        let user_noise = self.user.noise.resolve(&pack.database).map_err(|source| ConfigError::Noise {
            field: "user.noise",
            source,
        })?;
        let g = &self.user.goal;
        if g.min_domains == 0 || g.min_domains > g.max_domains {
            return Err(invalid("user.goal", "need 1 <= min_domains <= max_domains"));
        }
        if g.min_requests == 0 {
            return Err(invalid("user.goal.min_requests", "every sub-goal needs a request"));
        }
        if !(0.0..=1.0).contains(&g.dependency_probability) {
            return Err(invalid("user.goal.dependency_probability", "must lie in [0, 1]"));
        }
        if let Some(domains) = &g.domains {
            for d in domains {
                if pack.schema(d).is_none() {
                    return Err(invalid("user.goal.domains", format!("unknown domain {d:?}")));
                }
            }
        }
        Ok(Resolved {
            config: self.clone(),
            system_noise,
            user_noise,
        })
    }
}

/// Independent random streams derived from one episode seed.
pub fn episode_rngs(seed: u64) -> [ChaCha8Rng; 3] {
    [0u64, 1, 2].map(|stream| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    })
}

/// Assembles a system agent from stage selections.
pub fn build_system_agent(pack: Arc<DomainPack>, config: &SystemConfig) -> Result<PipelineAgent, ConfigError> {
    let noise = config.validate(&pack)?;
    Ok(system_agent(pack, config, noise, ChaCha8Rng::seed_from_u64(0)))
}

fn system_agent(pack: Arc<DomainPack>, config: &SystemConfig, noise: NoiseConfig, rng: ChaCha8Rng) -> PipelineAgent {
    let nlu: Option<Box<dyn crate::pipeline::Nlu>> = match config.nlu {
        NluChoice::Pattern => Some(Box::new(PatternNlu::new(pack.clone(), Speaker::User))),
        NluChoice::None => None,
    };
    let dst: Option<Box<dyn crate::pipeline::Dst>> = match config.dst {
        DstChoice::Rule => Some(Box::new(RuleDst::new(pack.clone()))),
        DstChoice::None => None,
    };
    let policy = match config.policy {
        PolicyChoice::Rule => RulePolicy::withholding(pack.clone(), config.withheld_slots.iter().cloned()),
    };
    let nlg: Option<Box<dyn crate::pipeline::Nlg>> = match config.nlg {
        NlgChoice::Template => Some(Box::new(TemplateNlg::new(pack, Speaker::System))),
        NlgChoice::None => None,
    };
    PipelineAgent::new("sys", nlu, dst, Box::new(policy), nlg).with_noise(noise, rng)
}

/// The simulator mirrors the system's interface: it speaks text exactly when
/// the system parses text, and parses text exactly when the system speaks it.
fn user_agent(
    pack: Arc<DomainPack>,
    system: &SystemConfig,
    user: &UserConfig,
    noise: NoiseConfig,
    rng: ChaCha8Rng,
) -> PipelineAgent {
    let nlu: Option<Box<dyn crate::pipeline::Nlu>> = (system.nlg == NlgChoice::Template)
        .then(|| Box::new(PatternNlu::new(pack.clone(), Speaker::System)) as Box<dyn crate::pipeline::Nlu>);
    let nlg: Option<Box<dyn crate::pipeline::Nlg>> = (system.nlu == NluChoice::Pattern)
        .then(|| Box::new(TemplateNlg::new(pack, Speaker::User)) as Box<dyn crate::pipeline::Nlg>);
    let policy = AgendaPolicy {
        max_acts_per_turn: user.max_acts_per_turn,
    };
    PipelineAgent::new("user", nlu, None, Box::new(policy), nlg).with_noise(noise, rng)
}

/// Result of one [`BiSession::next_turn`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnResult {
    /// `None` on the terminal turn, where the system does not respond.
    pub sys_output: Option<Message>,
    pub user_output: Message,
    pub session_over: bool,
    pub reward: f64,
}

/// Drives one dialogue: the user speaks first, then the system answers,
/// until the user says Bye or the user-turn limit is reached.
pub struct BiSession {
    system: PipelineAgent,
    user: PipelineAgent,
    pack: Arc<DomainPack>,
    goal: UserGoal,
    max_turns: usize,
    reward: RewardConfig,
    turns: Vec<Turn>,
    user_turns: usize,
    reward_total: f64,
    over: bool,
    said_bye: bool,
}

impl BiSession {
    pub fn new(
        mut system: PipelineAgent,
        mut user: PipelineAgent,
        pack: Arc<DomainPack>,
        goal: UserGoal,
        max_turns: usize,
        reward: RewardConfig,
    ) -> Self {
        system.init_session(None);
        user.init_session(Some(&goal));
        BiSession {
            system,
            user,
            pack,
            goal,
            max_turns: max_turns.max(1),
            reward,
            turns: Vec::new(),
            user_turns: 0,
            reward_total: 0.0,
            over: false,
            said_bye: false,
        }
    }

    /// What the user hears before anyone has spoken.
    pub fn opening(&self) -> Message {
        if self.user.has_nlu() {
            Message::empty_text()
        } else {
            Message::Acts(Vec::new())
        }
    }

    pub fn is_over(&self) -> bool {
        self.over
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn goal(&self) -> &UserGoal {
        &self.goal
    }

    pub fn reward_total(&self) -> f64 {
        self.reward_total
    }

    pub fn next_turn(&mut self, last_sys_output: &Message) -> Result<TurnResult, SessionError> {
        if self.over {
            return Err(SessionError::Terminated);
        }
        let (user_output, user_trace) = self.user.respond(last_sys_output)?;
        if let Some(prev) = self.turns.last_mut() {
            prev.parsed_acts = Some(perceived(&user_trace));
        }
        self.user_turns += 1;
        self.said_bye = user_trace.policy.iter().any(|a| a.intent() == Intent::Bye);
        self.push_turn(Speaker::User, &user_output, user_trace);

        let mut reward = self.reward.per_turn;
        if self.said_bye || self.user_turns >= self.max_turns {
            self.over = true;
            let success = self.said_bye && crate::session::requests_answered(&self.goal, &self.turns, &self.pack.database);
            reward += self.reward.terminal(success, self.max_turns);
            self.reward_total += reward;
            return Ok(TurnResult {
                sys_output: None,
                user_output,
                session_over: true,
                reward,
            });
        }
        self.reward_total += reward;

        let (sys_output, sys_trace) = self.system.respond(&user_output)?;
        if let Some(prev) = self.turns.last_mut() {
            prev.parsed_acts = Some(perceived(&sys_trace));
        }
        self.push_turn(Speaker::System, &sys_output, sys_trace);
        Ok(TurnResult {
            sys_output: Some(sys_output),
            user_output,
            session_over: false,
            reward,
        })
    }

    fn push_turn(&mut self, speaker: Speaker, output: &Message, trace: StageTrace) {
        self.turns.push(Turn {
            turn_index: self.turns.len(),
            speaker,
            utterance: output.to_string(),
            true_acts: trace.policy.clone(),
            parsed_acts: None,
            belief_snapshot: if speaker == Speaker::System { trace.dst.clone() } else { None },
            trace,
        });
    }

    /// Closes the dialogue into a scored log. `error` marks an aborted run.
    pub fn into_log(self, episode: u64, seed: u64, error: Option<String>) -> DialogueLog {
        let outcome = match (&error, self.said_bye) {
            (Some(_), _) => Outcome::FailureOther,
            (None, true) => Outcome::Success,
            (None, false) if self.user_turns >= self.max_turns => Outcome::FailureMaxTurns,
            (None, false) => Outcome::FailureOther,
        };
        let mut log = DialogueLog {
            episode,
            seed,
            max_turns: self.max_turns,
            goal: self.goal,
            turns: self.turns,
            outcome,
            evaluation: EvaluationResult {
                success: false,
                inform_precision: 0.0,
                inform_recall: 0.0,
                inform_f1: 0.0,
                turn_count: 0,
                reward_total: 0.0,
            },
            error,
        };
        log.evaluation = evaluate(&log, &self.pack.database, &self.reward);
        log
    }
}

/// Acts the listener recovered from the speaker's output.
fn perceived(trace: &StageTrace) -> Vec<DialogueAct> {
    match (&trace.nlu, &trace.input) {
        (Some(acts), _) => acts.clone(),
        (None, Message::Acts(acts)) => acts.clone(),
        (None, Message::Text(_)) => Vec::new(),
    }
}

/// Runs one seeded episode. Errors end the dialogue with `failure_other`.
fn run_episode(pack: &Arc<DomainPack>, resolved: &Resolved, episode: u64, seed: u64) -> DialogueLog {
    let config = &resolved.config;
    let [mut goal_rng, sys_rng, user_rng] = episode_rngs(seed);
    let system = system_agent(pack.clone(), &config.system, resolved.system_noise.clone(), sys_rng);
    let user = user_agent(
        pack.clone(),
        &config.system,
        &config.user,
        resolved.user_noise.clone(),
        user_rng,
    );
    let goal = generate_goal(&pack.database, &mut goal_rng, &config.user.goal);
    let (goal, goal_error) = match goal {
        Ok(goal) => (goal, None),
        Err(e) => (UserGoal::default(), Some(format!("goal generation failed: {e}"))),
    };
    let mut session = BiSession::new(system, user, pack.clone(), goal, config.max_turns, config.reward);
    if let Some(error) = goal_error {
        return session.into_log(episode, seed, Some(error));
    }
    let mut observation = session.opening();
    loop {
        match session.next_turn(&observation) {
            Ok(TurnResult { session_over: true, .. }) => return session.into_log(episode, seed, None),
            Ok(TurnResult {
                sys_output: Some(output),
                ..
            }) => observation = output,
            Ok(_) => unreachable!("an ongoing session always has a system reply"),
            Err(e) => return session.into_log(episode, seed, Some(e.to_string())),
        }
    }
}

/// Runs `n` episodes; episode `i` uses seed `base_seed + i`. The corpus is
/// ordered by episode index whatever the worker count.
pub fn run_episodes(
    pack: Arc<DomainPack>,
    config: &SimulationConfig,
    n: usize,
    base_seed: u64,
    workers: usize,
) -> Result<Vec<DialogueLog>, ConfigError> {
    if n == 0 {
        return Err(invalid("episodes", "must be at least 1"));
    }
    let resolved = config.resolve(&pack)?;
    let run = |i: usize| run_episode(&pack, &resolved, i as u64, base_seed.wrapping_add(i as u64));
    if workers <= 1 {
        return Ok((0..n).map(run).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid("workers", e.to_string()))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(run).collect()))
}

/// Goals used by a corpus, for checking that two runs saw the same users.
pub fn goal_sequence(corpus: &[DialogueLog]) -> Vec<&UserGoal> {
    corpus.iter().map(|l| &l.goal).collect()
}

/// Slots requested anywhere in a goal.
pub fn requested_slots(goal: &UserGoal) -> BTreeSet<&str> {
    goal.requested_pairs().map(|(_, s)| s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pack() -> Arc<DomainPack> {
        DomainPack::bundled().shared()
    }

    fn agents(pack: &Arc<DomainPack>, config: &SimulationConfig) -> (PipelineAgent, PipelineAgent) {
        let [_, s, u] = episode_rngs(0);
        let sys = system_agent(pack.clone(), &config.system, NoiseConfig::default(), s);
        let user = user_agent(pack.clone(), &config.system, &config.user, NoiseConfig::default(), u);
        (sys, user)
    }

    fn one_domain_goal(pack: &DomainPack, seed: u64) -> UserGoal {
        let config = GoalConfig {
            min_domains: 1,
            max_domains: 1,
            ..Default::default()
        };
        generate_goal(&pack.database, &mut ChaCha8Rng::seed_from_u64(seed), &config).unwrap()
    }

    #[test]
    fn noiseless_single_domain_dialogue_succeeds() {
        let pack = pack();
        let config = SimulationConfig::default();
        let (sys, user) = agents(&pack, &config);
        let goal = one_domain_goal(&pack, 5);
        let mut session = BiSession::new(sys, user, pack.clone(), goal, 20, RewardConfig::default());
        let mut obs = session.opening();
        assert_eq!(obs, Message::Text(String::new()));
        let mut rewards = 0.0;
        loop {
            let r = session.next_turn(&obs).unwrap();
            rewards += r.reward;
            if r.session_over {
                assert!(r.sys_output.is_none());
                break;
            }
            obs = r.sys_output.unwrap();
        }
        assert!(matches!(session.next_turn(&obs), Err(SessionError::Terminated)));
        let total = session.reward_total();
        let log = session.into_log(0, 0, None);
        assert_eq!(log.outcome, Outcome::Success);
        assert!(log.evaluation.success);
        assert_eq!(log.evaluation.inform_f1, 1.0);
        assert_eq!(rewards, total);
        assert_eq!(total, log.evaluation.reward_total);
        // speakers alternate, user first, indices increase
        for (i, t) in log.turns.iter().enumerate() {
            assert_eq!(t.turn_index, i);
            assert_eq!(t.speaker, if i % 2 == 0 { Speaker::User } else { Speaker::System });
        }
    }

    #[test]
    fn never_answering_system_hits_the_limit() {
        let pack = pack();
        let mut config = SimulationConfig::default();
        config.system.withheld_slots = pack
            .database
            .schemas()
            .flat_map(|s| s.requestable_slots.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let (sys, user) = agents(&pack, &config);
        let goal = one_domain_goal(&pack, 9);
        let mut session = BiSession::new(sys, user, pack.clone(), goal, 20, RewardConfig::default());
        let mut obs = session.opening();
        let mut user_turns = 0;
        loop {
            let r = session.next_turn(&obs).unwrap();
            user_turns += 1;
            if r.session_over {
                break;
            }
            obs = r.sys_output.unwrap();
        }
        assert_eq!(user_turns, 20);
        let log = session.into_log(0, 0, None);
        assert_eq!(log.outcome, Outcome::FailureMaxTurns);
        assert_eq!(log.evaluation.reward_total, -40.0);
    }

    #[test]
    fn batches_are_reproducible_and_order_independent() {
        let pack = pack();
        let config = SimulationConfig::default();
        let serial = run_episodes(pack.clone(), &config, 12, 7, 1).unwrap();
        let parallel = run_episodes(pack.clone(), &config, 12, 7, 4).unwrap();
        assert_eq!(serial, parallel);
        assert!(serial.iter().all(|l| l.evaluation.success));
        assert_eq!(serial.iter().map(|l| l.seed).collect::<Vec<_>>(), (7..19).collect::<Vec<_>>());
    }

    #[test]
    fn goals_do_not_depend_on_the_system() {
        let pack = pack();
        let a = SimulationConfig::default();
        let mut b = SimulationConfig::default();
        b.system.noise = NoiseConfig::domain_confusion(0.3);
        b.system.withheld_slots = vec!["Phone".into()];
        let ca = run_episodes(pack.clone(), &a, 20, 100, 1).unwrap();
        let cb = run_episodes(pack.clone(), &b, 20, 100, 1).unwrap();
        assert_eq!(goal_sequence(&ca), goal_sequence(&cb));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let pack = pack();
        let config = SimulationConfig {
            max_turns: 0,
            ..Default::default()
        };
        assert!(config.validate(&pack).is_err());
        let mut config = SimulationConfig::default();
        config.system.withheld_slots = vec!["Colour".into()];
        assert!(config.validate(&pack).is_err());
        assert!(run_episodes(pack, &SimulationConfig::default(), 0, 0, 1).is_err());
    }
}
