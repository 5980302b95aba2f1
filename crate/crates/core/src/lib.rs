//! Rule-based task-oriented dialogue pipelines: assemble agents from NLU,
//! DST, policy and NLG stages, simulate conversations against an agenda-based
//! user, analyze the resulting corpora, and debug live sessions over HTTP.

pub mod act;
pub mod analyzer;
pub mod belief;
pub mod dialogue;
pub mod ontology;
pub mod pack;
pub mod pipeline;
pub mod registry;
pub mod run;
pub mod service;
pub mod session;
pub mod simulator;

pub use act::{format_act_string, parse_act_string, ActError, DialogueAct, Intent};
pub use belief::{BeliefState, DomainBelief};
pub use dialogue::{DialogueLog, Message, Outcome, Speaker, Turn};
pub use pack::DomainPack;
pub use pipeline::{PipelineAgent, Stage, StageOverride, StageTrace};
