#![allow(dead_code)]

use std::collections::BTreeSet;

use axum::body::Body;
use axum::http::{Method, Request};
use axum::Router;
use http_body_util::BodyExt;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::Value;
use tower::ServiceExt;

use dialogue_forge::pipeline::{dst_update, pattern_nlu, rule_policy, template_nlg};
use dialogue_forge::registry::Registry;
use dialogue_forge::service::{router, AppState};
use dialogue_forge::{BeliefState, DialogueAct, DomainPack, Speaker, StageOverride};

/// In-process client for the service router.
pub struct Api {
    app: Router,
}

impl Api {
    pub fn new() -> Self {
        Api::with_registry(Registry::builtin())
    }

    pub fn with_registry(registry: Registry) -> Self {
        Api {
            app: router(AppState::new(registry), None),
        }
    }

    pub async fn call(&self, method: Method, uri: &str, body: Option<&str>) -> (u16, Value) {
        let request = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
            .unwrap();
        let response = self.app.clone().oneshot(request).await.unwrap();
        let status = response.status().as_u16();
        let bytes = response.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
        };
        (status, value)
    }

    pub async fn get(&self, uri: &str) -> (u16, Value) {
        self.call(Method::GET, uri, None).await
    }

    pub async fn post(&self, uri: &str, body: &Value) -> (u16, Value) {
        self.call(Method::POST, uri, Some(&body.to_string())).await
    }

    pub async fn create(&self, selection: Value) -> String {
        let (status, body) = self.post("/sessions", &selection).await;
        assert_eq!(status, 201, "{body}");
        body["id"].as_str().unwrap().to_string()
    }
}

/// A random user-side act the pack can verbalize.
pub fn random_user_act<R: Rng>(pack: &DomainPack, rng: &mut R) -> DialogueAct {
    let schema = pack.database.schemas().collect::<Vec<_>>().choose(rng).copied().unwrap().clone();
    if rng.gen_bool(0.6) {
        let (slot, values) = schema.informable_slots.iter().collect::<Vec<_>>().choose(rng).copied().unwrap();
        DialogueAct::inform(&schema.name, slot, values.choose(rng).unwrap()).unwrap()
    } else {
        let slot = schema.requestable_slots.choose(rng).unwrap();
        DialogueAct::request(&schema.name, slot).unwrap()
    }
}

pub fn random_user_acts<R: Rng>(pack: &DomainPack, rng: &mut R) -> Vec<DialogueAct> {
    let n = rng.gen_range(1..=2);
    let mut acts: Vec<DialogueAct> = Vec::new();
    while acts.len() < n {
        let act = random_user_act(pack, rng);
        if !acts.contains(&act) {
            acts.push(act);
        }
    }
    acts
}

pub fn random_utterance<R: Rng>(pack: &DomainPack, rng: &mut R) -> String {
    template_nlg(&pack.templates, &random_user_acts(pack, rng), Speaker::User).unwrap()
}

/// Random system acts with templates: a recommendation and an answer from
/// one entity.
pub fn random_system_acts<R: Rng>(pack: &DomainPack, rng: &mut R) -> Vec<DialogueAct> {
    let schema = pack.database.schemas().collect::<Vec<_>>().choose(rng).copied().unwrap().clone();
    let entity = pack.database.entities(&schema.name).unwrap().choose(rng).unwrap().clone();
    let key = &schema.key_slot;
    let slot = schema.requestable_slots.iter().filter(|s| *s != key).collect::<Vec<_>>().choose(rng).copied().unwrap();
    vec![
        DialogueAct::recommend(&schema.name, key, &entity[key.as_str()]).unwrap(),
        DialogueAct::inform(&schema.name, slot, &entity[slot.as_str()]).unwrap(),
    ]
}

/// Stage outputs of one system turn.
#[derive(Debug, Clone, PartialEq)]
pub struct Expected {
    pub nlu: Vec<DialogueAct>,
    pub dst: BeliefState,
    pub policy: Vec<DialogueAct>,
    pub nlg: String,
}

impl Expected {
    /// Compares against a serialized stage trace.
    pub fn check(&self, trace: &Value) -> Result<(), String> {
        let acts = |v: &Value| -> Vec<DialogueAct> { serde_json::from_value(v.clone()).unwrap() };
        let dst: BeliefState = serde_json::from_value(trace["dst"].clone()).map_err(|e| e.to_string())?;
        for (stage, ok) in [
            ("nlu", acts(&trace["nlu"]) == self.nlu),
            ("dst", dst == self.dst),
            ("policy", acts(&trace["policy"]) == self.policy),
            ("nlg", trace["nlg"].as_str() == Some(self.nlg.as_str())),
        ] {
            if !ok {
                return Err(format!("{stage} differs: expected {self:?}, got {trace}"));
            }
        }
        Ok(())
    }
}

/// The default system pipeline written as a fold over pure stage
/// functions, independent of the agent machinery.
#[derive(Debug, Clone)]
pub struct PureSystem<'a> {
    pub pack: &'a DomainPack,
    pub withheld: BTreeSet<String>,
    pub belief: BeliefState,
}

impl<'a> PureSystem<'a> {
    pub fn new(pack: &'a DomainPack, withheld: &[&str]) -> Self {
        PureSystem {
            pack,
            withheld: withheld.iter().map(|s| s.to_string()).collect(),
            belief: BeliefState::default(),
        }
    }

    /// One turn, optionally with a stage output replaced.
    pub fn step(&mut self, utterance: &str, replacement: Option<&StageOverride>) -> Expected {
        let db = &self.pack.database;
        let nlu = match replacement {
            Some(StageOverride::Nlu(acts)) => acts.clone(),
            _ => pattern_nlu(&self.pack.templates, utterance, Speaker::User),
        };
        let dst = match replacement {
            Some(StageOverride::Dst(state)) => state.clone(),
            _ => dst_update(&self.belief, &nlu, db).state,
        };
        let policy = match replacement {
            Some(StageOverride::Policy(acts)) => {
                self.belief = dst.clone();
                acts.clone()
            }
            _ => {
                let decision = rule_policy(&dst, db, &self.withheld).unwrap();
                self.belief = decision.state;
                decision.acts
            }
        };
        let nlg = match replacement {
            Some(StageOverride::Nlg(text)) => text.clone(),
            _ => template_nlg(&self.pack.templates, &policy, Speaker::System).unwrap(),
        };
        Expected { nlu, dst, policy, nlg }
    }
}
