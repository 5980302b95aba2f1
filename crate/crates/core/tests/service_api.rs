mod common;

use axum::http::Method;
use serde_json::json;

use common::Api;

#[tokio::test]
async fn registry_lists_stages_and_packs() {
    let api = Api::new();
    let (status, body) = api.get("/registry").await;
    assert_eq!(status, 200);
    let names = |stage: &str| -> Vec<String> {
        body["stages"][stage]
            .as_array()
            .unwrap()
            .iter()
            .map(|o| o["name"].as_str().unwrap().to_string())
            .collect()
    };
    assert_eq!(names("nlu"), ["pattern", "none"]);
    assert_eq!(names("dst"), ["rule"]);
    assert_eq!(names("policy"), ["rule", "rule-no-phone"]);
    assert_eq!(names("nlg"), ["template", "none"]);
    assert_eq!(body["packs"][0]["name"], "synthetic");
    assert_eq!(body["packs"][0]["domains"], json!(["Hotel", "Restaurant", "Attraction", "Hospital"]));
}

#[tokio::test]
async fn schemas_cover_every_stage() {
    let (status, body) = Api::new().get("/schemas").await;
    assert_eq!(status, 200);
    for stage in ["nlu", "dst", "policy", "nlg"] {
        assert!(body[stage].is_object(), "{stage}");
    }
}

#[tokio::test]
async fn a_turn_returns_every_stage() {
    let api = Api::new();
    let id = api.create(json!({})).await;
    let (status, trace) = api
        .post(&format!("/sessions/{id}/turns"), &json!({"utterance": "What is the phone number of the hotel?"}))
        .await;
    assert_eq!(status, 200, "{trace}");
    assert_eq!(trace["nlu"], json!(["Request-Hotel-Phone-?"]));
    assert_eq!(trace["dst"]["active_domain"], "Hotel");
    assert_eq!(trace["policy"][0], "Recommend-Hotel-Name-Acorn Guest House");
    assert!(trace["nlg"].as_str().unwrap().contains("01223 771251"), "{trace}");
    assert!(trace.get("overridden").is_none());
}

#[tokio::test]
async fn acts_in_sessions_without_nlu() {
    let api = Api::new();
    let id = api.create(json!({"nlu": "none", "nlg": "none"})).await;
    let (status, trace) = api
        .post(&format!("/sessions/{id}/turns"), &json!({"acts": ["Request-Hospital-Phone-?"]}))
        .await;
    assert_eq!(status, 200, "{trace}");
    assert!(trace["nlu"].is_null());
    assert!(trace["nlg"].is_null());
    assert_eq!(trace["policy"].as_array().unwrap().len(), 2);

    let (status, err) = api.post(&format!("/sessions/{id}/turns"), &json!({"utterance": "hi"})).await;
    assert_eq!(status, 422);
    assert_eq!(err["code"], "type_mismatch");
}

#[tokio::test]
async fn override_reruns_downstream_and_replaces_history() {
    let api = Api::new();
    let id = api.create(json!({})).await;
    api.post(&format!("/sessions/{id}/turns"), &json!({"utterance": "I want a hotel in the north"}))
        .await;
    let (status, trace) = api
        .post(
            &format!("/sessions/{id}/turns/last/override"),
            &json!({"stage": "nlu", "output": ["Request-Restaurant-Phone-?"]}),
        )
        .await;
    assert_eq!(status, 200, "{trace}");
    assert_eq!(trace["overridden"], "nlu");
    assert_eq!(trace["dst"]["active_domain"], "Restaurant");
    assert_eq!(trace["policy"][0].as_str().unwrap().split('-').take(2).collect::<Vec<_>>(), ["Recommend", "Restaurant"]);

    let (status, history) = api.get(&format!("/sessions/{id}/history")).await;
    assert_eq!(status, 200);
    assert_eq!(history["turns"].as_array().unwrap().len(), 1);
    assert_eq!(history["turns"][0], trace);
}

#[tokio::test]
async fn override_errors() {
    let api = Api::new();
    let id = api.create(json!({})).await;
    let url = format!("/sessions/{id}/turns/last/override");

    let (status, err) = api.post(&url, &json!({"stage": "nlg", "output": "hello"})).await;
    assert_eq!((status, err["code"].as_str()), (409, Some("no_turn_to_correct")));

    api.post(&format!("/sessions/{id}/turns"), &json!({"utterance": "I want a hotel in the north"}))
        .await;
    let (_, before) = api.get(&format!("/sessions/{id}/history")).await;

    let (status, err) = api
        .post(&url, &json!({"stage": "dst", "output": {"domains": {"Hotel": {"constraints": {"Area": 3}}}}}))
        .await;
    assert_eq!(status, 422);
    assert_eq!(err["code"], "schema_validation");
    assert_eq!(err["field_path"], "output.domains.Hotel.constraints.Area");

    let (status, err) = api.post(&url, &json!({"stage": "nlu", "output": ["Shout-Hotel-Area-north"]})).await;
    assert_eq!((status, err["field_path"].as_str()), (422, Some("output[0]")));

    let (status, err) = api.post(&url, &json!({"stage": "parser", "output": []})).await;
    assert_eq!((status, err["field_path"].as_str()), (422, Some("stage")));

    // an act the template table cannot verbalize fails the NLG stage
    let (status, err) = api.post(&url, &json!({"stage": "policy", "output": ["Inform-Hotel-Colour-red"]})).await;
    assert_eq!((status, err["code"].as_str()), (422, Some("stage_failed")), "{err}");

    let (_, after) = api.get(&format!("/sessions/{id}/history")).await;
    assert_eq!(before, after, "failed overrides leave the session untouched");
}

#[tokio::test]
async fn session_lifecycle_errors() {
    let api = Api::new();
    let (status, err) = api.get("/sessions/not-a-session/history").await;
    assert_eq!((status, err["code"].as_str()), (404, Some("unknown_session")));

    let (status, err) = api.post("/sessions", &json!({"policy": "neural"})).await;
    assert_eq!(status, 400);
    assert_eq!(err["code"], "invalid_selection");
    assert_eq!(err["field_path"], "policy");

    let (status, err) = api.post("/sessions", &json!({"policy": 3})).await;
    assert_eq!((status, err["field_path"].as_str()), (422, Some("policy")));

    let (status, err) = api.call(Method::POST, "/sessions", Some("{not json")).await;
    assert_eq!(status, 422);
    assert_eq!(err["code"], "malformed_json");

    let id = api.create(json!({"policy": "rule-no-phone"})).await;
    let (status, body) = api.call(Method::DELETE, &format!("/sessions/{id}"), None).await;
    assert_eq!((status, body["status"].as_str()), (200, Some("closed")));
    let (status, err) = api.post(&format!("/sessions/{id}/turns"), &json!({"utterance": "hello"})).await;
    assert_eq!((status, err["code"].as_str()), (409, Some("wrong_status")));
    let (status, history) = api.get(&format!("/sessions/{id}/history")).await;
    assert_eq!((status, history["status"].as_str()), (200, Some("closed")));
    assert_eq!(history["selections"]["policy"], "rule-no-phone");
}

#[tokio::test]
async fn turn_body_needs_exactly_one_input() {
    let api = Api::new();
    let id = api.create(json!({})).await;
    let url = format!("/sessions/{id}/turns");
    let (status, _) = api.post(&url, &json!({})).await;
    assert_eq!(status, 422);
    let (status, _) = api.post(&url, &json!({"utterance": "hi", "acts": []})).await;
    assert_eq!(status, 422);
    let (status, err) = api.post(&url, &json!({"utterance": "hi", "speaker": "me"})).await;
    assert_eq!((status, err["code"].as_str()), (422, Some("schema_validation")));
}

#[tokio::test]
async fn empty_utterance_falls_back_to_greet() {
    let api = Api::new();
    let a = api.create(json!({})).await;
    let b = api.create(json!({})).await;
    assert_ne!(a, b);
    let (status, trace) = api.post(&format!("/sessions/{a}/turns"), &json!({"utterance": ""})).await;
    assert_eq!(status, 200);
    assert_eq!(trace["nlu"], json!([]));
    assert_eq!(trace["policy"], json!(["Greet-none-none-none"]));
    let (_, again) = api.post(&format!("/sessions/{b}/turns"), &json!({"utterance": ""})).await;
    assert_eq!(trace, again);
}
