use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use eliza_api::*;
use eliza_core::engine;
use eliza_core::fixtures;
use eliza_core::word::words;
use eliza_service::{router, AppState, Scripts};
use http_body_util::BodyExt;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(AppState::new(Scripts::with_fixtures(None)))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn parse<T: DeserializeOwned>(v: Value) -> T {
    serde_json::from_value(v).unwrap()
}

async fn open(app: &Router, body: Value) -> SessionCreated {
    let (status, v) = call(app, Method::POST, "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    parse(v)
}

#[tokio::test]
async fn message_round_trip() {
    let app = app();
    let s = open(&app, json!({})).await;
    let uri = format!("/sessions/{}/messages", s.session_id);
    let first = s.vocab[0].as_str().to_string();
    let (status, v) = call(&app, Method::POST, &uri, Some(json!({ "tokens": [first, first] }))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let reply: MessageReply = parse(v);
    assert!(reply.divergence.equal);
    assert_eq!(reply.turns[0].role, Role::User);
    assert_eq!(reply.reply, reply.turns.last().unwrap().tokens);
    assert_eq!(reply.trace.states.len(), reply.trace.labels.len());
    assert!(!reply.trace.matched_template.is_empty());

    let (status, v) = call(&app, Method::GET, &format!("/sessions/{}", s.session_id), None).await;
    assert_eq!(status, StatusCode::OK);
    let t: Transcript = parse(v);
    assert_eq!(t.turns, reply.turns);
}

#[tokio::test]
async fn replies_match_the_engine_transcript() {
    let app = app();
    let s = open(&app, json!({"script_id": "null_cycling_on_input", "backend": "construction"})).await;
    let uri = format!("/sessions/{}/messages", s.session_id);
    let mut replies = Vec::new();
    for input in fixtures::NULL_CYCLING_TURNS {
        let (status, v) = call(&app, Method::POST, &uri, Some(json!({ "tokens": words(input) }))).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        let r: MessageReply = parse(v);
        assert!(r.divergence.equal);
        replies.push(r.reply);
    }
    let script = fixtures::null_cycling(eliza_core::script::NullCycleMode::OnInput);
    let inputs: Vec<_> = fixtures::NULL_CYCLING_TURNS.iter().map(|t| words(t)).collect();
    let gold: Vec<_> = engine::run_conversation(&script, &inputs)
        .unwrap()
        .into_iter()
        .filter(|t| t.role == Role::Eliza)
        .map(|t| t.tokens)
        .collect();
    assert_eq!(replies, gold);
}

#[tokio::test]
async fn divergence_is_reported() {
    use eliza_core::construction::{decode, Copying, MechanismConfig};
    use eliza_core::datagen::{self, ConversationSpec};

    let cfg = MechanismConfig { copying: Copying::InductionHead { n: 1 }, ..Default::default() };
    let script = datagen::sample_script(&Default::default()).unwrap();
    let convs = datagen::generate(&script, &ConversationSpec { n_conversations: 20, ..Default::default() }).unwrap();
    let conv = convs
        .iter()
        .find(|c| {
            let d = decode(&cfg, &script, &c.user_turns(), 8192).unwrap();
            d.eliza_turns().map(<[Word]>::to_vec).collect::<Vec<_>>()
                != c.turns.iter().filter(|t| t.role == Role::Eliza).map(|t| t.tokens.clone()).collect::<Vec<_>>()
        })
        .expect("some conversation trips the induction head");

    let app = app();
    let s = open(&app, json!({ "mechanism_config": cfg })).await;
    let uri = format!("/sessions/{}/messages", s.session_id);
    let mut diverged = false;
    for input in conv.user_turns() {
        let (status, body) = call(&app, Method::POST, &uri, Some(json!({ "tokens": input }))).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        let r: MessageReply = parse(body);
        diverged |= !r.divergence.equal;
        assert_eq!(r.reply, r.divergence.engine_reply);
    }
    assert!(diverged);
}

#[tokio::test]
async fn errors() {
    let app = app();
    let (status, _) = call(&app, Method::GET, "/sessions/00000000-0000-0000-0000-000000000000", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, Method::GET, "/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, Method::POST, "/sessions", Some(json!({"script_id": "missing"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, v) = call(&app, Method::POST, "/sessions", Some(json!({"backend": 3}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("backend"), "{v}");
    let (status, _) =
        call(&app, Method::POST, "/sessions", Some(json!({"mechanism_config": {"memory": {"kind": "gridworld", "s": 0}}})))
            .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let s = open(&app, json!({"script_id": "parity"})).await;
    let uri = format!("/sessions/{}/messages", s.session_id);
    let (status, v) = call(&app, Method::POST, &uri, Some(json!({"tokens": ["x", "qq"]}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("qq"));
    let (status, _) = call(&app, Method::POST, &uri, Some(json!({"tokens": []}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, Method::POST, &uri, Some(json!({"words": ["x"]}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    // Rejected messages leave the transcript empty.
    let (_, v) = call(&app, Method::GET, &format!("/sessions/{}", s.session_id), None).await;
    assert_eq!(parse::<Transcript>(v).turns, vec![]);
}

#[tokio::test]
async fn edit_replays_suffix_without_changing_session() {
    let app = app();
    let s = open(&app, json!({})).await;
    let uri = format!("/sessions/{}/messages", s.session_id);
    let a = s.vocab[0].clone();
    for _ in 0..4 {
        let (status, v) = call(&app, Method::POST, &uri, Some(json!({ "tokens": [a, a] }))).await;
        assert_eq!(status, StatusCode::OK, "{v}");
    }
    let (_, v) = call(&app, Method::GET, &format!("/sessions/{}", s.session_id), None).await;
    let before: Transcript = parse(v);

    let edit_uri = format!("/sessions/{}/edit", s.session_id);
    let (status, v) =
        call(&app, Method::POST, &edit_uri, Some(json!({"turn_index": 1, "tokens": before.turns[1].tokens}))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let r: EditResponse = parse(v);
    assert!(r.changed.is_empty());
    assert_eq!(r.turns, before.turns);

    let (status, _) = call(&app, Method::POST, &edit_uri, Some(json!({"turn_index": 0, "tokens": [a]}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, Method::POST, &edit_uri, Some(json!({"turn_index": 99, "tokens": [a]}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (_, v) = call(&app, Method::GET, &format!("/sessions/{}", s.session_id), None).await;
    assert_eq!(parse::<Transcript>(v), before);
}

#[tokio::test]
async fn turing_endpoint() {
    let app = app();
    let (status, v) =
        call(&app, Method::POST, "/turing", Some(json!({"fixture": "increment", "tape": ["x", "$"], "budget": 100}))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let r: TuringResponse = parse(v);
    assert_eq!(r.steps, 1);
    assert_eq!(r.trace.last().unwrap(), &words("x x $"));
    assert!(r.equal);

    let (status, v) =
        call(&app, Method::POST, "/turing", Some(json!({"fixture": "increment", "tape": ["x", "$"], "budget": 0}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["error"].as_str().unwrap().contains("budget"));
    let (status, _) =
        call(&app, Method::POST, "/turing", Some(json!({"fixture": "busy", "tape": ["x"], "budget": 1}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn scripts_and_health() {
    let app = app();
    let (status, v) = call(&app, Method::GET, "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    let (_, v) = call(&app, Method::GET, "/scripts", None).await;
    let scripts: Vec<ScriptInfo> = parse(v);
    let ids: Vec<_> = scripts.iter().map(|s| s.id.as_str()).collect();
    assert!(ids.contains(&"sampled") && ids.contains(&"parity"));
}

#[tokio::test]
async fn concurrent_messages_are_serialized() {
    let app = app();
    let s = open(&app, json!({})).await;
    let uri = format!("/sessions/{}/messages", s.session_id);
    let tasks: Vec<_> = (0..8)
        .map(|i| {
            let (app, uri, w) = (app.clone(), uri.clone(), s.vocab[i].clone());
            tokio::spawn(async move { call(&app, Method::POST, &uri, Some(json!({ "tokens": [w] }))).await })
        })
        .collect();
    for t in tasks {
        assert_eq!(t.await.unwrap().0, StatusCode::OK);
    }
    let (_, v) = call(&app, Method::GET, &format!("/sessions/{}", s.session_id), None).await;
    let t: Transcript = parse(v);
    let users: Vec<_> = t.turns.iter().filter(|t| t.role == Role::User).map(|t| t.tokens.clone()).collect();
    assert_eq!(users.len(), 8);
    // Whatever the arrival order, the transcript is what the engine gives for it.
    let script = eliza_core::datagen::sample_script(&Default::default()).unwrap();
    assert_eq!(engine::run_conversation(&script, &users).unwrap(), t.turns);
}
