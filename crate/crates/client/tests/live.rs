use eliza_api::{Backend, CreateSession, Role, TuringRequest};
use eliza_client::Client;
use eliza_core::word::words;
use eliza_service::{serve, AppState, Scripts};
use reqwest::StatusCode;
use uuid::Uuid;

async fn spawn() -> Client {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve(listener, AppState::new(Scripts::with_fixtures(None))));
    Client::new(format!("http://{addr}/"))
}

#[tokio::test]
async fn session_flow() {
    let client = spawn().await;
    assert_eq!(client.health().await.unwrap().status, "ok");
    let req = CreateSession { script_id: Some("parity".into()), backend: Backend::Construction, ..Default::default() };
    let s = client.create_session(&req).await.unwrap();
    assert_eq!(s.script_id, "parity");
    let reply = client.send(s.session_id, words("x x x $")).await.unwrap();
    assert!(reply.divergence.equal);
    assert_eq!(reply.reply.last(), Some(&eliza_api::Word::new("o")));
    let t = client.transcript(s.session_id).await.unwrap();
    assert_eq!(t.turns.first().unwrap().role, Role::User);
    assert_eq!(t.turns.len(), reply.turns.len());
}

#[tokio::test]
async fn api_errors_carry_status_and_message() {
    let client = spawn().await;
    let err = client.transcript(Uuid::nil()).await.unwrap_err();
    assert_eq!(err.status(), Some(StatusCode::NOT_FOUND));
    assert!(err.to_string().contains("not found"));

    let s = client.create_session(&CreateSession::default()).await.unwrap();
    let err = client.send(s.session_id, words("zzz")).await.unwrap_err();
    assert_eq!(err.status(), Some(StatusCode::BAD_REQUEST));
    assert!(err.to_string().contains("zzz"));
}

#[tokio::test]
async fn turing_over_http() {
    let client = spawn().await;
    let r = client
        .turing(&TuringRequest { fixture: "parity".into(), tape: words("x x $"), budget: 50 })
        .await
        .unwrap();
    assert_eq!(r.trace.last().unwrap(), &words("$"));
    assert!(r.equal);
}

#[tokio::test]
async fn unreachable_service() {
    let client = Client::new("http://127.0.0.1:9");
    let err = client.health().await.unwrap_err();
    assert!(err.status().is_none());
    assert!(err.to_string().contains("127.0.0.1:9"));
}
