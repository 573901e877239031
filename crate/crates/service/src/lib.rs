//! HTTP/JSON session service. Sessions live in memory only; each session's
//! messages are handled strictly one at a time.

mod error;
pub mod session;

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Request, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use eliza_api::{
    CreateSession, EditRequest, EditResponse, Health, MessageReply, PostMessage, ScriptInfo, SessionCreated,
    Transcript, TuringRequest, TuringResponse,
};
use eliza_core::construction::{decode, MechanismConfig};
use eliza_core::datagen::{self, ScriptSpec};
use eliza_core::engine::{self, MachineOutcome, Role};
use eliza_core::script::NullCycleMode;
use eliza_core::{fixtures, Script, Word};
use serde::de::DeserializeOwned;
use tokio::net::TcpListener;
use tokio::sync::Mutex;
use uuid::Uuid;

pub use error::ServiceError;
pub use session::Session;

/// Scripts a session can be opened on, by id.
#[derive(Debug, Clone)]
pub struct Scripts {
    pub default_id: String,
    scripts: BTreeMap<String, Arc<Script>>,
}

impl Scripts {
    /// The given default script plus the built-in fixtures. Without a
    /// default, the script sampled with default settings is used as `sampled`.
    pub fn with_fixtures(default: Option<(String, Script)>) -> Self {
        let mut scripts = BTreeMap::new();
        scripts.insert("increment".to_string(), Arc::new(fixtures::increment()));
        scripts.insert("parity".to_string(), Arc::new(fixtures::parity()));
        scripts.insert("null_cycling_on_input".to_string(), Arc::new(fixtures::null_cycling(NullCycleMode::OnInput)));
        scripts
            .insert("null_cycling_on_response".to_string(), Arc::new(fixtures::null_cycling(NullCycleMode::OnResponse)));
        let (default_id, script) = default.unwrap_or_else(|| {
            ("sampled".to_string(), datagen::sample_script(&ScriptSpec::default()).expect("default spec is valid"))
        });
        scripts.insert(default_id.clone(), Arc::new(script));
        Scripts { default_id, scripts }
    }

    pub fn get(&self, id: &str) -> Option<&Arc<Script>> {
        self.scripts.get(id)
    }
}

#[derive(Clone)]
pub struct AppState {
    scripts: Arc<Scripts>,
    sessions: Arc<RwLock<HashMap<Uuid, Arc<Mutex<Session>>>>>,
}

impl AppState {
    pub fn new(scripts: Scripts) -> Self {
        AppState { scripts: Arc::new(scripts), sessions: Arc::default() }
    }

    fn session(&self, id: Uuid) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions.read().expect("session map poisoned").get(&id).cloned().ok_or(ServiceError::SessionNotFound(id))
    }
}

/// JSON body whose rejections become 400 responses with the parse error.
pub struct Body<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for Body<T> {
    type Rejection = ServiceError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| Body(v))
            .map_err(|e: JsonRejection| ServiceError::BadRequest(e.body_text()))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/scripts", get(list_scripts))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/edit", post(post_edit))
        .route("/turing", post(turing))
        .with_state(state)
}

pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

fn parse_id(id: &str) -> Result<Uuid, ServiceError> {
    // Ids that are not UUIDs cannot name a session.
    id.parse().map_err(|_| ServiceError::SessionNotFound(Uuid::nil()))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok".into(), version: env!("CARGO_PKG_VERSION").into() })
}

async fn list_scripts(State(st): State<AppState>) -> Json<Vec<ScriptInfo>> {
    Json(
        st.scripts
            .scripts
            .iter()
            .map(|(id, s)| ScriptInfo {
                id: id.clone(),
                n_templates: s.templates.len(),
                n_pretransforms: s.pretransforms.len(),
                vocab: s.vocab.clone(),
                sha256: s.sha256(),
            })
            .collect(),
    )
}

async fn create_session(
    State(st): State<AppState>,
    Body(req): Body<CreateSession>,
) -> Result<Json<SessionCreated>, ServiceError> {
    let script_id = req.script_id.unwrap_or_else(|| st.scripts.default_id.clone());
    let script = st.scripts.get(&script_id).ok_or_else(|| ServiceError::ScriptNotFound(script_id.clone()))?.clone();
    let vocab = script.vocab.clone();
    let session = Session::new(script_id.clone(), script, req.mechanism_config, req.backend)?;
    let id = session.id;
    st.sessions.write().expect("session map poisoned").insert(id, Arc::new(Mutex::new(session)));
    tracing::debug!(%id, script = %script_id, "session created");
    Ok(Json(SessionCreated { session_id: id, script_id, vocab }))
}

async fn get_session(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<Transcript>, ServiceError> {
    let session = st.session(parse_id(&id)?)?;
    let guard = session.lock().await;
    Ok(Json(guard.transcript()))
}

async fn post_message(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Body(req): Body<PostMessage>,
) -> Result<Json<MessageReply>, ServiceError> {
    let session = st.session(parse_id(&id)?)?;
    // Held across the blocking call so messages of one session are serialized.
    let mut guard = session.lock_owned().await;
    blocking(move || guard.send(req.tokens)).await.map(Json)
}

async fn post_edit(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Body(req): Body<EditRequest>,
) -> Result<Json<EditResponse>, ServiceError> {
    let session = st.session(parse_id(&id)?)?;
    let guard = session.lock_owned().await;
    blocking(move || guard.edit(req.turn_index, req.tokens)).await.map(Json)
}

async fn turing(Body(req): Body<TuringRequest>) -> Result<Json<TuringResponse>, ServiceError> {
    blocking(move || run_turing(&req)).await.map(Json)
}

pub fn run_turing(req: &TuringRequest) -> Result<TuringResponse, ServiceError> {
    let script = fixtures::turing(&req.fixture).ok_or_else(|| ServiceError::ScriptNotFound(req.fixture.clone()))?;
    session::validate_tokens(&script, &req.tape)?;
    let (steps, trace) = match engine::run_machine(&script, &req.tape, req.budget) {
        MachineOutcome::Halted { steps, trace, .. } => (steps, trace),
        MachineOutcome::Budget { trace } => {
            return Err(ServiceError::Unprocessable(format!(
                "budget of {} cycles exhausted after {} tapes",
                req.budget,
                trace.len()
            )))
        }
    };
    let turns = vec![req.tape.clone()];
    let gold: Vec<Vec<Word>> = engine::run_conversation(&script, &turns)
        .map_err(|e| ServiceError::Unprocessable(e.to_string()))?
        .into_iter()
        .filter(|t| t.role == Role::Eliza)
        .map(|t| t.tokens)
        .collect();
    let construction: Vec<Vec<Word>> = decode(&MechanismConfig::faithful(), &script, &turns, session::DECODE_BUDGET)
        .map_err(|e| ServiceError::Unprocessable(format!("construction: {e}")))?
        .eliza_turns()
        .map(<[Word]>::to_vec)
        .collect();
    Ok(TuringResponse { steps, trace, equal: construction == gold, construction_trace: construction })
}
