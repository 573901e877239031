//! Thin typed wrapper over the session service routes.

use eliza_api::*;
use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;
use uuid::Uuid;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request to {url} failed: {source}")]
    Http {
        url: String,
        #[source]
        source: reqwest::Error,
    },
    /// The service answered with an error status.
    #[error("{status}: {message}")]
    Api { status: StatusCode, message: String },
}

impl ClientError {
    pub fn status(&self) -> Option<StatusCode> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            ClientError::Http { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Client { base: base.into().trim_end_matches('/').to_string(), http: reqwest::Client::new() }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn call<B: Serialize, T: DeserializeOwned>(
        &self,
        method: Method,
        path: &str,
        body: Option<&B>,
    ) -> Result<T, ClientError> {
        let url = format!("{}{}", self.base, path);
        let http = |source| ClientError::Http { url: url.clone(), source };
        let mut req = self.http.request(method, &url);
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().await.map_err(http)?;
        let status = resp.status();
        if status.is_success() {
            return resp.json().await.map_err(http);
        }
        let text = resp.text().await.map_err(http)?;
        let message = error_message(&text).unwrap_or(text);
        Err(ClientError::Api { status, message })
    }

    pub async fn health(&self) -> Result<Health, ClientError> {
        self.call::<(), _>(Method::GET, "/health", None).await
    }

    pub async fn scripts(&self) -> Result<Vec<ScriptInfo>, ClientError> {
        self.call::<(), _>(Method::GET, "/scripts", None).await
    }

    pub async fn create_session(&self, req: &CreateSession) -> Result<SessionCreated, ClientError> {
        self.call(Method::POST, "/sessions", Some(req)).await
    }

    pub async fn transcript(&self, id: Uuid) -> Result<Transcript, ClientError> {
        self.call::<(), _>(Method::GET, &format!("/sessions/{id}"), None).await
    }

    pub async fn send(&self, id: Uuid, tokens: Vec<Word>) -> Result<MessageReply, ClientError> {
        self.call(Method::POST, &format!("/sessions/{id}/messages"), Some(&PostMessage { tokens })).await
    }

    pub async fn edit(&self, id: Uuid, turn_index: usize, tokens: Vec<Word>) -> Result<EditResponse, ClientError> {
        self.call(Method::POST, &format!("/sessions/{id}/edit"), Some(&EditRequest { turn_index, tokens })).await
    }

    pub async fn turing(&self, req: &TuringRequest) -> Result<TuringResponse, ClientError> {
        self.call(Method::POST, "/turing", Some(req)).await
    }
}

fn error_message(text: &str) -> Option<String> {
    serde_json::from_str::<ErrorBody>(text).ok().map(|b| b.error)
}
