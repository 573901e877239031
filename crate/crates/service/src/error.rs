use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use eliza_api::ErrorBody;
use thiserror::Error;
use uuid::Uuid;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("session {0} not found")]
    SessionNotFound(Uuid),
    #[error("script `{0}` not found")]
    ScriptNotFound(String),
    #[error("{0}")]
    BadRequest(String),
    /// Well-formed input the engine or construction cannot process.
    #[error("{0}")]
    Unprocessable(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::SessionNotFound(_) | ServiceError::ScriptNotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        if let ServiceError::Internal(e) = &self {
            tracing::error!("{e}");
        }
        (self.status(), Json(ErrorBody { error: self.to_string() })).into_response()
    }
}
