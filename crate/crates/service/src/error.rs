use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use lumiedit_core::Error;
use serde::Serialize;

/// Error body: `{"error": kind, "message": ..., "field": ...}`.
#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, error: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            error,
            message: message.into(),
            field: None,
        }
    }

    pub fn bad_request(field: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError {
            field: Some(field.into()),
            ..ApiError::new(StatusCode::BAD_REQUEST, "invalid", message)
        }
    }

    pub fn stale(expected: u64, current: u64) -> Self {
        ApiError {
            field: Some("expected_revision".into()),
            ..ApiError::new(
                StatusCode::CONFLICT,
                "stale_revision",
                format!("expected revision {expected}, scene is at {current}"),
            )
        }
    }

    pub fn busy() -> Self {
        ApiError::new(
            StatusCode::TOO_MANY_REQUESTS,
            "busy",
            "another render or refinement is running",
        )
    }

    pub fn not_found(id: &str) -> Self {
        ApiError {
            field: Some("id".into()),
            ..ApiError::new(StatusCode::NOT_FOUND, "unknown_light", format!("unknown light id {id}"))
        }
    }

    /// Body that failed to deserialize, with the JSON path of the offending
    /// value.
    pub fn body(e: serde_path_to_error::Error<serde_json::Error>) -> Self {
        let path = e.path().to_string();
        ApiError::bad_request(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, field) = match &e {
            Error::Json { context, .. } => (StatusCode::BAD_REQUEST, Some(context.clone())),
            Error::Invalid { field, .. } | Error::DimensionMismatch { field, .. } | Error::NonFinite { field, .. } => {
                (StatusCode::BAD_REQUEST, Some(field.clone()))
            }
            Error::OutOfRange { param, .. } => (StatusCode::UNPROCESSABLE_ENTITY, Some(param.clone())),
            Error::UnknownLight(_) => (StatusCode::NOT_FOUND, Some("id".into())),
            Error::Io { .. } => (StatusCode::INTERNAL_SERVER_ERROR, None),
            Error::Pfm { .. } => (StatusCode::BAD_REQUEST, None),
            // geometry that cannot emit, and optimizations with nothing to do
            _ => (StatusCode::UNPROCESSABLE_ENTITY, None),
        };
        ApiError {
            status,
            error: e.kind(),
            message: e.to_string(),
            field,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}
