use axum::extract::multipart::MultipartError;
use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use facmon_core::Error;

/// Wire form of every failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub http_status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

/// HTTP status for a domain error code. Total: unlisted codes map to 500.
pub fn status_for(code: &str) -> StatusCode {
    match code {
        "UNAUTHENTICATED" | "INVALID_CREDENTIALS" => StatusCode::UNAUTHORIZED,
        "FORBIDDEN" | "ACCOUNT_INACTIVE" => StatusCode::FORBIDDEN,
        "PAYLOAD_TOO_LARGE" => StatusCode::PAYLOAD_TOO_LARGE,
        "UNSUPPORTED_MEDIA_TYPE" => StatusCode::UNSUPPORTED_MEDIA_TYPE,
        "NOT_FOUND" => StatusCode::NOT_FOUND,
        "METHOD_NOT_ALLOWED" => StatusCode::METHOD_NOT_ALLOWED,
        "SAME_LOCATION" | "WRONG_STATE" | "ILLEGAL_TRANSITION" | "CONFLICT" | "TERMINAL_ITEM" | "NOT_DAMAGED"
        | "REPAIR_ALREADY_OPEN" | "ALREADY_COMPLETED" | "ALREADY_SEEDED" | "CONSTRAINT_VIOLATION"
        | "REFERENCE_IN_USE" | "DATA_DIR_LOCKED" => StatusCode::CONFLICT,
        "TOO_LONG" | "WEAK_PASSWORD" | "MISSING_WORK_UNIT" | "HEADER_MISMATCH" => StatusCode::UNPROCESSABLE_ENTITY,
        c if c.starts_with("UNKNOWN_") => StatusCode::NOT_FOUND,
        c if c.starts_with("DUPLICATE_") => StatusCode::CONFLICT,
        c if c.starts_with("INVALID_") || c.starts_with("EMPTY_") => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl ApiError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        ApiError {
            http_status: status_for(code).as_u16(),
            code: code.to_string(),
            message: message.into(),
            details: None,
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        ApiError::new("INVALID_INPUT", message)
    }

    pub fn too_large(limit: usize) -> Self {
        let mut e = ApiError::new("PAYLOAD_TOO_LARGE", format!("upload exceeds {limit} bytes"));
        e.details = Some(json!({ "max_upload_bytes": limit }));
        e
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let mut api = ApiError::new(err.code(), err.to_string());
        if let Error::ImportRow { row, source } = &err {
            api.details = Some(json!({ "row": row, "cause": source.root().code() }));
        }
        if api.http_status >= 500 {
            tracing::error!(error = %err, "request failed");
        }
        api
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        match rejection.status() {
            StatusCode::PAYLOAD_TOO_LARGE => ApiError::new("PAYLOAD_TOO_LARGE", rejection.body_text()),
            StatusCode::UNSUPPORTED_MEDIA_TYPE => ApiError::new("UNSUPPORTED_MEDIA_TYPE", rejection.body_text()),
            _ => ApiError::invalid(rejection.body_text()),
        }
    }
}

impl From<QueryRejection> for ApiError {
    fn from(rejection: QueryRejection) -> Self {
        ApiError::invalid(rejection.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(rejection: PathRejection) -> Self {
        ApiError::invalid(rejection.body_text())
    }
}

impl From<MultipartError> for ApiError {
    fn from(err: MultipartError) -> Self {
        if err.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::new("PAYLOAD_TOO_LARGE", err.body_text())
        } else {
            ApiError::invalid(err.body_text())
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, axum::Json(self)).into_response()
    }
}

pub type ApiResult<T> = std::result::Result<T, ApiError>;
