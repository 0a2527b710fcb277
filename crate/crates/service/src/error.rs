use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use socproto_core::{Error, ValidationReport};

/// Error body returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ValidationReport>,
    #[serde(skip)]
    pub status: u16,
}

pub fn status_for(error: &Error) -> StatusCode {
    match error {
        Error::InvalidId(_)
        | Error::ValidationFailed(_)
        | Error::CrossReference(_)
        | Error::IncompleteMapping(..)
        | Error::UnknownResource(_)
        | Error::UnassignedRole(_)
        | Error::UnknownRole(_)
        | Error::InvalidProposal(_)
        | Error::Malformed(_) => StatusCode::BAD_REQUEST,
        Error::NotFound { .. } | Error::UnknownCollaborator(_) => StatusCode::NOT_FOUND,
        Error::NotEnabled { .. }
        | Error::ContactViolation { .. }
        | Error::AdaptationInProgress(_)
        | Error::ProcessNotRunning(_)
        | Error::IllegalTransition { .. }
        | Error::MetaNotDecided(_)
        | Error::DuplicateId(_)
        | Error::ResourceConflict(_)
        | Error::ResourceInUse(..) => StatusCode::CONFLICT,
        Error::TransactionInvalid(_) | Error::MigrationMissing(_) => StatusCode::UNPROCESSABLE_ENTITY,
        Error::ReplayDivergence { .. } | Error::CorruptDocument(_) | Error::StorageFailure(_) => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
    }
}

impl ApiError {
    pub fn malformed(message: impl Into<String>) -> Self {
        Error::Malformed(message.into()).into()
    }
}

impl From<Error> for ApiError {
    fn from(error: Error) -> Self {
        Self {
            code: error.code().to_string(),
            message: error.to_string(),
            ids: error.offending_ids(),
            report: error.report().cloned(),
            status: status_for(&error).as_u16(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            tracing::error!(code = %self.code, message = %self.message, "request failed");
        }
        (status, Json(self)).into_response()
    }
}
