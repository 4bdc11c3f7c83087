// SPDX-License-Identifier: MIT OR Apache-2.0

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use lancet_core::wire::ErrorBody;
use lancet_core::{Error, ErrorCategory};

/// An error rendered as a JSON [`ErrorBody`] with a matching status.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody {
                code: "BadRequest".into(),
                category: ErrorCategory::Validation,
                message: message.into(),
            },
        }
    }

    pub fn unknown_dictionary(id: &str) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            body: ErrorBody {
                code: "UnknownDictionary".into(),
                category: ErrorCategory::Validation,
                message: format!("no dictionary registered under {id:?}"),
            },
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            body: ErrorBody {
                code: "Internal".into(),
                category: ErrorCategory::Numeric,
                message: message.into(),
            },
        }
    }
}

/// Status code for an engine error.
pub fn status_for(e: &Error) -> StatusCode {
    match e.category() {
        ErrorCategory::Validation => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorCategory::Transport => StatusCode::BAD_GATEWAY,
        ErrorCategory::Numeric | ErrorCategory::Io => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self {
            status: status_for(&e),
            body: ErrorBody::from(&e),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = %self.body.code, "{}", self.body.message);
        } else {
            tracing::debug!(code = %self.body.code, "{}", self.body.message);
        }
        (self.status, Json(self.body)).into_response()
    }
}
