use axum::body::Bytes;
use axum::extract::{FromRequest, FromRequestParts, Request};
use axum::http::request::Parts;
use serde::de::DeserializeOwned;

use crate::error::ApiError;

pub const COLLABORATOR_HEADER: &str = "x-collaborator";

/// JSON request body whose rejections use the API error format.
pub struct JsonBody<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for JsonBody<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let bytes = Bytes::from_request(req, state).await.map_err(|e| ApiError::malformed(e.body_text()))?;
        serde_json::from_slice(&bytes).map(JsonBody).map_err(|e| ApiError::malformed(e.to_string()))
    }
}

/// Acting collaborator, taken from the trusted `X-Collaborator` header.
pub struct Collaborator(pub String);

impl<S: Send + Sync> FromRequestParts<S> for Collaborator {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, _state: &S) -> Result<Self, Self::Rejection> {
        let value = parts
            .headers
            .get(COLLABORATOR_HEADER)
            .ok_or_else(|| ApiError::malformed("missing X-Collaborator header"))?;
        let value = value.to_str().map_err(|_| ApiError::malformed("X-Collaborator is not text"))?;
        Ok(Collaborator(value.trim().to_string()))
    }
}
