//! Client for an external machine-translation service.
//!
//! The service receives `POST <endpoint>` with a JSON body
//! `{"text": ..., "source": "en", "target": "fr"}` and answers
//! `{"translation": ...}`. An optional bearer token is sent in the
//! `Authorization` header.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::backend::{BackendError, TranslationBackend};
use crate::corpus::Language;

pub const ENDPOINT_ENV: &str = "XLING_MT_ENDPOINT";
pub const TOKEN_ENV: &str = "XLING_MT_TOKEN";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Serialize)]
struct Request<'a> {
    text: &'a str,
    source: Language,
    target: Language,
}

#[derive(Deserialize)]
struct Response {
    translation: String,
}

pub struct HttpBackend {
    endpoint: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, token: Option<String>, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            token,
            client,
        })
    }

    /// Reads the endpoint and token from `XLING_MT_ENDPOINT` / `XLING_MT_TOKEN`.
    pub fn from_env(timeout: Duration) -> Result<Self, BackendError> {
        let endpoint = std::env::var(ENDPOINT_ENV)
            .map_err(|_| BackendError::Other(format!("{ENDPOINT_ENV} is not set")))?;
        Self::new(endpoint, std::env::var(TOKEN_ENV).ok(), timeout)
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl TranslationBackend for HttpBackend {
    fn name(&self) -> String {
        format!("http({})", self.endpoint)
    }

    fn translate(&self, text: &str, source: Language, target: Language) -> Result<String, BackendError> {
        if source == target {
            return Ok(text.to_string());
        }
        let mut request = self.client.post(&self.endpoint).json(&Request { text, source, target });
        if let Some(token) = &self.token {
            request = request.bearer_auth(token);
        }
        let response = request
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(BackendError::Status {
                status: status.as_u16(),
                body,
            });
        }
        let parsed: Response = response
            .json()
            .map_err(|e| BackendError::InvalidResponse(e.to_string()))?;
        Ok(parsed.translation)
    }
}
