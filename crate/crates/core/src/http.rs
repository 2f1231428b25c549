//! Minimal blocking JSON-over-HTTP helper shared by the model clients.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum HttpError {
    #[error("request to {url} failed: {reason}")]
    Transport { url: String, reason: String },
    #[error("{url} answered HTTP {status}")]
    Status { url: String, status: u16 },
    #[error("cannot decode response from {url}: {reason}")]
    Decode { url: String, reason: String },
}

#[derive(Clone)]
pub(crate) struct JsonClient {
    agent: ureq::Agent,
    base_url: String,
}

impl JsonClient {
    pub(crate) fn new(base_url: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            base_url: base_url.trim_end_matches('/').to_string(),
        }
    }

    pub(crate) fn post<B: Serialize, R: DeserializeOwned>(
        &self,
        path: &str,
        body: &B,
    ) -> Result<R, HttpError> {
        let url = format!("{}{}", self.base_url, path);
        let mut response = self
            .agent
            .post(&url)
            .send_json(body)
            .map_err(|e| HttpError::Transport {
                url: url.clone(),
                reason: e.to_string(),
            })?;
        let status = response.status().as_u16();
        if status != 200 {
            return Err(HttpError::Status { url, status });
        }
        response
            .body_mut()
            .read_json::<R>()
            .map_err(|e| HttpError::Decode {
                url,
                reason: e.to_string(),
            })
    }
}
