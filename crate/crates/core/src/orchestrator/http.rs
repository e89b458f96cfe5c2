use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use ureq::Agent;

use super::providers::*;

/// One JSON-over-HTTP model endpoint with an optional bearer token.
#[derive(Clone)]
pub struct HttpEndpoint {
    url: String,
    token: Option<String>,
    agent: Agent,
}

impl std::fmt::Debug for HttpEndpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpEndpoint").field("url", &self.url).field("token", &self.token.as_ref().map(|_| "***")).finish()
    }
}

impl HttpEndpoint {
    pub fn new(url: impl Into<String>, token: Option<String>, timeout: Duration) -> Self {
        let agent: Agent =
            Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        Self { url: url.into(), token, agent }
    }

    fn post<Q: Serialize, R: DeserializeOwned>(&self, body: &Q) -> Result<R, ProviderError> {
        let mut req = self.agent.post(&self.url);
        if let Some(t) = &self.token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req.send_json(body).map_err(map_error)?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(ProviderError::Status(status, text.chars().take(200).collect()));
        }
        resp.body_mut().read_json().map_err(|e| match e {
            ureq::Error::Timeout(_) => ProviderError::Timeout,
            other => ProviderError::InvalidResponse(other.to_string()),
        })
    }
}

fn map_error(e: ureq::Error) -> ProviderError {
    match e {
        ureq::Error::Timeout(_) => ProviderError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => ProviderError::Timeout,
        other => ProviderError::Transport(other.to_string()),
    }
}

impl VisionModel for HttpEndpoint {
    fn describe(&self, request: &VisionRequest) -> Result<TextResponse, ProviderError> {
        self.post(request)
    }
}

impl TextModel for HttpEndpoint {
    fn complete(&self, request: &TextRequest) -> Result<TextResponse, ProviderError> {
        self.post(request)
    }
}

impl EmbeddingProvider for HttpEndpoint {
    fn embed(&self, request: &EmbeddingRequest) -> Result<EmbeddingResponse, ProviderError> {
        self.post(request)
    }
}

impl NliProvider for HttpEndpoint {
    fn infer(&self, request: &NliRequest) -> Result<NliResponse, ProviderError> {
        self.post(request)
    }
}
