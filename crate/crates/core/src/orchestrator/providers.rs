use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisionRequest {
    /// Base64 of the PNG or JPEG bytes.
    pub image: String,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRequest {
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextResponse {
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Sentence,
    Token,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRequest {
    pub texts: Vec<String>,
    pub granularity: Granularity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenVector {
    pub token: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_vectors: Option<Vec<Vec<TokenVector>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliRequest {
    pub premise: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliResponse {
    pub contradiction: f64,
    pub neutral: f64,
    pub entailment: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("provider timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned HTTP {0}: {1}")]
    Status(u16, String),
    #[error("invalid provider response: {0}")]
    InvalidResponse(String),
    #[error("no mock fixture for {kind} request {digest}")]
    MissingFixture { kind: String, digest: String },
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        match self {
            Self::Timeout | Self::Transport(_) => true,
            Self::Status(code, _) => *code == 429 || *code >= 500,
            Self::InvalidResponse(_) | Self::MissingFixture { .. } => false,
        }
    }
}

pub trait VisionModel: Send + Sync {
    fn describe(&self, request: &VisionRequest) -> Result<TextResponse, ProviderError>;
}

pub trait TextModel: Send + Sync {
    fn complete(&self, request: &TextRequest) -> Result<TextResponse, ProviderError>;
}

pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, request: &EmbeddingRequest) -> Result<EmbeddingResponse, ProviderError>;
}

pub trait NliProvider: Send + Sync {
    fn infer(&self, request: &NliRequest) -> Result<NliResponse, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    #[serde(with = "millis")]
    pub initial_backoff: Duration,
    #[serde(with = "millis")]
    pub deadline: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 2, initial_backoff: Duration::from_secs(1), deadline: Duration::from_secs(60) }
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retried<T> {
    pub value: T,
    pub retries: u32,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{error} (after {retries} retries)")]
pub struct RetryFailure {
    pub error: ProviderError,
    pub retries: u32,
}

impl RetryPolicy {
    /// Calls `f` until it succeeds, fails with a non-retryable error, runs
    /// out of retries, or the next backoff would overrun the deadline.
    /// Backoff doubles after each failure.
    pub fn run<T>(&self, mut f: impl FnMut() -> Result<T, ProviderError>) -> Result<Retried<T>, RetryFailure> {
        let start = Instant::now();
        let mut backoff = self.initial_backoff;
        let mut retries = 0;
        loop {
            match f() {
                Ok(value) => return Ok(Retried { value, retries }),
                Err(error) => {
                    let out_of_time = start.elapsed() + backoff >= self.deadline;
                    if !error.is_retryable() || retries >= self.max_retries || out_of_time {
                        return Err(RetryFailure { error, retries });
                    }
                    std::thread::sleep(backoff);
                    backoff = backoff.saturating_mul(2);
                    retries += 1;
                }
            }
        }
    }
}

/// The four model endpoints the workflow and the evaluation depend on.
#[derive(Clone)]
pub struct ProviderSet {
    pub vision: Arc<dyn VisionModel>,
    pub text: Arc<dyn TextModel>,
    pub embedding: Arc<dyn EmbeddingProvider>,
    pub nli: Arc<dyn NliProvider>,
    pub retry: RetryPolicy,
}

impl ProviderSet {
    /// Every role served by one mock.
    pub fn from_mock(mock: Arc<super::MockProvider>, retry: RetryPolicy) -> Self {
        Self { vision: mock.clone(), text: mock.clone(), embedding: mock.clone(), nli: mock, retry }
    }

    pub fn describe(&self, request: &VisionRequest) -> Result<Retried<TextResponse>, RetryFailure> {
        self.retry.run(|| self.vision.describe(request))
    }

    pub fn complete(&self, request: &TextRequest) -> Result<Retried<TextResponse>, RetryFailure> {
        self.retry.run(|| self.text.complete(request))
    }

    pub fn embed(&self, request: &EmbeddingRequest) -> Result<Retried<EmbeddingResponse>, RetryFailure> {
        self.retry.run(|| self.embedding.embed(request))
    }

    pub fn infer(&self, request: &NliRequest) -> Result<Retried<NliResponse>, RetryFailure> {
        self.retry.run(|| self.nli.infer(request))
    }
}
