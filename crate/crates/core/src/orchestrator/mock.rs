use std::collections::HashMap;
use std::path::Path;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::providers::*;

#[derive(Debug, Error)]
pub enum MockError {
    #[error("cannot read fixtures: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad fixture {file}: {reason}")]
    Fixture { file: String, reason: String },
}

/// One canned exchange as stored on disk as `<digest>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockFixture {
    pub kind: String,
    pub request: Value,
    pub response: Value,
}

/// SHA-256 over the call kind and the request's canonical JSON (object
/// keys sorted, no whitespace).
pub fn request_digest(kind: &str, request: &impl Serialize) -> String {
    let canonical = serde_json::to_value(request).expect("wire types serialize");
    let body = serde_json::to_vec(&canonical).expect("json values serialize");
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    h.update(b"\n");
    h.update(&body);
    hex::encode(h.finalize())
}

/// Deterministic provider answering from canned responses keyed by request
/// digest. An NLI request whose premise equals its hypothesis and has no
/// fixture is answered with entailment 0.99.
#[derive(Debug, Default)]
pub struct MockProvider {
    fixtures: RwLock<HashMap<String, MockFixture>>,
}

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every `*.json` fixture, checking that each file name is the
    /// digest of its request.
    pub fn from_dir(dir: &Path) -> Result<Self, MockError> {
        let mock = Self::new();
        let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let file = path.display().to_string();
            let bad = |reason: String| MockError::Fixture { file: file.clone(), reason };
            let fixture: MockFixture =
                serde_json::from_slice(&std::fs::read(&path)?).map_err(|e| bad(e.to_string()))?;
            let digest = request_digest(&fixture.kind, &fixture.request);
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            if stem != digest {
                return Err(bad(format!("file name does not match request digest {digest}")));
            }
            mock.fixtures.write().insert(digest, fixture);
        }
        Ok(mock)
    }

    /// Writes all fixtures as `<digest>.json`, pretty-printed.
    pub fn write_dir(&self, dir: &Path) -> Result<(), MockError> {
        std::fs::create_dir_all(dir)?;
        for (digest, fixture) in self.fixtures.read().iter() {
            let text = serde_json::to_string_pretty(fixture).expect("json values serialize");
            std::fs::write(dir.join(format!("{digest}.json")), text + "\n")?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.fixtures.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert<Q: Serialize, R: Serialize>(&self, kind: &str, request: &Q, response: &R) -> String {
        let digest = request_digest(kind, request);
        let fixture = MockFixture {
            kind: kind.to_string(),
            request: serde_json::to_value(request).expect("wire types serialize"),
            response: serde_json::to_value(response).expect("wire types serialize"),
        };
        self.fixtures.write().insert(digest.clone(), fixture);
        digest
    }

    pub fn insert_vision(&self, request: &VisionRequest, text: &str) -> String {
        self.insert("vision", request, &TextResponse { text: text.to_string() })
    }

    pub fn insert_text(&self, request: &TextRequest, text: &str) -> String {
        self.insert("text", request, &TextResponse { text: text.to_string() })
    }

    pub fn insert_embedding(&self, request: &EmbeddingRequest, response: &EmbeddingResponse) -> String {
        self.insert("embedding", request, response)
    }

    pub fn insert_nli(&self, request: &NliRequest, response: &NliResponse) -> String {
        self.insert("nli", request, response)
    }

    fn lookup<Q: Serialize, R: for<'de> Deserialize<'de>>(&self, kind: &str, request: &Q) -> Result<R, ProviderError> {
        let digest = request_digest(kind, request);
        let fixtures = self.fixtures.read();
        let fixture = fixtures
            .get(&digest)
            .ok_or_else(|| ProviderError::MissingFixture { kind: kind.to_string(), digest: digest.clone() })?;
        serde_json::from_value(fixture.response.clone()).map_err(|e| ProviderError::InvalidResponse(e.to_string()))
    }
}

impl VisionModel for MockProvider {
    fn describe(&self, request: &VisionRequest) -> Result<TextResponse, ProviderError> {
        self.lookup("vision", request)
    }
}

impl TextModel for MockProvider {
    fn complete(&self, request: &TextRequest) -> Result<TextResponse, ProviderError> {
        self.lookup("text", request)
    }
}

impl EmbeddingProvider for MockProvider {
    fn embed(&self, request: &EmbeddingRequest) -> Result<EmbeddingResponse, ProviderError> {
        self.lookup("embedding", request)
    }
}

impl NliProvider for MockProvider {
    fn infer(&self, request: &NliRequest) -> Result<NliResponse, ProviderError> {
        match self.lookup("nli", request) {
            Err(ProviderError::MissingFixture { .. }) if request.premise == request.hypothesis => {
                Ok(NliResponse { contradiction: 0.005, neutral: 0.005, entailment: 0.99 })
            }
            other => other,
        }
    }
}
