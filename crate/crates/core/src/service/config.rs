use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{ScoringConfig, Weights};
use crate::orchestrator::{HttpEndpoint, MockProvider, ProviderSet, RetryPolicy};
use crate::rules::Lexicon;
use crate::segmentation::GrabCutParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    #[default]
    Mock,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    /// Overrides the shared provider token for this endpoint.
    #[serde(default)]
    pub token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProvidersConfig {
    pub mode: ProviderMode,
    /// Mock fixtures directory (`<digest>.json` files).
    pub fixtures: Option<PathBuf>,
    /// Bearer token sent to every live endpoint.
    pub token: Option<String>,
    pub timeout_ms: u64,
    pub vision: Option<EndpointConfig>,
    pub text: Option<EndpointConfig>,
    pub embedding: Option<EndpointConfig>,
    pub nli: Option<EndpointConfig>,
}

impl Default for ProvidersConfig {
    fn default() -> Self {
        Self {
            mode: ProviderMode::Mock,
            fixtures: None,
            token: None,
            timeout_ms: 30_000,
            vision: None,
            text: None,
            embedding: None,
            nli: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub listen: String,
    pub data_dir: PathBuf,
    pub max_image_bytes: usize,
    /// Static bearer token required on every request when set.
    pub auth_token: Option<String>,
    /// Condition names for entity extraction; the built-in list when unset.
    pub lexicon: Option<PathBuf>,
    /// Base for relative corpus and review paths in evaluation runs.
    pub eval_root: PathBuf,
    pub providers: ProvidersConfig,
    pub retry: RetryPolicy,
    pub grabcut: GrabCutParams,
    pub weights: Weights,
    pub scoring: ScoringConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            data_dir: "data".into(),
            max_image_bytes: 10 * 1024 * 1024,
            auth_token: None,
            lexicon: None,
            eval_root: ".".into(),
            providers: ProvidersConfig::default(),
            retry: RetryPolicy::default(),
            grabcut: GrabCutParams::default(),
            weights: Weights::default(),
            scoring: ScoringConfig::default(),
        }
    }
}

/// Environment variables and the config keys they override.
pub const ENV_OVERRIDES: &[(&str, &[&str])] = &[
    ("DERMACEN_LISTEN", &["listen"]),
    ("DERMACEN_DATA_DIR", &["data_dir"]),
    ("DERMACEN_MAX_IMAGE_BYTES", &["max_image_bytes"]),
    ("DERMACEN_AUTH_TOKEN", &["auth_token"]),
    ("DERMACEN_LEXICON", &["lexicon"]),
    ("DERMACEN_EVAL_ROOT", &["eval_root"]),
    ("DERMACEN_PROVIDERS_MODE", &["providers", "mode"]),
    ("DERMACEN_PROVIDERS_FIXTURES", &["providers", "fixtures"]),
    ("DERMACEN_PROVIDERS_TOKEN", &["providers", "token"]),
    ("DERMACEN_PROVIDERS_TIMEOUT_MS", &["providers", "timeout_ms"]),
    ("DERMACEN_PROVIDERS_VISION_URL", &["providers", "vision", "url"]),
    ("DERMACEN_PROVIDERS_TEXT_URL", &["providers", "text", "url"]),
    ("DERMACEN_PROVIDERS_EMBEDDING_URL", &["providers", "embedding", "url"]),
    ("DERMACEN_PROVIDERS_NLI_URL", &["providers", "nli", "url"]),
    ("DERMACEN_RETRY_MAX_RETRIES", &["retry", "max_retries"]),
    ("DERMACEN_RETRY_INITIAL_BACKOFF", &["retry", "initial_backoff"]),
    ("DERMACEN_RETRY_DEADLINE", &["retry", "deadline"]),
    ("DERMACEN_WEIGHTS_W_CONTEXT", &["weights", "w_context"]),
    ("DERMACEN_WEIGHTS_W_ENTITIES", &["weights", "w_entities"]),
    ("DERMACEN_SCORING_WORKERS", &["scoring", "workers"]),
    ("DERMACEN_SCORING_ENTITY_TEMPLATE", &["scoring", "entity_template"]),
];

fn env_value(raw: &str) -> toml::Value {
    if let Ok(i) = raw.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = raw.parse::<f64>() {
        toml::Value::Float(f)
    } else {
        toml::Value::String(raw.to_string())
    }
}

fn set_path(root: &mut toml::Table, path: &[&str], value: toml::Value) {
    let (last, parents) = path.split_last().expect("non-empty key path");
    let mut table = root;
    for key in parents {
        let entry = table.entry(key.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        if !entry.is_table() {
            *entry = toml::Value::Table(toml::Table::new());
        }
        table = entry.as_table_mut().expect("just made a table");
    }
    table.insert(last.to_string(), value);
}

impl ServiceConfig {
    /// Parses TOML, applies overrides from `env`, then validates.
    pub fn from_toml(text: &str, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for (var, path) in ENV_OVERRIDES {
            if let Some(raw) = env(var) {
                set_path(&mut table, path, env_value(&raw));
            }
        }
        let config: Self = table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads the file and applies process environment overrides. Relative
    /// paths in the file are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
        let mut config = Self::from_toml(&text, |k| std::env::var(k).ok())?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_dir);
        fix(&mut self.eval_root);
        if let Some(p) = self.lexicon.as_mut() {
            fix(p);
        }
        if let Some(p) = self.providers.fixtures.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.providers;
        match p.mode {
            ProviderMode::Mock if p.fixtures.is_none() => {
                return Err(ConfigError::Invalid("mock mode requires providers.fixtures".into()));
            }
            ProviderMode::Live => {
                let missing: Vec<_> = [("vision", &p.vision), ("text", &p.text), ("embedding", &p.embedding), ("nli", &p.nli)]
                    .into_iter()
                    .filter(|(_, e)| e.as_ref().is_none_or(|e| e.url.trim().is_empty()))
                    .map(|(n, _)| n)
                    .collect();
                if !missing.is_empty() {
                    return Err(ConfigError::Invalid(format!("live mode requires endpoint urls for {}", missing.join(", "))));
                }
            }
            _ => {}
        }
        if self.max_image_bytes == 0 {
            return Err(ConfigError::Invalid("max_image_bytes must be positive".into()));
        }
        self.weights.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn load_lexicon(&self) -> Result<Option<Lexicon>, ConfigError> {
        self.lexicon
            .as_ref()
            .map(|p| Lexicon::load(p).map_err(|e| ConfigError::Invalid(e.to_string())))
            .transpose()
    }

    /// Builds the provider set. In mock mode the fixture directory is also
    /// returned so evaluation runs can layer corpus fixtures over it.
    pub fn build_providers(&self) -> Result<ProviderSet, ConfigError> {
        let p = &self.providers;
        match p.mode {
            ProviderMode::Mock => {
                let dir = p.fixtures.as_ref().expect("validated");
                let mock = MockProvider::from_dir(dir).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                Ok(ProviderSet::from_mock(Arc::new(mock), self.retry))
            }
            ProviderMode::Live => {
                let timeout = Duration::from_millis(p.timeout_ms);
                let endpoint = |e: &Option<EndpointConfig>| {
                    let e = e.as_ref().expect("validated");
                    Arc::new(HttpEndpoint::new(e.url.clone(), e.token.clone().or_else(|| p.token.clone()), timeout))
                };
                Ok(ProviderSet {
                    vision: endpoint(&p.vision),
                    text: endpoint(&p.text),
                    embedding: endpoint(&p.embedding),
                    nli: endpoint(&p.nli),
                    retry: self.retry,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_env(_: &str) -> Option<String> {
        None
    }

    #[test]
    fn mock_mode_needs_fixtures() {
        assert!(matches!(ServiceConfig::from_toml("", no_env), Err(ConfigError::Invalid(_))));
        let c = ServiceConfig::from_toml("[providers]\nfixtures = \"fx\"\n", no_env).unwrap();
        assert_eq!(c.providers.mode, ProviderMode::Mock);
        assert_eq!(c.weights, Weights::default());
        assert_eq!(c.retry.max_retries, 2);
    }

    #[test]
    fn live_mode_names_missing_endpoints() {
        let text = "[providers]\nmode = \"live\"\n[providers.vision]\nurl = \"http://v\"\n";
        match ServiceConfig::from_toml(text, no_env) {
            Err(ConfigError::Invalid(m)) => assert!(m.contains("text, embedding, nli"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn env_overrides_keys() {
        let env = |k: &str| match k {
            "DERMACEN_LISTEN" => Some("0.0.0.0:9000".to_string()),
            "DERMACEN_PROVIDERS_FIXTURES" => Some("elsewhere".to_string()),
            "DERMACEN_WEIGHTS_W_CONTEXT" => Some("2".to_string()),
            "DERMACEN_RETRY_INITIAL_BACKOFF" => Some("5".to_string()),
            _ => None,
        };
        let c = ServiceConfig::from_toml("listen = \"x\"\n[weights]\nw_context = 1.0\n", env).unwrap();
        assert_eq!(c.listen, "0.0.0.0:9000");
        assert_eq!(c.providers.fixtures, Some(PathBuf::from("elsewhere")));
        assert_eq!(c.weights.w_context, 2.0);
        assert_eq!(c.retry.initial_backoff, Duration::from_millis(5));
    }

    #[test]
    fn every_override_changes_the_config() {
        let base = "[providers]\nfixtures = \"fx\"\n";
        let reference = ServiceConfig::from_toml(base, no_env).unwrap();
        for (var, path) in ENV_OVERRIDES {
            let value = match *path.last().unwrap() {
                "mode" => continue,
                "url" => "http://h",
                "w_context" | "w_entities" => "0.5",
                "max_image_bytes" | "timeout_ms" | "max_retries" | "initial_backoff" | "deadline" | "workers" => "7",
                _ => "x",
            };
            let c = ServiceConfig::from_toml(base, |k| (k == *var).then(|| value.to_string())).unwrap();
            assert_ne!(c, reference, "{var}");
        }
    }
}
