use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orchestrator::Case;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("storage error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt record {0}: {1}")]
    Corrupt(String, String),
    #[error("audit trail of {0} would be rewritten")]
    AuditRewrite(String),
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

/// Plot file names: an id, optionally followed by extensions.
fn valid_file_name(name: &str) -> bool {
    !name.starts_with('.') && !name.contains("..") && name.split('.').all(valid_id)
}

/// Writes to a temporary sibling, syncs, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().expect("store paths have a parent");
    let tmp = dir.join(format!(".{}.{}.tmp", path.file_name().unwrap_or_default().to_string_lossy(), uuid::Uuid::new_v4()));
    let mut f = std::fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    std::fs::rename(&tmp, path)
}

/// One directory per case holding `case.json`, the uploaded image and the
/// plot PNGs; evaluation runs and idempotency records live beside them.
#[derive(Debug, Clone)]
pub struct CaseStore {
    root: PathBuf,
}

/// A stored response replayed for a repeated idempotency key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredResponse {
    pub status: u16,
    pub body: serde_json::Value,
}

impl CaseStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for sub in ["cases", "eval-runs", "idempotency"] {
            std::fs::create_dir_all(root.join(sub))?;
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn case_dir(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        Ok(self.root.join("cases").join(id))
    }

    fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, StoreError> {
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => StoreError::NotFound(what.to_string()),
            _ => StoreError::Io(e),
        })?;
        serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt(what.to_string(), e.to_string()))
    }

    /// Persists a new case with its image.
    pub fn create(&self, case: &Case) -> Result<(), StoreError> {
        let dir = self.case_dir(&case.id)?;
        std::fs::create_dir_all(dir.join("plots"))?;
        write_atomic(&dir.join("image"), &case.image)?;
        self.write_case(&dir, case)
    }

    fn write_case(&self, dir: &Path, case: &Case) -> Result<(), StoreError> {
        let json = serde_json::to_vec_pretty(case).expect("cases serialize");
        write_atomic(&dir.join("case.json"), &json)?;
        Ok(())
    }

    /// Saves the case document and any plots. The stored audit trail must
    /// be a prefix of the new one.
    pub fn save(&self, case: &Case) -> Result<(), StoreError> {
        let dir = self.case_dir(&case.id)?;
        let stored: Case = Self::read_json(&dir.join("case.json"), &case.id)?;
        if stored.audit.len() > case.audit.len() || stored.audit[..] != case.audit[..stored.audit.len()] {
            return Err(StoreError::AuditRewrite(case.id.clone()));
        }
        for plot in &case.artifacts.plots {
            if !valid_file_name(&plot.name) {
                return Err(StoreError::Corrupt(case.id.clone(), format!("plot name {:?}", plot.name)));
            }
            write_atomic(&dir.join("plots").join(&plot.name), &plot.bytes)?;
        }
        self.write_case(&dir, case)
    }

    /// Loads the case with its image and plot bytes.
    pub fn load(&self, id: &str) -> Result<Case, StoreError> {
        let dir = self.case_dir(id)?;
        let mut case: Case = Self::read_json(&dir.join("case.json"), id)?;
        case.image = std::fs::read(dir.join("image"))?;
        for plot in &mut case.artifacts.plots {
            if !valid_file_name(&plot.name) {
                return Err(StoreError::Corrupt(id.to_string(), format!("plot name {:?}", plot.name)));
            }
            plot.bytes = std::fs::read(dir.join("plots").join(&plot.name))?;
        }
        Ok(case)
    }

    pub fn image(&self, id: &str) -> Result<Vec<u8>, StoreError> {
        std::fs::read(self.case_dir(id)?.join("image")).map_err(|_| StoreError::NotFound(id.to_string()))
    }

    pub fn plot(&self, id: &str, name: &str) -> Result<Vec<u8>, StoreError> {
        if !valid_file_name(name) {
            return Err(StoreError::NotFound(name.to_string()));
        }
        std::fs::read(self.case_dir(id)?.join("plots").join(name))
            .map_err(|_| StoreError::NotFound(format!("{id}/{name}")))
    }

    pub fn case_ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids: Vec<String> = std::fs::read_dir(self.root.join("cases"))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("case.json").is_file())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        ids.sort();
        Ok(ids)
    }

    pub fn save_json<T: Serialize>(&self, kind: &str, id: &str, value: &T) -> Result<(), StoreError> {
        if !valid_id(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        let json = serde_json::to_vec_pretty(value).expect("records serialize");
        write_atomic(&self.root.join(kind).join(format!("{id}.json")), &json)?;
        Ok(())
    }

    pub fn load_json<T: DeserializeOwned>(&self, kind: &str, id: &str) -> Result<T, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        Self::read_json(&self.root.join(kind).join(format!("{id}.json")), id)
    }

    pub fn list_json<T: DeserializeOwned>(&self, kind: &str) -> Result<Vec<T>, StoreError> {
        let mut paths: Vec<_> = std::fs::read_dir(self.root.join(kind))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("json"))
            .collect();
        paths.sort();
        paths.iter().map(|p| Self::read_json(p, &p.display().to_string())).collect()
    }
}
