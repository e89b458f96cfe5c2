use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::rules::{extract_entities_with, Lexicon};

/// One question answered twice: the reference explanation (premise) and the
/// workflow's answer (hypothesis), plus the diagnosis each names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCase {
    pub id: String,
    #[serde(default)]
    pub question: String,
    pub premise: String,
    #[serde(default)]
    pub premise_entity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub hypothesis: String,
    #[serde(default)]
    pub hypothesis_entity: String,
    /// Set when an entity field was empty and extraction found nothing.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub entity_extraction_failed: bool,
}

impl EvalCase {
    /// Fills empty entity fields from the texts.
    pub fn fill_entities(&mut self, lexicon: &Lexicon) {
        if self.premise_entity.trim().is_empty() {
            self.premise_entity = extract_entities_with(&self.premise, true, lexicon).joined();
        }
        if self.hypothesis_entity.trim().is_empty() {
            self.hypothesis_entity = extract_entities_with(&self.hypothesis, false, lexicon).joined();
        }
        self.entity_extraction_failed =
            self.premise_entity.trim().is_empty() || self.hypothesis_entity.trim().is_empty();
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.id.trim().is_empty() {
            out.push("id is empty".to_string());
        }
        if self.premise.trim().is_empty() {
            out.push("premise is empty".to_string());
        }
        if self.hypothesis.trim().is_empty() {
            out.push("hypothesis is empty".to_string());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusIssue {
    pub file: String,
    pub message: String,
}

/// Reads `<dir>/cases/*.json` (or `<dir>/*.json` when there is no `cases`
/// subdirectory) in file-name order. Every problem is collected before
/// failing.
pub fn load_corpus(dir: &Path) -> Result<Vec<EvalCase>, EvalError> {
    load_corpus_with(dir, Lexicon::default_lexicon())
}

pub fn load_corpus_with(dir: &Path, lexicon: &Lexicon) -> Result<Vec<EvalCase>, EvalError> {
    let cases_dir = if dir.join("cases").is_dir() { dir.join("cases") } else { dir.to_path_buf() };
    let mut files: Vec<_> = std::fs::read_dir(&cases_dir)
        .map_err(|e| EvalError::Io(format!("{}: {e}", cases_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|x| x.to_str()) == Some("json"))
        .collect();
    files.sort();

    let mut cases = Vec::new();
    let mut issues = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for path in files {
        let file = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let parsed = std::fs::read(&path)
            .map_err(|e| e.to_string())
            .and_then(|b| serde_json::from_slice::<EvalCase>(&b).map_err(|e| e.to_string()));
        match parsed {
            Ok(mut case) => {
                let problems = case.problems();
                if !seen.insert(case.id.clone()) {
                    issues.push(CorpusIssue { file: file.clone(), message: format!("duplicate id {}", case.id) });
                }
                if problems.is_empty() {
                    case.fill_entities(lexicon);
                    cases.push(case);
                } else {
                    issues.extend(problems.into_iter().map(|message| CorpusIssue { file: file.clone(), message }));
                }
            }
            Err(message) => issues.push(CorpusIssue { file, message }),
        }
    }
    if !issues.is_empty() {
        return Err(EvalError::Corpus(issues));
    }
    if cases.is_empty() {
        return Err(EvalError::EmptyInput("corpus"));
    }
    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) {
        std::fs::write(dir.join(name), body).unwrap();
    }

    #[test]
    fn loads_sorted_and_fills_entities() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "b.json",
            r#"{"id":"b","premise":"The diagnosis is Erysipelas.","hypothesis":"Final Diagnosis: Cellulitis"}"#,
        );
        write(dir.path(), "a.json", r#"{"id":"a","premise":"p","premise_entity":"X","hypothesis":"h","hypothesis_entity":"Y"}"#);
        let cases = load_corpus(dir.path()).unwrap();
        assert_eq!(cases[0].id, "a");
        assert_eq!(cases[1].premise_entity, "Erysipelas");
        assert_eq!(cases[1].hypothesis_entity, "Cellulitis");
        assert!(!cases[1].entity_extraction_failed);
    }

    #[test]
    fn itemizes_every_problem() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.json", r#"{"id":"a","premise":"","hypothesis":""}"#);
        write(dir.path(), "b.json", "not json");
        write(dir.path(), "c.json", r#"{"id":"c","premise":"Nothing named.","hypothesis":"Nothing here."}"#);
        match load_corpus(dir.path()) {
            Err(EvalError::Corpus(issues)) => {
                assert_eq!(issues.len(), 3);
                assert!(issues.iter().all(|i| i.file != "c.json"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flags_failed_extraction() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "c.json", r#"{"id":"c","premise":"Nothing named.","hypothesis":"Nothing here."}"#);
        let cases = load_corpus(dir.path()).unwrap();
        assert!(cases[0].entity_extraction_failed);
    }
}
