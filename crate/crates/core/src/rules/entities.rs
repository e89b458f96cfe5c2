use std::collections::HashSet;
use std::path::Path;
use std::sync::LazyLock;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use super::{fold, parse_assessment, RulesError, RulesOfConduct};

const DEFAULT_LEXICON: &str = include_str!("../../resources/lexicon.txt");

/// Diagnosis names in first-mention order, deduplicated case-insensitively.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityList {
    pub entities: Vec<String>,
}

impl EntityList {
    pub fn push(&mut self, entity: &str) {
        let e = entity.trim();
        if !e.is_empty() && !self.entities.iter().any(|x| fold(x) == fold(e)) {
            self.entities.push(e.to_string());
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Entities joined for the entity track of the evaluation.
    pub fn joined(&self) -> String {
        self.entities.join("; ")
    }
}

/// Condition and lesion names used for dictionary matching.
#[derive(Debug, Clone)]
pub struct Lexicon {
    names: Vec<String>,
    matcher: Regex,
}

impl Lexicon {
    /// One entry per line; blank lines and `#` comments are ignored. The
    /// closed lesion list is always added.
    pub fn parse(text: &str) -> Self {
        let mut names: Vec<String> = Vec::new();
        let mut seen = HashSet::new();
        let listed = RulesOfConduct::lesion().allowed_diagnoses.clone().unwrap_or_default();
        let lines = text.lines().map(|l| l.split('#').next().unwrap_or("").trim().to_string());
        for name in lines.chain(listed) {
            if !name.is_empty() && seen.insert(fold(&name)) {
                names.push(name);
            }
        }
        let mut alternatives: Vec<&String> = names.iter().collect();
        alternatives.sort_by_key(|n| std::cmp::Reverse(n.len()));
        let pattern = alternatives
            .iter()
            .map(|n| n.split_whitespace().map(regex::escape).collect::<Vec<_>>().join(r"\s+"))
            .collect::<Vec<_>>()
            .join("|");
        let matcher = RegexBuilder::new(&format!(r"\b(?:{pattern})\b(?:\s*\(([^()]{{1,60}})\))?"))
            .case_insensitive(true)
            .build()
            .expect("escaped alternatives");
        Self { names, matcher }
    }

    pub fn load(path: &Path) -> Result<Self, RulesError> {
        std::fs::read_to_string(path).map(|t| Self::parse(&t)).map_err(|e| RulesError::Lexicon(e.to_string()))
    }

    pub fn default_lexicon() -> &'static Self {
        &DEFAULT
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn canonical(&self, surface: &str) -> String {
        let f = fold(surface);
        self.names.iter().find(|n| fold(n) == f).cloned().unwrap_or_else(|| surface.to_string())
    }

    /// Dictionary hits in order, in canonical spelling with any directly
    /// following parenthetical kept.
    fn find_all(&self, text: &str) -> Vec<String> {
        self.matcher
            .captures_iter(text)
            .map(|c| {
                let whole = c.get(0).unwrap().as_str();
                let base = match c.get(1) {
                    Some(p) => whole[..whole.len() - p.as_str().len() - 2].trim_end(),
                    None => whole,
                };
                let name = self.canonical(base);
                match c.get(1) {
                    Some(p) => format!("{name} ({})", p.as_str().trim()),
                    None => name,
                }
            })
            .collect()
    }
}

static DEFAULT: LazyLock<Lexicon> = LazyLock::new(|| Lexicon::parse(DEFAULT_LEXICON));

static PREMISE_CUE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:the\s+(?:most\s+likely\s+)?diagnosis\s+is|diagnosis\s+is|diagnosed\s+(?:as|with)|classical\s+for|classic\s+for|typical\s+of|diagnostic\s+of|consistent\s+with|in\s+keeping\s+with)\s+([^.;\n]+)",
    )
    .unwrap()
});

pub fn extract_entities(text: &str, premise_mode: bool) -> EntityList {
    extract_entities_with(text, premise_mode, Lexicon::default_lexicon())
}

/// Premise mode reads diagnostic cue phrases ("The diagnosis is ...",
/// "classical for ...") first. Otherwise the structured diagnosis section
/// is used when present (final diagnosis preferred), then dictionary
/// matching over the whole text.
pub fn extract_entities_with(text: &str, premise_mode: bool, lexicon: &Lexicon) -> EntityList {
    let mut out = EntityList::default();
    if premise_mode {
        for cap in PREMISE_CUE.captures_iter(text) {
            let tail = &cap[1];
            match lexicon.find_all(tail).into_iter().next() {
                Some(hit) => out.push(&hit),
                None => {
                    let phrase = tail.split(',').next().unwrap_or("").trim();
                    if !phrase.is_empty() && phrase.split_whitespace().count() <= 6 {
                        out.push(phrase);
                    }
                }
            }
        }
        if !out.is_empty() {
            return out;
        }
    }
    if let Ok(a) = parse_assessment(text) {
        if let Some(f) = &a.final_diagnosis {
            out.push(f);
            return out;
        }
        for d in &a.diagnoses {
            out.push(d);
        }
        if !out.is_empty() {
            return out;
        }
    }
    for hit in lexicon.find_all(text) {
        out.push(&hit);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const CASE1_HYPOTHESIS: &str = "Diagnosis - Darier Disease (Keratosis Follicularis)\n\nClinical Features Supporting Diagnosis:\nThe patient presents with several key features that indicate Darier Disease:\n\n1. Longstanding History: The patient has experienced these skin lesions since a young age.";
    const CASE1_PREMISE: &str = "The diagnosis is Darier disease, an autosomal dominant genodermatosis. It typically presents with scaly, crusted papules in a seborrhoeic distribution and in skin folds.";
    const CASE2_PREMISE: &str = "This rash and history is classical for erysipelas.\nErysipelas is a superficial form of cellulitis, a potentially serious bacterial infection affecting the skin.";

    #[test]
    fn example_entities() {
        assert_eq!(extract_entities(CASE1_HYPOTHESIS, false).entities, ["Darier Disease (Keratosis Follicularis)"]);
        assert_eq!(extract_entities(CASE1_PREMISE, true).entities, ["Darier Disease"]);
        assert_eq!(extract_entities(CASE2_PREMISE, true).entities, ["Erysipelas"]);
        assert_eq!(extract_entities("Diagnosis - Cellulitis\nClinical Features Supporting the Diagnosis:", false).entities, ["Cellulitis"]);
    }

    #[test]
    fn repeated_mentions_dedup() {
        let e = extract_entities("Melanoma. The lesion suggests melanoma; MELANOMA is likely.", false);
        assert_eq!(e.entities, ["melanoma"]);
    }

    #[test]
    fn longest_match_and_parenthetical() {
        let e = extract_entities("Findings favour pigmented basal cell carcinoma over atypical (dysplastic) nevus.", false);
        assert_eq!(e.entities, ["Pigmented Basal Cell Carcinoma", "Atypical (Dysplastic) Nevus"]);
        let e = extract_entities("Likely aphthous stomatitis (canker sore).", false);
        assert_eq!(e.entities, ["Aphthous stomatitis (canker sore)"]);
    }

    #[test]
    fn final_diagnosis_wins_in_structured_text() {
        let text = include_str!("../../fixtures/use-cases/condition_followup.txt");
        assert_eq!(extract_entities(text, false).entities, ["Aphthous stomatitis (canker sore)"]);
    }

    #[test]
    fn custom_lexicon_file_format() {
        let lex = Lexicon::parse("# comment\n\nMadeup Dermatosis  # trailing\n");
        assert!(lex.names().iter().any(|n| n == "Madeup Dermatosis"));
        assert!(lex.names().iter().any(|n| n == "melanoma"));
        assert_eq!(extract_entities_with("signs of madeup dermatosis", false, &lex).entities, ["Madeup Dermatosis"]);
        assert!(extract_entities_with("nothing here", false, &lex).is_empty());
    }

    #[test]
    fn premise_cue_without_lexicon_hit_keeps_phrase() {
        let e = extract_entities("The diagnosis is frobnication syndrome, a rare disorder.", true);
        assert_eq!(e.entities, ["frobnication syndrome"]);
    }
}
